#include "varmt/mt/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

#include "varmt/common/error.hpp"

namespace varmt::mt {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Candidate {
  std::size_t parent;
  TokenId token;
  double logp;
};

Eigen::VectorXd log_softmax(const RowVector& z) {
  const double mx = z.maxCoeff();
  const double lse = mx + std::log((z.array() - mx).exp().sum());
  return (z.array() - lse).transpose();
}

// Output plus </s> must fit the decoder window, so a truncated hypothesis can
// still be used as a training target.
std::size_t output_steps(const Seq2SeqModel& model) {
  require(model.config.max_len >= 2, "translate: max_len must be at least 2");
  return model.config.max_len - 1;
}

}  // namespace

std::vector<TokenId> banned_outputs() { return {Vocabulary::kPadId, Vocabulary::kUnkId}; }

Hypothesis beam_search(const NextLogProbs& next, std::size_t beam, std::size_t max_len, TokenId eos,
                       const std::vector<TokenId>& banned) {
  require(beam >= 1, "beam_search: beam must be at least 1");
  require(max_len >= 1, "beam_search: max_len must be at least 1");
  struct Live {
    std::vector<TokenId> tokens;
    double logp;
  };
  std::vector<Live> live{{{}, 0.0}};
  std::vector<Hypothesis> finished;

  for (std::size_t step = 1; step <= max_len && !live.empty(); ++step) {
    std::vector<Candidate> cands;
    for (std::size_t h = 0; h < live.size(); ++h) {
      Eigen::VectorXd lp = next(live[h].tokens);
      for (auto b : banned)
        if (b >= 0 && b < lp.size()) lp[b] = kNegInf;
      for (Eigen::Index j = 0; j < lp.size(); ++j)
        if (lp[j] > kNegInf) cands.push_back({h, static_cast<TokenId>(j), live[h].logp + lp[j]});
    }
    const std::size_t keep = std::min(beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.logp != b.logp) return a.logp > b.logp;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Live> next_live;
    for (std::size_t c = 0; c < keep; ++c) {
      const auto& cand = cands[c];
      if (cand.token == eos) {
        finished.push_back({live[cand.parent].tokens, cand.logp / static_cast<double>(step), false});
      } else {
        auto toks = live[cand.parent].tokens;
        toks.push_back(cand.token);
        next_live.push_back({std::move(toks), cand.logp});
      }
    }
    live = std::move(next_live);
    if (finished.size() >= beam) {
      live.clear();
      break;
    }
  }
  for (auto& l : live)
    finished.push_back({std::move(l.tokens), l.logp / static_cast<double>(max_len), true});
  require(!finished.empty(), "beam_search: every token is banned");
  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i)
    if (finished[i].score > finished[best].score) best = i;
  return finished[best];
}

Hypothesis greedy_continuous(const NextVector& next, const Matrix& table, TokenId eos,
                             std::size_t max_len, const std::vector<TokenId>& banned) {
  require(max_len >= 1, "greedy_continuous: max_len must be at least 1");
  std::vector<bool> allowed(static_cast<std::size_t>(table.rows()), true);
  for (auto b : banned)
    if (b >= 0 && b < table.rows()) allowed[static_cast<std::size_t>(b)] = false;
  Hypothesis h;
  TokenId prev = eos;
  for (std::size_t step = 0; step < max_len; ++step) {
    const RowVector pred = next(prev);
    require(pred.size() == table.cols(), "greedy_continuous: prediction width mismatch");
    const Eigen::VectorXd sims = table * pred.transpose();
    TokenId arg = -1;
    for (Eigen::Index i = 0; i < sims.size(); ++i)
      if (allowed[static_cast<std::size_t>(i)] && (arg < 0 || sims[i] > sims[arg])) arg = static_cast<TokenId>(i);
    require(arg >= 0, "greedy_continuous: every token is banned");
    if (arg == eos) return h;
    h.tokens.push_back(arg);
    prev = arg;
  }
  h.truncated = true;
  return h;
}

Hypothesis translate_greedy(const Seq2SeqModel& model, const std::vector<TokenId>& src) {
  if (src.empty()) throw Error("translate: empty source sentence");
  const auto mem = encode_source(model, src);
  auto cache = empty_cache(model);
  if (model.continuous()) {
    return greedy_continuous([&](TokenId prev) { return decoder_step(model, mem, cache, prev); },
                             model.output_table, Vocabulary::kEosId, output_steps(model),
                             banned_outputs());
  }
  return translate_beam(model, src, 1);
}

Hypothesis translate_beam(const Seq2SeqModel& model, const std::vector<TokenId>& src,
                          std::size_t beam) {
  if (model.continuous()) throw Error("translate_beam: beam search needs the softmax head");
  if (src.empty()) throw Error("translate: empty source sentence");
  const auto mem = encode_source(model, src);
  // Decoder state after feeding </s> and the whole prefix, keyed by prefix.
  std::map<std::vector<TokenId>, DecoderCache> states;
  auto next = [&](const std::vector<TokenId>& prefix) -> Eigen::VectorXd {
    DecoderCache cache;
    TokenId feed = Vocabulary::kEosId;
    if (prefix.empty()) {
      cache = empty_cache(model);
    } else {
      std::vector<TokenId> parent(prefix.begin(), prefix.end() - 1);
      auto it = states.find(parent);
      require(it != states.end(), "translate_beam: missing decoder state");
      cache = it->second;
      feed = prefix.back();
    }
    const RowVector logits = decoder_step(model, mem, cache, feed);
    std::erase_if(states, [&](const auto& kv) { return kv.first.size() + 1 < prefix.size(); });
    states[prefix] = std::move(cache);
    return log_softmax(logits);
  };
  return beam_search(next, beam, output_steps(model), Vocabulary::kEosId, banned_outputs());
}

Translation translate(const Seq2SeqModel& model, const std::vector<std::string>& src,
                      std::size_t beam, bool allow_unk) {
  const auto ids = model.src_vocab.encode(src, allow_unk);
  const auto h = model.continuous() ? translate_greedy(model, ids) : translate_beam(model, ids, beam);
  return {model.tgt_vocab.decode(h.tokens), h.truncated};
}

std::vector<Translation> translate_all(const Seq2SeqModel& model,
                                       const std::vector<std::vector<std::string>>& sentences,
                                       std::size_t beam, bool allow_unk, std::size_t threads) {
  const std::size_t n = sentences.size();
  std::vector<Translation> out(n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      if (!sentences[i].empty()) out[i] = translate(model, sentences[i], beam, allow_unk);
  };
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    work(0, n);
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work, n * w / threads, n * (w + 1) / threads);
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace varmt::mt
