#include "varmt/backtranslate/backtranslate.hpp"

#include <fstream>

#include "varmt/common/error.hpp"
#include "varmt/common/files.hpp"
#include "varmt/mt/decode.hpp"

namespace varmt {

ReverseModel train_reverse_model(const TokenizedParallel& std_to_src, const mt::ModelConfig& config,
                                 const mt::TrainConfig& tc, const TokenizedParallel* dev) {
  if (std_to_src.empty()) throw Error("train_reverse_model: empty corpus");
  TokenizedCorpus in, out;
  for (const auto& p : std_to_src) {
    in.push_back(p.src);
    out.push_back(p.tgt);
  }
  ReverseModel r{mt::build_softmax_model(config, Vocabulary::build(in), Vocabulary::build(out)), {}};
  r.result = mt::train(r.model, std_to_src, tc, dev);
  return r;
}

std::string join_subwords(const std::vector<std::string>& tokens, std::string_view marker) {
  std::vector<SubwordToken> toks;
  for (const auto& t : tokens) toks.push_back(make_token(t, marker));
  if (!toks.empty() && toks.back().is_continuation) {
    toks.back() = SubwordToken{std::string(strip_marker(toks.back().surface, marker)), false};
  }
  return restore_bpe(toks, marker);
}

PseudoParallel synthesize_with(const SegmentTranslator& translate, const MonoCorpus& tgt_mono,
                               const BpeSegmenter& tgt_codes) {
  PseudoParallel out;
  out.corpus.origin = Origin::pseudo;
  for (const auto& s : tgt_mono.sentences) {
    const std::size_t index = out.stats.input++;
    const auto tokens = tgt_codes.tokenize(s);
    std::optional<std::vector<std::string>> hyp;
    if (!tokens.empty()) hyp = translate(tokens);
    std::string text = hyp ? join_subwords(*hyp, tgt_codes.codes().marker) : std::string();
    if (text.empty()) {
      ++out.stats.dropped;
      continue;
    }
    out.corpus.pairs.emplace_back(std::move(text), s);
    out.kept.push_back(index);
    ++out.stats.kept;
  }
  return out;
}

PseudoParallel synthesize_pseudo_parallel(const mt::Seq2SeqModel& model, const MonoCorpus& tgt_mono,
                                          const BpeSegmenter& tgt_codes, std::size_t beam,
                                          std::size_t threads) {
  const std::size_t n = tgt_mono.size();
  std::vector<std::vector<std::string>> tokens(n);
  std::size_t unk = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tokens[i] = tgt_codes.tokenize(tgt_mono.sentences[i]);
    for (const auto& t : tokens[i]) {
      ++total;
      if (!model.src_vocab.contains(t)) ++unk;
    }
  }
  if (total > 0 && unk == total)
    throw Error("backtranslate: no segmented token is known to the model; codes and model do not match");

  const auto results = mt::translate_all(model, tokens, beam, true, threads);

  std::size_t next = 0, truncated = 0;
  auto out = synthesize_with(
      [&](const std::vector<std::string>&) -> std::optional<std::vector<std::string>> {
        // Called once per sentence with non-empty segmentation, in order.
        while (next < n && tokens[next].empty()) ++next;
        const auto& r = results[next++];
        if (r.truncated) ++truncated;
        return r.tokens;
      },
      tgt_mono, tgt_codes);
  out.stats.truncated = truncated;
  out.stats.unk_tokens = unk;
  out.stats.total_tokens = total;
  return out;
}

void write_pseudo_parallel(const std::filesystem::path& stem, const PseudoParallel& data) {
  const std::string base = stem.string();
  write_parallel(base + ".src", base + ".tgt", data.corpus);
  const auto& s = data.stats;
  files::write_lines(base + ".stats",
                     {"input=" + std::to_string(s.input), "kept=" + std::to_string(s.kept),
                      "dropped=" + std::to_string(s.dropped), "truncated=" + std::to_string(s.truncated),
                      "unk_tokens=" + std::to_string(s.unk_tokens),
                      "total_tokens=" + std::to_string(s.total_tokens)});
}

}  // namespace varmt
