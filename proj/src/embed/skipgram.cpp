#include "varmt/embed/skipgram.hpp"

#include <atomic>
#include <cmath>
#include <random>
#include <thread>
#include <unordered_map>

#include "varmt/common/error.hpp"

namespace varmt {
namespace {

constexpr std::size_t kNoiseTableSize = 10'000'000;

void fill_uniform(RowMatrixF& m, Eigen::Index first_row, float bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-bound, bound);
  for (Eigen::Index r = first_row; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = u(rng);
}

void check_config(const SkipgramConfig& c) {
  require(c.dim > 0 && c.window > 0 && c.negatives > 0 && c.min_count > 0 && c.threads > 0,
          "skip-gram config counts must be positive");
  require(c.learning_rate > 0, "skip-gram learning rate must be positive");
}

// Unigram^0.75 table, as in the standard negative-sampling trainers.
std::vector<std::uint32_t> noise_table(const EmbeddingModel& m) {
  double z = 0;
  for (std::size_t i = 0; i < m.vocab_size(); ++i) z += std::pow(static_cast<double>(m.count(i)), 0.75);
  const std::size_t size = std::min<std::size_t>(kNoiseTableSize, 1000 * m.vocab_size() + 1000);
  std::vector<std::uint32_t> table;
  table.reserve(size);
  for (std::size_t i = 0; i < m.vocab_size(); ++i) {
    const double share = std::pow(static_cast<double>(m.count(i)), 0.75) / z;
    const auto n = static_cast<std::size_t>(std::ceil(share * static_cast<double>(size)));
    table.insert(table.end(), n, static_cast<std::uint32_t>(i));
  }
  return table;
}

inline float sigmoid(float x) {
  if (x > 8.0f) return 1.0f;
  if (x < -8.0f) return 0.0f;
  return 1.0f / (1.0f + std::exp(-x));
}

struct Trainer {
  EmbeddingModel& m;
  const SkipgramConfig& cfg;
  const std::vector<std::vector<std::uint32_t>>& sentences;
  std::vector<std::uint32_t> noise;
  std::size_t total_tokens = 0;
  std::atomic<std::size_t> processed{0};

  void run_worker(std::size_t worker, std::size_t begin, std::size_t end) {
    std::mt19937_64 rng(cfg.seed * 7919 + 17 + worker);
    std::uniform_int_distribution<std::size_t> pick(0, noise.size() - 1);
    const auto d = static_cast<Eigen::Index>(m.dim());
    Eigen::VectorXf hidden(d), grad(d);
    const double budget = static_cast<double>(cfg.epochs * total_tokens);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      for (std::size_t s = begin; s < end; ++s) {
        const auto& ids = sentences[s];
        const double progress = static_cast<double>(processed.load(std::memory_order_relaxed)) / budget;
        const float lr = static_cast<float>(cfg.learning_rate * std::max(0.0, 1.0 - progress));
        std::uniform_int_distribution<std::size_t> span(1, cfg.window);
        for (std::size_t w = 0; w < ids.size(); ++w) {
          const std::size_t b = span(rng);
          const std::size_t lo = w >= b ? w - b : 0;
          const std::size_t hi = std::min(ids.size() - 1, w + b);
          const auto& rows = m.buckets_of(ids[w]);
          for (std::size_t c = lo; c <= hi; ++c) {
            if (c == w) continue;
            hidden = m.composed(ids[w]);
            grad.setZero();
            for (std::size_t k = 0; k <= cfg.negatives; ++k) {
              std::uint32_t target = ids[c];
              float label = 1.0f;
              if (k > 0) {
                target = noise[pick(rng)];
                if (target == ids[c]) continue;
                label = 0.0f;
              }
              auto ctx = m.context_vectors.row(target);
              const float g = lr * (label - sigmoid(ctx.dot(hidden.transpose())));
              grad += g * ctx.transpose();
              ctx += g * hidden.transpose();
            }
            m.token_vectors.row(ids[w]) += grad.transpose();
            for (auto r : rows) m.ngram_buckets.row(r) += grad.transpose();
          }
        }
        processed.fetch_add(ids.size(), std::memory_order_relaxed);
      }
    }
  }
};

}  // namespace

std::vector<std::pair<std::string, std::int64_t>> count_tokens(const TokenizedCorpus& corpus,
                                                                std::size_t min_count) {
  std::unordered_map<std::string, std::size_t> pos;
  std::vector<std::pair<std::string, std::int64_t>> out;
  for (const auto& sent : corpus)
    for (const auto& t : sent) {
      auto [it, inserted] = pos.try_emplace(t, out.size());
      if (inserted) out.emplace_back(t, 0);
      ++out[it->second].second;
    }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::erase_if(out, [&](const auto& p) { return p.second < static_cast<std::int64_t>(min_count); });
  return out;
}

EmbeddingModel initialize_embeddings(const std::vector<std::string>& tokens,
                                     const SkipgramConfig& config) {
  check_config(config);
  EmbeddingModel m(config.dim, config.bucket_count, config.min_n, config.max_n);
  for (const auto& t : tokens) m.add_token(t);
  std::mt19937_64 rng(config.seed);
  const float bound = 1.0f / (2.0f * static_cast<float>(config.dim));
  fill_uniform(m.token_vectors, 0, bound, rng);
  fill_uniform(m.ngram_buckets, 0, bound, rng);
  return m;
}

EmbeddingModel transfer_init(const EmbeddingModel& parent, const std::vector<std::string>& tgt_vocab,
                             std::uint64_t seed) {
  require(!tgt_vocab.empty(), "transfer_init: empty target vocabulary");
  EmbeddingModel m(parent.dim(), parent.bucket_count(), parent.min_n(), parent.max_n());
  m.ngram_buckets = parent.ngram_buckets;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f / (2.0f * static_cast<float>(parent.dim())),
                                          1.0f / (2.0f * static_cast<float>(parent.dim())));
  for (const auto& t : tgt_vocab) {
    const auto from = parent.find(t);
    const auto i = static_cast<Eigen::Index>(m.add_token(t, from ? parent.count(*from) : 0));
    if (from) {
      m.token_vectors.row(i) = parent.token_vectors.row(static_cast<Eigen::Index>(*from));
      m.context_vectors.row(i) = parent.context_vectors.row(static_cast<Eigen::Index>(*from));
    } else {
      for (Eigen::Index c = 0; c < m.token_vectors.cols(); ++c) m.token_vectors(i, c) = u(rng);
    }
  }
  return m;
}

EmbeddingModel train_embeddings(const TokenizedCorpus& corpus, const SkipgramConfig& config,
                                const EmbeddingModel* init) {
  check_config(config);
  if (corpus.empty()) throw Error("train_embeddings: empty corpus");
  const auto counted = count_tokens(corpus, config.min_count);
  if (counted.empty()) throw Error("train_embeddings: no token reaches min_count");
  std::vector<std::string> tokens;
  for (const auto& [t, c] : counted) tokens.push_back(t);

  EmbeddingModel m;
  if (init) {
    if (init->dim() != config.dim || init->bucket_count() != config.bucket_count ||
        init->min_n() != config.min_n || init->max_n() != config.max_n)
      throw Error("train_embeddings: init model dim/bucket/n-gram settings differ from config");
    m = transfer_init(*init, tokens, config.seed);
  } else {
    m = initialize_embeddings(tokens, config);
  }
  for (std::size_t i = 0; i < counted.size(); ++i) m.set_count(i, counted[i].second);
  if (config.epochs == 0) return m;

  std::vector<std::vector<std::uint32_t>> ids;
  ids.reserve(corpus.size());
  std::size_t total = 0;
  for (const auto& sent : corpus) {
    std::vector<std::uint32_t> s;
    for (const auto& t : sent)
      if (auto i = m.find(t)) s.push_back(static_cast<std::uint32_t>(*i));
    if (s.size() < 2) continue;
    total += s.size();
    ids.push_back(std::move(s));
  }
  if (ids.empty()) return m;

  Trainer tr{m, config, ids, noise_table(m)};
  tr.total_tokens = total;
  if (config.threads == 1) {
    tr.run_worker(0, 0, ids.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t n = config.threads;
    for (std::size_t w = 0; w < n; ++w)
      pool.emplace_back([&, w] { tr.run_worker(w, ids.size() * w / n, ids.size() * (w + 1) / n); });
    for (auto& t : pool) t.join();
  }
  return m;
}

}  // namespace varmt
