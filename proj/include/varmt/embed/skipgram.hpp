#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "varmt/embed/embedding_model.hpp"

namespace varmt {

struct SkipgramConfig {
  std::size_t dim = 300;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.05;
  std::size_t bucket_count = kDefaultBucketCount;
  std::size_t min_count = 1;
  std::size_t min_n = 3;
  std::size_t max_n = 6;
  std::uint64_t seed = 1;
  /// 1 = deterministic. More threads update shared rows without locks.
  std::size_t threads = 1;
};

/// Default initialization over `tokens`: token and bucket rows uniform in
/// [-1/(2d), 1/(2d)], context rows zero.
EmbeddingModel initialize_embeddings(const std::vector<std::string>& tokens,
                                     const SkipgramConfig& config);

/// Starting point for continued training over a new vocabulary: the bucket
/// table is copied wholesale (same hash space), token and context rows are
/// copied for tokens the parent knows, and other tokens get a fresh random
/// token row and a zero context row.
EmbeddingModel transfer_init(const EmbeddingModel& parent, const std::vector<std::string>& tgt_vocab,
                             std::uint64_t seed = 1);

/// Skip-gram with negative sampling over subword tokens; a token's input
/// representation is its composed vector. The learning rate decays linearly
/// to zero. With `init`, training starts from transfer_init(*init, vocab).
/// Returns an unfinalized model.
EmbeddingModel train_embeddings(const TokenizedCorpus& corpus, const SkipgramConfig& config,
                                const EmbeddingModel* init = nullptr);

/// Token list ordered by descending frequency (ties: first appearance),
/// keeping tokens with count >= min_count.
std::vector<std::pair<std::string, std::int64_t>> count_tokens(const TokenizedCorpus& corpus,
                                                                std::size_t min_count);

}  // namespace varmt
