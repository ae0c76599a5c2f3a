#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "varmt/textproc/corpus.hpp"

namespace varmt {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::size_t kDefaultBucketCount = 2'000'000;

/// 32-bit FNV-1a over the UTF-8 bytes.
std::uint32_t fnv1a(std::string_view bytes);

/// Subword embedding table: a dedicated input row per token plus hashed
/// character n-gram rows shared by every token containing the n-gram. The
/// composed (input) vector of a token is the mean of its own row and its
/// n-gram rows. After finalize() the unit-normalized composed vectors are
/// available as `exported`.
class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  EmbeddingModel(std::size_t dim, std::size_t bucket_count, std::size_t min_n, std::size_t max_n);

  std::size_t dim() const { return dim_; }
  std::size_t bucket_count() const { return bucket_count_; }
  std::size_t min_n() const { return min_n_; }
  std::size_t max_n() const { return max_n_; }
  std::size_t vocab_size() const { return tokens_.size(); }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  std::optional<std::size_t> find(const std::string& token) const;
  std::int64_t count(std::size_t i) const { return counts_.at(i); }

  /// Appends a token with zeroed rows; returns its index. Existing tokens
  /// return their index unchanged.
  std::size_t add_token(const std::string& token, std::int64_t count = 0);
  void set_count(std::size_t i, std::int64_t c) { counts_.at(i) = c; }

  /// Bucket rows addressed by the token's character n-grams.
  const std::vector<std::uint32_t>& buckets_of(std::size_t i) const { return buckets_.at(i); }
  std::vector<std::uint32_t> buckets_for(const std::string& token) const;

  Eigen::VectorXf composed(std::size_t i) const;

  RowMatrixF token_vectors;
  RowMatrixF context_vectors;
  RowMatrixF ngram_buckets;

  bool finalized() const { return finalized_; }
  const RowMatrixF& exported() const { return exported_; }
  /// Tokens whose composed vector was zero and were replaced by e1.
  const std::vector<bool>& zero_flags() const { return zero_flags_; }
  Eigen::Map<const Eigen::VectorXf> exported_vector(std::size_t i) const;

  /// Installs exported vectors directly (used by alignment and by text-format
  /// loading). Rows must be unit norm.
  void set_exported(RowMatrixF vectors, std::vector<bool> zero_flags);

 private:
  friend EmbeddingModel finalize(EmbeddingModel model);

  std::size_t dim_ = 0;
  std::size_t bucket_count_ = 0;
  std::size_t min_n_ = 3;
  std::size_t max_n_ = 6;
  std::vector<std::string> tokens_;
  std::vector<std::int64_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::uint32_t>> buckets_;
  bool finalized_ = false;
  RowMatrixF exported_;
  std::vector<bool> zero_flags_;
};

/// Normalizes every composed vector; zero vectors become e1 and are flagged.
EmbeddingModel finalize(EmbeddingModel model);

struct Neighbor {
  std::size_t index = 0;
  std::string token;
  double similarity = 0.0;
};

/// Exhaustive top-k cosine search over exported vectors; ties go to the
/// lower vocabulary index.
std::vector<Neighbor> nearest_neighbors(const EmbeddingModel& model, std::span<const float> query,
                                        std::size_t k);

/// "<vocab_size> <dim>" header then "<token> v1 ... vd" per line (exported
/// vectors).
void write_text_vectors(const std::filesystem::path& path, const EmbeddingModel& model);
/// Loads a text-format table as a finalized model without n-gram buckets.
EmbeddingModel read_text_vectors(const std::filesystem::path& path);

/// Binary layout (little-endian):
///   "VMEB1", u32 dim, u32 bucket_count, u32 min_n, u32 max_n, u32 vocab_size,
///   vocab_size x (u32 byte_len, bytes, i64 count),
///   f32 token_vectors [vocab x dim], f32 context_vectors [vocab x dim],
///   f32 ngram_buckets [bucket_count x dim],
///   u32 finalized, and when 1: f32 exported [vocab x dim], u8 zero flag per token.
void save_embedding_model(const std::filesystem::path& path, const EmbeddingModel& model);
EmbeddingModel load_embedding_model(const std::filesystem::path& path);

}  // namespace varmt
