#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "varmt/embed/embedding_model.hpp"

namespace varmt {

/// Identical-surface token pairs (std_token, tgt_token) used as supervision.
struct SeedDictionary {
  std::vector<std::pair<std::string, std::string>> pairs;
  /// Set when fewer pairs than dimensions were found; the map is then
  /// underdetermined.
  bool below_dim = false;

  std::size_t count() const { return pairs.size(); }
};

/// Row-vector convention: an aligned vector is v * W.
struct AlignmentMap {
  Eigen::MatrixXd w;
  std::string direction = "tgt->std";

  std::size_t dim() const { return static_cast<std::size_t>(w.rows()); }
};

/// Thin SVD of a square matrix, A = U diag(s) V^T, by one-sided Jacobi
/// rotations. Singular values are descending; U is completed to an
/// orthogonal matrix when A is rank deficient.
struct JacobiSvd {
  Eigen::MatrixXd u;
  Eigen::VectorXd s;
  Eigen::MatrixXd v;
};
JacobiSvd jacobi_svd(const Eigen::MatrixXd& a);

/// Tokens present in both vocabularies, in tgt vocabulary order.
SeedDictionary build_seed_dictionary(const EmbeddingModel& std_model,
                                     const EmbeddingModel& tgt_model);

/// Exported vectors of the dictionary tokens: X from tgt, Y from std.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> seed_matrices(const SeedDictionary& dict,
                                                          const EmbeddingModel& std_model,
                                                          const EmbeddingModel& tgt_model);

/// W = U V^T for U S V^T = svd(X^T Y); minimizes ||X W - Y||_F over
/// orthogonal W.
AlignmentMap procrustes(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

/// Seed dictionary plus Procrustes on finalized models.
AlignmentMap align_embeddings(const EmbeddingModel& std_model, const EmbeddingModel& tgt_model);

/// Replaces every exported vector v by v W. Training tables are untouched.
EmbeddingModel apply_alignment(const AlignmentMap& map, const EmbeddingModel& model);

/// ||W^T W - I||_F
double orthogonality_error(const Eigen::MatrixXd& w);

/// Text file: "d" on the first line, then d rows of d numbers.
void save_alignment_map(const std::filesystem::path& path, const AlignmentMap& map);
AlignmentMap load_alignment_map(const std::filesystem::path& path);

}  // namespace varmt
