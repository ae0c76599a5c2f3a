#include <gtest/gtest.h>

#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <filesystem>
#include <random>

#include "varmt/align/procrustes.hpp"
#include "varmt/common/error.hpp"

using namespace varmt;

namespace {

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n(0, 1);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Eigen::MatrixXd random_orthogonal(std::mt19937_64& rng, Eigen::Index d) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(rng, d, d));
  return qr.householderQ();
}

Eigen::MatrixXd unit_rows(Eigen::MatrixXd m) {
  m.rowwise().normalize();
  return m;
}

EmbeddingModel table(const std::vector<std::string>& tokens, const Eigen::MatrixXd& rows) {
  EmbeddingModel m(static_cast<std::size_t>(rows.cols()), 0, 3, 6);
  for (const auto& t : tokens) m.add_token(t);
  m.token_vectors = rows.cast<float>();
  return finalize(m);
}

double mean_seed_cosine(const EmbeddingModel& s, const EmbeddingModel& t) {
  const auto dict = build_seed_dictionary(s, t);
  double sum = 0;
  for (const auto& [a, b] : dict.pairs)
    sum += s.exported_vector(*s.find(a)).cast<double>().dot(t.exported_vector(*t.find(b)).cast<double>());
  return sum / static_cast<double>(dict.count());
}

}  // namespace

TEST(JacobiSvd, MatchesReferenceSingularValues) {
  std::mt19937_64 rng(1);
  for (int d : {1, 2, 5, 16, 40}) {
    const auto a = gaussian(rng, d, d);
    const auto svd = jacobi_svd(a);
    Eigen::JacobiSVD<Eigen::MatrixXd> ref(a);
    EXPECT_LT((svd.s - ref.singularValues()).norm(), 1e-10 * ref.singularValues()[0]) << d;
    EXPECT_LT((svd.u * svd.s.asDiagonal() * svd.v.transpose() - a).norm(), 1e-10 * a.norm()) << d;
    EXPECT_LT(orthogonality_error(svd.u), 1e-10);
    EXPECT_LT(orthogonality_error(svd.v), 1e-10);
  }
}

TEST(JacobiSvd, RankDeficientCompletesU) {
  std::mt19937_64 rng(2);
  const auto b = gaussian(rng, 6, 2);
  const Eigen::MatrixXd a = b * gaussian(rng, 2, 6);
  const auto svd = jacobi_svd(a);
  EXPECT_LT(orthogonality_error(svd.u), 1e-10);
  EXPECT_LT((svd.u * svd.s.asDiagonal() * svd.v.transpose() - a).norm(), 1e-10 * a.norm());
  EXPECT_EQ(svd.s.tail(4).norm(), 0.0);
}

TEST(Procrustes, IdentityWhenTargetsEqualSources) {
  std::mt19937_64 rng(3);
  const auto x = unit_rows(gaussian(rng, 50, 10));
  const auto map = procrustes(x, x);
  EXPECT_LT((map.w - Eigen::MatrixXd::Identity(10, 10)).norm(), 1e-10);
}

TEST(Procrustes, RecoversKnownRotation) {
  std::mt19937_64 rng(4);
  for (int d : {3, 16, 64}) {
    const auto r = random_orthogonal(rng, d);
    const auto x = unit_rows(gaussian(rng, 2 * d, d));
    const auto map = procrustes(x, x * r);
    EXPECT_LT((map.w - r).norm(), 1e-6) << d;
    EXPECT_LT(orthogonality_error(map.w), 1e-5);
  }
}

TEST(Procrustes, SinglePairInTwoDimensions) {
  Eigen::MatrixXd x(1, 2), y(1, 2);
  x << 1, 0;
  y << 0, 1;
  const auto map = procrustes(x, y);
  EXPECT_LT((x * map.w - y).norm(), 1e-12);
  EXPECT_LT(orthogonality_error(map.w), 1e-12);
  EXPECT_NEAR(map.w.determinant(), 1.0, 1e-12);
}

TEST(Procrustes, DominatesRandomOrthogonalMaps) {
  std::mt19937_64 rng(5);
  const Eigen::Index d = 8;
  const auto x = unit_rows(gaussian(rng, 30, d));
  const auto y = unit_rows(gaussian(rng, 30, d));
  const double best = (x * procrustes(x, y).w - y).norm();
  for (int i = 0; i < 1000; ++i) EXPECT_LE(best, (x * random_orthogonal(rng, d) - y).norm() + 1e-12);
}

TEST(Procrustes, MatchesEigenSvdSolution) {
  std::mt19937_64 rng(6);
  const auto x = unit_rows(gaussian(rng, 40, 12));
  const auto y = unit_rows(gaussian(rng, 40, 12));
  Eigen::JacobiSVD<Eigen::MatrixXd> ref(x.transpose() * y, Eigen::ComputeFullU | Eigen::ComputeFullV);
  EXPECT_LT((procrustes(x, y).w - ref.matrixU() * ref.matrixV().transpose()).norm(), 1e-9);
}

TEST(Procrustes, RejectsNonFinite) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd y = x;
  y(0, 0) = std::nan("");
  EXPECT_THROW(procrustes(x, y), Error);
  EXPECT_THROW(procrustes(x, Eigen::MatrixXd::Identity(3, 3)), Error);
}

TEST(SeedDictionary, IntersectionOfSurfaces) {
  std::mt19937_64 rng(7);
  const auto a = table({"a", "b", "c"}, gaussian(rng, 3, 4));
  const auto b = table({"b", "c", "d"}, gaussian(rng, 3, 4));
  const auto dict = build_seed_dictionary(a, b);
  EXPECT_EQ(dict.pairs, (std::vector<std::pair<std::string, std::string>>{{"b", "b"}, {"c", "c"}}));
  EXPECT_TRUE(dict.below_dim);
  EXPECT_EQ(build_seed_dictionary(a, a).count(), 3u);
  EXPECT_THROW(build_seed_dictionary(a, table({"x", "y"}, gaussian(rng, 2, 4))), Error);
}

TEST(ApplyAlignment, RotationFixtureImprovesSeedCosine) {
  std::mt19937_64 rng(8);
  const Eigen::Index d = 10;
  std::vector<std::string> tokens;
  for (int i = 0; i < 60; ++i) tokens.push_back("t" + std::to_string(i));
  const auto base = unit_rows(gaussian(rng, 60, d));
  const auto r = random_orthogonal(rng, d);
  // tgt is std rotated by R^T plus noise; the map should undo it.
  const auto std_model = table(tokens, base);
  const auto tgt_model = table(tokens, base * r.transpose() + 0.05 * gaussian(rng, 60, d));
  const auto map = align_embeddings(std_model, tgt_model);
  const auto aligned = apply_alignment(map, tgt_model);
  EXPECT_GT(mean_seed_cosine(std_model, aligned), mean_seed_cosine(std_model, tgt_model));
  EXPECT_GT(mean_seed_cosine(std_model, aligned), 0.95);
  for (Eigen::Index i = 0; i < aligned.exported().rows(); ++i)
    EXPECT_NEAR(aligned.exported().row(i).norm(), 1.0f, 1e-6f);
}

TEST(ApplyAlignment, IdentityAndIsometry) {
  std::mt19937_64 rng(9);
  std::vector<std::string> tokens{"a", "b", "c", "d", "e"};
  const auto m = table(tokens, gaussian(rng, 5, 6));
  EXPECT_EQ(apply_alignment(AlignmentMap{Eigen::MatrixXd::Identity(6, 6)}, m).exported(), m.exported());
  const auto rotated = apply_alignment(AlignmentMap{random_orthogonal(rng, 6)}, m);
  const Eigen::MatrixXf before = m.exported() * m.exported().transpose();
  const Eigen::MatrixXf after = rotated.exported() * rotated.exported().transpose();
  EXPECT_LT((before - after).cwiseAbs().maxCoeff(), 1e-6f);
  EXPECT_THROW(apply_alignment(AlignmentMap{Eigen::MatrixXd::Identity(5, 5)}, m), Error);
}

TEST(AlignmentMapFile, RoundTrip) {
  std::mt19937_64 rng(10);
  const AlignmentMap map{random_orthogonal(rng, 7)};
  const auto path = std::filesystem::temp_directory_path() / "varmt_align_test.txt";
  save_alignment_map(path, map);
  EXPECT_EQ(load_alignment_map(path).w, map.w);
}
