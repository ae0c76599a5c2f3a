#include "varmt/align/procrustes.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "varmt/common/error.hpp"

namespace varmt {
namespace {

constexpr int kMaxSweeps = 100;

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw Error(std::string("procrustes: non-finite values in ") + what);
}

}  // namespace

JacobiSvd jacobi_svd(const Eigen::MatrixXd& a) {
  require(a.rows() == a.cols() && a.rows() > 0, "jacobi_svd: expected a non-empty square matrix");
  const Eigen::Index n = a.cols();
  Eigen::MatrixXd g = a;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double eps = std::numeric_limits<double>::epsilon();

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = g.col(p).squaredNorm();
        const double beta = g.col(q).squaredNorm();
        const double gamma = g.col(p).dot(g.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double gp = g(i, p), gq = g(i, q);
          g(i, p) = c * gp - s * gq;
          g(i, q) = s * gp + c * gq;
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  Eigen::VectorXd norms(n);
  for (Eigen::Index i = 0; i < n; ++i) norms[i] = g.col(i).norm();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return norms[x] > norms[y]; });

  JacobiSvd out{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Zero(n, n)};
  const double tol = std::max(norms.maxCoeff(), 1.0) * static_cast<double>(n) * eps * 16;
  std::vector<Eigen::Index> missing;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index j = order[static_cast<std::size_t>(k)];
    out.v.col(k) = v.col(j);
    if (norms[j] > tol) {
      out.s[k] = norms[j];
      out.u.col(k) = g.col(j) / norms[j];
    } else {
      missing.push_back(k);
    }
  }
  // Complete U from the standard basis, Gram-Schmidt applied twice.
  Eigen::Index e = 0;
  for (Eigen::Index k : missing) {
    for (; e < n; ++e) {
      Eigen::VectorXd cand = Eigen::VectorXd::Unit(n, e);
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index j = 0; j < n; ++j)
          if (out.u.col(j).squaredNorm() > 0) cand -= out.u.col(j).dot(cand) * out.u.col(j);
      if (cand.norm() > 0.5) {
        out.u.col(k) = cand.normalized();
        ++e;
        break;
      }
    }
  }
  // Null directions leave the sign free; prefer a proper rotation.
  if (!missing.empty() && (out.u * out.v.transpose()).determinant() < 0)
    out.u.col(missing.back()) *= -1.0;
  return out;
}

SeedDictionary build_seed_dictionary(const EmbeddingModel& std_model,
                                     const EmbeddingModel& tgt_model) {
  require(std_model.finalized() && tgt_model.finalized(),
          "build_seed_dictionary: both models must be finalized");
  SeedDictionary d;
  for (const auto& t : tgt_model.tokens())
    if (std_model.find(t)) d.pairs.emplace_back(t, t);
  if (d.pairs.empty()) throw Error("build_seed_dictionary: no identical tokens, alignment impossible");
  d.below_dim = d.count() < tgt_model.dim();
  return d;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> seed_matrices(const SeedDictionary& dict,
                                                          const EmbeddingModel& std_model,
                                                          const EmbeddingModel& tgt_model) {
  require(std_model.dim() == tgt_model.dim(), "seed_matrices: dimension mismatch");
  const auto n = static_cast<Eigen::Index>(dict.count());
  const auto d = static_cast<Eigen::Index>(std_model.dim());
  Eigen::MatrixXd x(n, d), y(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& [s, t] = dict.pairs[static_cast<std::size_t>(i)];
    const auto si = std_model.find(s);
    const auto ti = tgt_model.find(t);
    require(si && ti, "seed_matrices: dictionary token missing from a model: " + s);
    x.row(i) = tgt_model.exported_vector(*ti).cast<double>().transpose();
    y.row(i) = std_model.exported_vector(*si).cast<double>().transpose();
  }
  return {std::move(x), std::move(y)};
}

AlignmentMap procrustes(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  require(x.rows() >= 1 && x.rows() == y.rows() && x.cols() == y.cols(),
          "procrustes: X and Y must have the same non-empty shape");
  require_finite(x, "X");
  require_finite(y, "Y");
  const Eigen::MatrixXd m = x.transpose() * y;
  const auto svd = jacobi_svd(m);
  return AlignmentMap{svd.u * svd.v.transpose()};
}

AlignmentMap align_embeddings(const EmbeddingModel& std_model, const EmbeddingModel& tgt_model) {
  const auto dict = build_seed_dictionary(std_model, tgt_model);
  const auto [x, y] = seed_matrices(dict, std_model, tgt_model);
  return procrustes(x, y);
}

EmbeddingModel apply_alignment(const AlignmentMap& map, const EmbeddingModel& model) {
  require(model.finalized(), "apply_alignment: model must be finalized");
  require(map.w.rows() == map.w.cols() && map.dim() == model.dim(),
          "apply_alignment: map dimension does not match the model");
  const Eigen::MatrixXd aligned = model.exported().cast<double>() * map.w;
  EmbeddingModel out = model;
  out.set_exported(aligned.cast<float>(), model.zero_flags());
  return out;
}

double orthogonality_error(const Eigen::MatrixXd& w) {
  return (w.transpose() * w - Eigen::MatrixXd::Identity(w.cols(), w.cols())).norm();
}

void save_alignment_map(const std::filesystem::path& path, const AlignmentMap& map) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << map.dim() << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < map.w.rows(); ++i) {
    for (Eigen::Index j = 0; j < map.w.cols(); ++j) out << (j ? " " : "") << map.w(i, j);
    out << '\n';
  }
}

AlignmentMap load_alignment_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::size_t d = 0;
  if (!(in >> d) || d == 0) throw FormatError(path.string() + ": expected dimension on first line");
  AlignmentMap map{Eigen::MatrixXd(d, d)};
  for (std::size_t i = 0; i < d * d; ++i)
    if (!(in >> map.w(static_cast<Eigen::Index>(i / d), static_cast<Eigen::Index>(i % d))))
      throw FormatError(path.string() + ": truncated alignment matrix");
  std::string extra;
  if (in >> extra) throw FormatError(path.string() + ": trailing data after matrix");
  return map;
}

}  // namespace varmt
