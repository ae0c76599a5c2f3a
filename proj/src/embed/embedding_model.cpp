#include "varmt/embed/embedding_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "varmt/common/binary_io.hpp"
#include "varmt/common/error.hpp"
#include "varmt/common/utf8.hpp"
#include "varmt/textproc/ngrams.hpp"

namespace varmt {

namespace {
constexpr char kMagic[] = "VMEB1";
}

std::uint32_t fnv1a(std::string_view bytes) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

EmbeddingModel::EmbeddingModel(std::size_t dim, std::size_t bucket_count, std::size_t min_n,
                               std::size_t max_n)
    : dim_(dim), bucket_count_(bucket_count), min_n_(min_n), max_n_(max_n) {
  require(dim > 0, "embedding dim must be positive");
  require(min_n >= 1 && min_n <= max_n, "invalid n-gram bounds");
  token_vectors.setZero(0, static_cast<Eigen::Index>(dim));
  context_vectors.setZero(0, static_cast<Eigen::Index>(dim));
  ngram_buckets.setZero(static_cast<Eigen::Index>(bucket_count), static_cast<Eigen::Index>(dim));
}

std::optional<std::size_t> EmbeddingModel::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::uint32_t> EmbeddingModel::buckets_for(const std::string& token) const {
  std::vector<std::uint32_t> out;
  if (bucket_count_ == 0) return out;
  // Tokens made only of the marker have no n-grams; they keep just their row.
  if (strip_marker(token).empty()) return out;
  for (const auto& g : extract_ngrams(std::string_view(token), min_n_, max_n_))
    out.push_back(static_cast<std::uint32_t>(fnv1a(g) % bucket_count_));
  return out;
}

std::size_t EmbeddingModel::add_token(const std::string& token, std::int64_t count) {
  auto [it, inserted] = index_.try_emplace(token, tokens_.size());
  if (!inserted) return it->second;
  tokens_.push_back(token);
  counts_.push_back(count);
  buckets_.push_back(buckets_for(token));
  const auto n = static_cast<Eigen::Index>(tokens_.size());
  token_vectors.conservativeResize(n, static_cast<Eigen::Index>(dim_));
  token_vectors.row(n - 1).setZero();
  context_vectors.conservativeResize(n, static_cast<Eigen::Index>(dim_));
  context_vectors.row(n - 1).setZero();
  finalized_ = false;
  return it->second;
}

Eigen::VectorXf EmbeddingModel::composed(std::size_t i) const {
  Eigen::VectorXf v = token_vectors.row(static_cast<Eigen::Index>(i)).transpose();
  const auto& b = buckets_.at(i);
  for (auto r : b) v += ngram_buckets.row(r).transpose();
  return v / static_cast<float>(b.size() + 1);
}

Eigen::Map<const Eigen::VectorXf> EmbeddingModel::exported_vector(std::size_t i) const {
  require(finalized_, "embedding model is not finalized");
  require(i < tokens_.size(), "token index out of range");
  return Eigen::Map<const Eigen::VectorXf>(exported_.data() + i * dim_,
                                           static_cast<Eigen::Index>(dim_));
}

void EmbeddingModel::set_exported(RowMatrixF vectors, std::vector<bool> zero_flags) {
  require(static_cast<std::size_t>(vectors.rows()) == tokens_.size() &&
              static_cast<std::size_t>(vectors.cols()) == dim_,
          "exported matrix shape does not match the vocabulary");
  require(zero_flags.size() == tokens_.size(), "zero flag count does not match the vocabulary");
  exported_ = std::move(vectors);
  zero_flags_ = std::move(zero_flags);
  finalized_ = true;
}

EmbeddingModel finalize(EmbeddingModel model) {
  const auto v = model.vocab_size();
  RowMatrixF out(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(model.dim()));
  std::vector<bool> zero(v, false);
  for (std::size_t i = 0; i < v; ++i) {
    Eigen::VectorXf c = model.composed(i);
    const float n = c.norm();
    if (n == 0.0f || !std::isfinite(n)) {
      c.setZero();
      c[0] = 1.0f;
      zero[i] = true;
    } else {
      c /= n;
    }
    out.row(static_cast<Eigen::Index>(i)) = c.transpose();
  }
  model.exported_ = std::move(out);
  model.zero_flags_ = std::move(zero);
  model.finalized_ = true;
  return model;
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingModel& model, std::span<const float> query,
                                        std::size_t k) {
  require(model.finalized(), "nearest_neighbors: model is not finalized");
  require(query.size() == model.dim(), "nearest_neighbors: query dimension mismatch");
  double qn = 0;
  for (float x : query) {
    require(std::isfinite(x), "nearest_neighbors: non-finite query");
    qn += static_cast<double>(x) * x;
  }
  if (qn == 0) throw Error("nearest_neighbors: zero query vector");
  qn = std::sqrt(qn);

  const std::size_t v = model.vocab_size();
  std::vector<double> sim(v);
  const auto& e = model.exported();
  for (std::size_t i = 0; i < v; ++i) {
    double s = 0;
    const float* row = e.data() + i * model.dim();
    for (std::size_t j = 0; j < model.dim(); ++j) s += static_cast<double>(row[j]) * query[j];
    sim[i] = s / qn;
  }
  std::vector<std::size_t> order(v);
  std::iota(order.begin(), order.end(), 0);
  k = std::min(k, v);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (sim[a] != sim[b]) return sim[a] > sim[b];
                      return a < b;
                    });
  std::vector<Neighbor> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back({order[i], model.token(order[i]), sim[order[i]]});
  return out;
}

void write_text_vectors(const std::filesystem::path& path, const EmbeddingModel& model) {
  require(model.finalized(), "write_text_vectors: model is not finalized");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << model.vocab_size() << ' ' << model.dim() << '\n';
  out << std::setprecision(std::numeric_limits<float>::max_digits10);
  for (std::size_t i = 0; i < model.vocab_size(); ++i) {
    out << model.token(i);
    const auto v = model.exported_vector(i);
    for (Eigen::Index j = 0; j < v.size(); ++j) out << ' ' << v[j];
    out << '\n';
  }
}

EmbeddingModel read_text_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t v = 0, d = 0;
  if (!std::getline(in, line) || !(std::istringstream(line) >> v >> d) || d == 0)
    throw FormatError(path.string() + ": expected '<vocab_size> <dim>' header");
  EmbeddingModel model(d, 0, kDefaultMinN, kDefaultMaxN);
  RowMatrixF vecs(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < v; ++i) {
    if (!std::getline(in, line)) throw FormatError(path.string() + ": truncated vector table");
    const auto parts = utf8::split_words(line);
    if (parts.size() != d + 1)
      throw FormatError(path.string() + ":" + std::to_string(i + 2) + ": expected token and " +
                        std::to_string(d) + " values");
    if (model.add_token(parts[0]) != i)
      throw FormatError(path.string() + ": duplicate token " + parts[0]);
    for (std::size_t j = 0; j < d; ++j)
      vecs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::stof(parts[j + 1]);
  }
  // The table carries exported vectors only; renormalize defensively against
  // rounding in third-party files.
  std::vector<bool> zero(v, false);
  for (Eigen::Index i = 0; i < vecs.rows(); ++i) {
    const float n = vecs.row(i).norm();
    if (n == 0.0f) {
      vecs.row(i).setZero();
      vecs(i, 0) = 1.0f;
      zero[static_cast<std::size_t>(i)] = true;
    } else if (std::abs(n - 1.0f) > 1e-6f) {
      vecs.row(i) /= n;
    }
  }
  model.token_vectors = vecs;
  model.set_exported(std::move(vecs), std::move(zero));
  return model;
}

void save_embedding_model(const std::filesystem::path& path, const EmbeddingModel& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  binio::write_magic(out, kMagic);
  for (auto x : {model.dim(), model.bucket_count(), model.min_n(), model.max_n(), model.vocab_size()})
    binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(x));
  for (std::size_t i = 0; i < model.vocab_size(); ++i) {
    binio::write_string(out, model.token(i));
    binio::write_pod<std::int64_t>(out, model.count(i));
  }
  binio::write_f32(out, model.token_vectors.data(), model.token_vectors.size());
  binio::write_f32(out, model.context_vectors.data(), model.context_vectors.size());
  binio::write_f32(out, model.ngram_buckets.data(), model.ngram_buckets.size());
  binio::write_pod<std::uint32_t>(out, model.finalized() ? 1 : 0);
  if (model.finalized()) {
    binio::write_f32(out, model.exported().data(), model.exported().size());
    for (bool z : model.zero_flags()) binio::write_pod<std::uint8_t>(out, z ? 1 : 0);
  }
  if (!out) throw Error("write failed: " + path.string());
}

EmbeddingModel load_embedding_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  binio::expect_magic(in, kMagic);
  const auto dim = binio::read_pod<std::uint32_t>(in);
  const auto buckets = binio::read_pod<std::uint32_t>(in);
  const auto min_n = binio::read_pod<std::uint32_t>(in);
  const auto max_n = binio::read_pod<std::uint32_t>(in);
  const auto vocab = binio::read_pod<std::uint32_t>(in);
  if (dim == 0 || min_n == 0 || min_n > max_n)
    throw FormatError(path.string() + ": invalid embedding header");
  EmbeddingModel model(dim, buckets, min_n, max_n);
  for (std::uint32_t i = 0; i < vocab; ++i) {
    auto tok = binio::read_string(in);
    const auto count = binio::read_pod<std::int64_t>(in);
    if (model.add_token(tok, count) != i) throw FormatError(path.string() + ": duplicate token " + tok);
  }
  binio::read_f32(in, model.token_vectors.data(), model.token_vectors.size());
  binio::read_f32(in, model.context_vectors.data(), model.context_vectors.size());
  binio::read_f32(in, model.ngram_buckets.data(), model.ngram_buckets.size());
  if (binio::read_pod<std::uint32_t>(in) == 1) {
    RowMatrixF e(static_cast<Eigen::Index>(vocab), static_cast<Eigen::Index>(dim));
    binio::read_f32(in, e.data(), e.size());
    std::vector<bool> zero(vocab);
    for (std::uint32_t i = 0; i < vocab; ++i) zero[i] = binio::read_pod<std::uint8_t>(in) != 0;
    model.set_exported(std::move(e), std::move(zero));
  }
  return model;
}

}  // namespace varmt
