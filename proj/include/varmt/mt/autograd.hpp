#pragma once

#include <Eigen/Core>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "varmt/textproc/vocabulary.hpp"
#include "varmt/vmf/vmf_loss.hpp"

namespace varmt::mt {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// Trainable tensor with its accumulated gradient.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Attention block inside a packed batch: queries [q_begin, q_begin+q_len)
/// attend to keys [k_begin, k_begin+k_len).
struct Segment {
  Eigen::Index q_begin = 0;
  Eigen::Index q_len = 0;
  Eigen::Index k_begin = 0;
  Eigen::Index k_len = 0;
};

/// Reverse-mode tape over row-major matrices. Every op records its output
/// value and a closure that pushes the output gradient to its inputs;
/// backward() replays the closures in reverse order. Rows of a batch are
/// sentences packed end to end.
class Graph {
 public:
  using Id = int;

  /// No backward closures are recorded when false.
  explicit Graph(bool requires_grad = true) : requires_grad_(requires_grad) {}

  Id constant(Matrix value);
  const Matrix& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  double scalar(Id id) const { return value(id)(0, 0); }

  /// x W + b, with W stored in x out.
  Id linear(Id x, Param& w, Param& b);
  /// Rows of `table` selected by ids, times `scale`.
  Id gather(Param& table, const std::vector<TokenId>& ids, double scale);
  Id add(Id a, Id b);
  /// a + c for a constant matrix c of the same shape.
  Id add_constant(Id a, const Matrix& c);
  Id relu(Id x);
  Id layer_norm(Id x, Param& gain, Param& bias, double eps = 1e-5);
  /// Inverted dropout; identity when rate == 0.
  Id dropout(Id x, double rate, std::mt19937_64& rng);
  /// Multi-head scaled dot-product attention on already projected q, k, v.
  Id attention(Id q, Id k, Id v, const std::vector<Segment>& segments, int heads, bool causal);

  /// Mean over rows of the vMF loss of each prediction row against the unit
  /// target row. Returns a 1x1 node.
  Id vmf_loss(Id pred, const Matrix& targets, const vmf::VmfOptions& options);
  /// Mean over rows of label-smoothed cross-entropy. The smoothing mass is
  /// spread uniformly over the other classes. Returns a 1x1 node.
  Id cross_entropy(Id logits, const std::vector<TokenId>& gold, double smoothing);

  /// Seeds d(loss)/d(loss) = 1 and accumulates into every reachable Param.
  void backward(Id loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void()> back;
  };

  Id push(Matrix value);
  Matrix& grad(Id id);
  void on_backward(Id id, std::function<void()> fn);

  bool requires_grad_;
  std::vector<Node> nodes_;
};

/// Sinusoidal position table, rows = positions.
Matrix positional_encoding(Eigen::Index positions, Eigen::Index dim);

}  // namespace varmt::mt
