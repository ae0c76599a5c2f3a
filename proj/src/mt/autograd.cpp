#include "varmt/mt/autograd.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "varmt/common/error.hpp"

namespace varmt::mt {

Graph::Id Graph::push(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr});
  return static_cast<Id>(nodes_.size() - 1);
}

Matrix& Graph::grad(Id id) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Graph::on_backward(Id id, std::function<void()> fn) {
  if (requires_grad_) nodes_[static_cast<std::size_t>(id)].back = std::move(fn);
}

Graph::Id Graph::constant(Matrix value) { return push(std::move(value)); }

Graph::Id Graph::linear(Id x, Param& w, Param& b) {
  require(value(x).cols() == w.value.rows(), "linear: shape mismatch for " + w.name);
  Matrix out = value(x) * w.value;
  out.rowwise() += b.value.row(0);
  const Id y = push(std::move(out));
  on_backward(y, [this, x, y, &w, &b] {
    const Matrix& gy = grad(y);
    w.grad.noalias() += value(x).transpose() * gy;
    b.grad.row(0) += gy.colwise().sum();
    grad(x).noalias() += gy * w.value.transpose();
  });
  return y;
}

Graph::Id Graph::gather(Param& table, const std::vector<TokenId>& ids, double scale) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), table.value.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < table.value.rows(), "gather: id out of range for " + table.name);
    out.row(static_cast<Eigen::Index>(i)) = scale * table.value.row(ids[i]);
  }
  const Id y = push(std::move(out));
  on_backward(y, [this, y, &table, ids, scale] {
    const Matrix& gy = grad(y);
    for (std::size_t i = 0; i < ids.size(); ++i)
      table.grad.row(ids[i]) += scale * gy.row(static_cast<Eigen::Index>(i));
  });
  return y;
}

Graph::Id Graph::add(Id a, Id b) {
  const Id y = push(value(a) + value(b));
  on_backward(y, [this, a, b, y] {
    grad(a) += grad(y);
    grad(b) += grad(y);
  });
  return y;
}

Graph::Id Graph::add_constant(Id a, const Matrix& c) {
  const Id y = push(value(a) + c);
  on_backward(y, [this, a, y] { grad(a) += grad(y); });
  return y;
}

Graph::Id Graph::relu(Id x) {
  const Id y = push(value(x).cwiseMax(0.0));
  on_backward(y, [this, x, y] {
    grad(x).array() += (value(x).array() > 0.0).cast<double>() * grad(y).array();
  });
  return y;
}

Graph::Id Graph::layer_norm(Id x, Param& gain, Param& bias, double eps) {
  const Matrix& in = value(x);
  const Eigen::Index n = in.rows(), d = in.cols();
  Matrix xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = in.row(i).mean();
    const double var = (in.row(i).array() - mu).square().mean();
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (in.row(i).array() - mu) * inv_std[i];
  }
  Matrix out = xhat.array().rowwise() * gain.value.row(0).array();
  out.rowwise() += bias.value.row(0);
  const Id y = push(std::move(out));
  on_backward(y, [this, x, y, &gain, &bias, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
    const Matrix& gy = grad(y);
    gain.grad.row(0) += (gy.array() * xhat.array()).colwise().sum().matrix();
    bias.grad.row(0) += gy.colwise().sum();
    Matrix& gx = grad(x);
    const Matrix gxhat = gy.array().rowwise() * gain.value.row(0).array();
    for (Eigen::Index i = 0; i < gxhat.rows(); ++i) {
      const double m1 = gxhat.row(i).mean();
      const double m2 = gxhat.row(i).dot(xhat.row(i)) / static_cast<double>(gxhat.cols());
      gx.row(i).array() += inv_std[i] * (gxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
    }
  });
  return y;
}

Graph::Id Graph::dropout(Id x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  require(rate < 1.0, "dropout rate must be below 1");
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(value(x).rows(), value(x).cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  const Id y = push(value(x).cwiseProduct(mask));
  on_backward(y, [this, x, y, mask = std::move(mask)] { grad(x) += grad(y).cwiseProduct(mask); });
  return y;
}

Graph::Id Graph::attention(Id q, Id k, Id v, const std::vector<Segment>& segments, int heads,
                           bool causal) {
  const Eigen::Index d = value(q).cols();
  require(heads > 0 && d % heads == 0, "attention: d_model not divisible by heads");
  require(value(k).cols() == d && value(v).cols() == d, "attention: width mismatch");
  const Eigen::Index dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Matrix out = Matrix::Zero(value(q).rows(), d);
  auto probs = std::make_shared<std::vector<Matrix>>();
  probs->reserve(segments.size() * static_cast<std::size_t>(heads));
  for (const auto& s : segments) {
    if (causal) require(s.q_len == s.k_len, "attention: causal segment must be square");
    for (int h = 0; h < heads; ++h) {
      const auto qh = value(q).block(s.q_begin, h * dk, s.q_len, dk);
      const auto kh = value(k).block(s.k_begin, h * dk, s.k_len, dk);
      const auto vh = value(v).block(s.k_begin, h * dk, s.k_len, dk);
      Matrix p = (qh * kh.transpose()) * scale;
      for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const Eigen::Index visible = causal ? i + 1 : p.cols();
        const double mx = p.row(i).head(visible).maxCoeff();
        double z = 0;
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
          p(i, j) = j < visible ? std::exp(p(i, j) - mx) : 0.0;
          z += p(i, j);
        }
        p.row(i) /= z;
      }
      out.block(s.q_begin, h * dk, s.q_len, dk).noalias() = p * vh;
      probs->push_back(std::move(p));
    }
  }
  const Id y = push(std::move(out));
  on_backward(y, [this, q, k, v, y, segments, heads, dk, scale, probs] {
    const Matrix& gy = grad(y);
    Matrix& gq = grad(q);
    Matrix& gk = grad(k);
    Matrix& gv = grad(v);
    std::size_t idx = 0;
    for (const auto& s : segments) {
      for (int h = 0; h < heads; ++h) {
        const Matrix& p = (*probs)[idx++];
        const auto go = gy.block(s.q_begin, h * dk, s.q_len, dk);
        const auto qh = value(q).block(s.q_begin, h * dk, s.q_len, dk);
        const auto kh = value(k).block(s.k_begin, h * dk, s.k_len, dk);
        const auto vh = value(v).block(s.k_begin, h * dk, s.k_len, dk);
        gv.block(s.k_begin, h * dk, s.k_len, dk).noalias() += p.transpose() * go;
        const Matrix gp = go * vh.transpose();
        Matrix gs = p.cwiseProduct(gp);
        const Eigen::VectorXd rs = gs.rowwise().sum();
        gs -= p.cwiseProduct(rs.replicate(1, p.cols()));
        gs *= scale;
        gq.block(s.q_begin, h * dk, s.q_len, dk).noalias() += gs * kh;
        gk.block(s.k_begin, h * dk, s.k_len, dk).noalias() += gs.transpose() * qh;
      }
    }
  });
  return y;
}

Graph::Id Graph::vmf_loss(Id pred, const Matrix& targets, const vmf::VmfOptions& options) {
  const Matrix& p = value(pred);
  require(p.rows() == targets.rows() && p.cols() == targets.cols(), "vmf_loss: shape mismatch");
  require(p.rows() > 0, "vmf_loss: empty batch");
  Matrix g(p.rows(), p.cols());
  double total = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    total += vmf::vmf_loss_into(std::span<const double>(p.row(i).data(), static_cast<std::size_t>(p.cols())),
                                std::span<const double>(targets.row(i).data(), static_cast<std::size_t>(p.cols())),
                                options, std::span<double>(g.row(i).data(), static_cast<std::size_t>(p.cols())));
  }
  const double n = static_cast<double>(p.rows());
  g /= n;
  const Id y = push(Matrix::Constant(1, 1, total / n));
  on_backward(y, [this, pred, y, g = std::move(g)] { grad(pred) += grad(y)(0, 0) * g; });
  return y;
}

Graph::Id Graph::cross_entropy(Id logits, const std::vector<TokenId>& gold, double smoothing) {
  const Matrix& z = value(logits);
  require(static_cast<std::size_t>(z.rows()) == gold.size() && z.rows() > 0,
          "cross_entropy: one gold id per row required");
  const Eigen::Index v = z.cols();
  const double off = v > 1 ? smoothing / static_cast<double>(v - 1) : 0.0;
  const double on = 1.0 - smoothing;
  Matrix g(z.rows(), v);
  double total = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    const double lse = mx + std::log((z.row(i).array() - mx).exp().sum());
    const TokenId t = gold[static_cast<std::size_t>(i)];
    require(t >= 0 && t < v, "cross_entropy: gold id out of range");
    double row_loss = 0;
    for (Eigen::Index j = 0; j < v; ++j) {
      const double lp = z(i, j) - lse;
      const double target = j == t ? on : off;
      row_loss -= target * lp;
      g(i, j) = std::exp(lp) - target;
    }
    total += row_loss;
  }
  const double n = static_cast<double>(z.rows());
  g /= n;
  const Id y = push(Matrix::Constant(1, 1, total / n));
  on_backward(y, [this, logits, y, g = std::move(g)] { grad(logits) += grad(y)(0, 0) * g; });
  return y;
}

void Graph::backward(Id loss) {
  require(requires_grad_, "backward on a graph built without gradients");
  require(value(loss).size() == 1, "backward: loss must be a scalar node");
  grad(loss)(0, 0) = 1.0;
  for (Id i = loss; i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (n.back && n.grad.size() != 0) n.back();
  }
}

Matrix positional_encoding(Eigen::Index positions, Eigen::Index dim) {
  Matrix pe(positions, dim);
  for (Eigen::Index p = 0; p < positions; ++p) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      pe(p, i) = (i % 2 == 0) ? std::sin(static_cast<double>(p) * rate) : std::cos(static_cast<double>(p) * rate);
    }
  }
  return pe;
}

}  // namespace varmt::mt
