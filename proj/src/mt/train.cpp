#include "varmt/mt/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "varmt/common/error.hpp"

namespace varmt::mt {
namespace {

std::vector<std::vector<const EncodedPair*>> make_batches(const std::vector<EncodedPair>& pairs,
                                                          const std::vector<std::size_t>& order,
                                                          std::size_t batch_tokens) {
  std::vector<std::vector<const EncodedPair*>> out;
  std::vector<const EncodedPair*> cur;
  std::size_t tokens = 0;
  for (auto i : order) {
    cur.push_back(&pairs[i]);
    tokens += pairs[i].tgt.size() + 1;
    if (tokens >= batch_tokens) {
      out.push_back(std::move(cur));
      cur.clear();
      tokens = 0;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<Matrix> snapshot(const Seq2SeqModel& model) {
  std::vector<Matrix> s;
  for (const auto* p : model.parameters()) s.push_back(p->value);
  return s;
}

void restore(Seq2SeqModel& model, const std::vector<Matrix>& s) {
  auto ps = model.parameters();
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = s[i];
}

}  // namespace

void TrainConfig::validate() const {
  require(batch_tokens > 0 && validate_every > 0 && patience > 0, "train config counts must be positive");
  require(lr_initial > 0, "lr_initial must be positive");
  require(beta1 >= 0 && beta1 < 1 && beta2 > 0 && beta2 < 1 && eps > 0, "invalid RAdam parameters");
}

void RAdam::step(const std::vector<Param*>& params, double lr) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  require(m_.size() == params.size(), "RAdam: parameter set changed between steps");
  ++t_;
  const double t = static_cast<double>(t_);
  const double b1t = std::pow(beta1_, t), b2t = std::pow(beta2_, t);
  const double rho_inf = 2.0 / (1.0 - beta2_) - 1.0;
  const double rho = rho_inf - 2.0 * t * b2t / (1.0 - b2t);
  const bool rectify = rho > 4.0;
  const double r = rectify ? std::sqrt((rho - 4.0) * (rho - 2.0) * rho_inf /
                                       ((rho_inf - 4.0) * (rho_inf - 2.0) * rho))
                           : 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseAbs2();
    if (rectify) {
      p.value.array() -= lr * r * (m_[i].array() / (1.0 - b1t)) * std::sqrt(1.0 - b2t) /
                         (v_[i].array().sqrt() + eps_);
    } else {
      p.value -= lr * m_[i] / (1.0 - b1t);
    }
  }
}

std::vector<EncodedPair> encode_pairs(const Seq2SeqModel& model, const TokenizedParallel& data,
                                      bool allow_unk_src) {
  std::vector<EncodedPair> out;
  out.reserve(data.size());
  for (const auto& p : data)
    out.push_back({model.src_vocab.encode(p.src, allow_unk_src), model.tgt_vocab.encode(p.tgt, false)});
  return out;
}

double evaluate_loss(Seq2SeqModel& model, const std::vector<EncodedPair>& pairs,
                     const LossOptions& opts, std::size_t batch_tokens) {
  require(!pairs.empty(), "evaluate_loss: no pairs");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  double total = 0;
  std::size_t tokens = 0;
  for (const auto& b : make_batches(pairs, order, batch_tokens)) {
    Graph g(false);
    const Batch batch = make_batch(b);
    total += g.scalar(loss_node(g, model, batch, opts, 0.0, nullptr)) *
             static_cast<double>(batch.tgt_out.size());
    tokens += batch.tgt_out.size();
  }
  return total / static_cast<double>(tokens);
}

TrainResult train(Seq2SeqModel& model, const TokenizedParallel& data, const TrainConfig& tc,
                  const TokenizedParallel* dev) {
  tc.validate();
  if (data.empty()) throw Error("train: empty corpus");
  TrainResult result;
  std::vector<EncodedPair> pairs;
  for (auto& p : encode_pairs(model, data, tc.allow_unk_src)) {
    if (p.src.empty() || p.tgt.empty()) throw Error("train: empty side in sentence pair");
    if (p.src.size() + 1 > model.config.max_len || p.tgt.size() + 1 > model.config.max_len) {
      ++result.skipped_long;
      continue;
    }
    pairs.push_back(std::move(p));
  }
  if (pairs.empty()) throw Error("train: every pair exceeds max_len");
  std::vector<EncodedPair> dev_pairs;
  if (dev && !dev->empty()) dev_pairs = encode_pairs(model, *dev, true);

  std::mt19937_64 order_rng(tc.seed);
  std::mt19937_64 dropout_rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
  RAdam opt(tc.beta1, tc.beta2, tc.eps);
  const auto params = model.parameters();

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<const EncodedPair*>> batches;
  std::size_t next_batch = 0;
  std::vector<Matrix> best;
  std::size_t bad_validations = 0;

  for (std::size_t step = 1; step <= tc.max_steps; ++step) {
    if (next_batch == batches.size()) {
      std::shuffle(order.begin(), order.end(), order_rng);
      batches = make_batches(pairs, order, tc.batch_tokens);
      next_batch = 0;
    }
    const Batch batch = make_batch(batches[next_batch++]);
    for (auto* p : params) p->zero_grad();
    Graph g;
    const auto loss = loss_node(g, model, batch, tc.loss, model.config.dropout_rate, &dropout_rng);
    g.backward(loss);
    if (tc.clip_norm > 0) {
      double sq = 0;
      for (auto* p : params) sq += p->grad.squaredNorm();
      const double norm = std::sqrt(sq);
      if (norm > tc.clip_norm)
        for (auto* p : params) p->grad *= tc.clip_norm / norm;
    }
    const double lr = tc.lr_initial * (1.0 - static_cast<double>(step - 1) / static_cast<double>(tc.max_steps));
    opt.step(params, lr);
    result.curve.push_back({step, g.scalar(loss), std::nullopt});
    result.steps = step;

    if (!dev_pairs.empty() && (step % tc.validate_every == 0 || step == tc.max_steps)) {
      const double dl = evaluate_loss(model, dev_pairs, tc.loss, tc.batch_tokens);
      result.curve.back().dev_loss = dl;
      if (!result.best_dev_loss || dl < *result.best_dev_loss) {
        result.best_dev_loss = dl;
        result.best_step = step;
        best = snapshot(model);
        bad_validations = 0;
      } else if (++bad_validations >= tc.patience) {
        result.early_stopped = true;
        break;
      }
    }
  }
  if (!best.empty()) restore(model, best);
  for (auto* p : params) p->zero_grad();
  return result;
}

TrainResult finetune(Seq2SeqModel& model, const EmbeddingModel& new_embedding,
                     const TokenizedParallel& pseudo_data, const TrainConfig& tc,
                     const TokenizedParallel* dev) {
  if (pseudo_data.empty()) throw Error("finetune: empty pseudo-parallel corpus");
  if (model.continuous())
    swap_target_embeddings(model, new_embedding);
  else
    remap_target_vocabulary(model, target_table(new_embedding).vocab, tc.seed);
  if (tc.max_steps == 0) return {};
  return train(model, pseudo_data, tc, dev);
}

}  // namespace varmt::mt
