#pragma once

#include <optional>
#include <vector>

#include "varmt/embed/embedding_model.hpp"
#include "varmt/mt/model.hpp"
#include "varmt/textproc/corpus.hpp"

namespace varmt::mt {

struct TrainConfig {
  std::size_t batch_tokens = 1024;
  double lr_initial = 7e-4;
  /// Learning rate decays linearly from lr_initial to zero at max_steps.
  std::size_t max_steps = 2000;
  std::size_t validate_every = 200;
  /// Validations without improvement before stopping.
  std::size_t patience = 5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
  /// Map unknown source tokens to <unk> instead of failing (pseudo data).
  bool allow_unk_src = false;
  LossOptions loss;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Rectified Adam: plain momentum SGD while the variance estimate is
/// untrustworthy (rho_t <= 4), rectified adaptive steps afterwards.
class RAdam {
 public:
  RAdam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Param*>& params, double lr);
  std::size_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

struct LossPoint {
  std::size_t step = 0;
  double train_loss = 0.0;
  std::optional<double> dev_loss;
};

struct TrainResult {
  std::vector<LossPoint> curve;
  std::size_t steps = 0;
  std::size_t best_step = 0;
  std::optional<double> best_dev_loss;
  bool early_stopped = false;
  /// Pairs dropped because a side exceeded the model's max_len.
  std::size_t skipped_long = 0;
};

/// Ids for every pair. Unknown tokens are an error unless `allow_unk_src`
/// (source side only).
std::vector<EncodedPair> encode_pairs(const Seq2SeqModel& model, const TokenizedParallel& data,
                                      bool allow_unk_src = false);

/// Teacher-forced training with RAdam and linear decay. When `dev` is given,
/// the dev loss is computed every validate_every steps, training stops after
/// `patience` validations without improvement and the best parameters are
/// restored.
TrainResult train(Seq2SeqModel& model, const TokenizedParallel& data, const TrainConfig& tc,
                  const TokenizedParallel* dev = nullptr);

/// Swaps in the new target embeddings (continuous head: both frozen tables;
/// softmax head: vocabulary remap) and continues training from the current
/// parameters.
TrainResult finetune(Seq2SeqModel& model, const EmbeddingModel& new_embedding,
                     const TokenizedParallel& pseudo_data, const TrainConfig& tc,
                     const TokenizedParallel* dev = nullptr);

/// Mean per-token loss without dropout.
double evaluate_loss(Seq2SeqModel& model, const std::vector<EncodedPair>& pairs,
                     const LossOptions& opts, std::size_t batch_tokens);

}  // namespace varmt::mt
