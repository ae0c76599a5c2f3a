#include "varmt/vmf/vmf_loss.hpp"

#include <cmath>
#include <numbers>

#include "varmt/common/error.hpp"
#include "varmt/vmf/bessel.hpp"

namespace varmt::vmf {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_inputs(std::span<const double> prediction, std::span<const double> target) {
  if (prediction.size() != target.size() || prediction.empty())
    throw Error("vmf loss: prediction and target dimensions differ");
  const double tnorm = std::sqrt(dot(target, target));
  if (!(std::abs(tnorm - 1.0) <= 1e-6)) throw Error("vmf loss: target is not a unit vector");
}

}  // namespace

double log_normalizer(int dim, double kappa) {
  const double half = 0.5 * dim;
  return (half - 1.0) * std::log(kappa) - half * std::log(2.0 * std::numbers::pi) -
         log_bessel_i(half - 1.0, kappa);
}

double log_normalizer_derivative(int dim, double kappa) {
  return -bessel_i_ratio(0.5 * dim - 1.0, kappa);
}

double vmf_loss_into(std::span<const double> prediction, std::span<const double> target,
                     const VmfOptions& options, std::span<double> grad) {
  check_inputs(prediction, target);
  const double kappa = std::sqrt(dot(prediction, prediction));
  if (!std::isfinite(kappa)) throw Error("vmf loss: non-finite prediction");
  if (kappa < kMinPredictionNorm) throw Error("vmf loss: prediction norm below 1e-8");
  const int m = static_cast<int>(prediction.size());

  const double loss = -log_normalizer(m, kappa) - options.lambda2 * dot(prediction, target) +
                      options.lambda1 * kappa;
  // d/dpred [-log C(|pred|)] = ratio * pred / |pred|
  const double radial = (bessel_i_ratio(0.5 * m - 1.0, kappa) + options.lambda1) / kappa;
  for (std::size_t i = 0; i < prediction.size(); ++i)
    grad[i] = radial * prediction[i] - options.lambda2 * target[i];
  return loss;
}

VmfLossValue nll_vmf(std::span<const double> prediction, std::span<const double> target) {
  return nll_vmf_regularized(prediction, target, 0.0);
}

VmfLossValue nll_vmf_regularized(std::span<const double> prediction,
                                 std::span<const double> target, double lambda1) {
  if (lambda1 < 0.0) throw Error("vmf loss: lambda1 must be non-negative");
  VmfLossValue out;
  out.grad_wrt_prediction.resize(static_cast<Eigen::Index>(prediction.size()));
  out.loss = vmf_loss_into(prediction, target, VmfOptions{lambda1, 1.0},
                           {out.grad_wrt_prediction.data(), prediction.size()});
  return out;
}

double cosine_loss_into(std::span<const double> prediction, std::span<const double> target,
                        std::span<double> grad) {
  check_inputs(prediction, target);
  const double norm = std::sqrt(dot(prediction, prediction));
  if (norm < kMinPredictionNorm) throw Error("cosine loss: prediction norm below 1e-8");
  const double cos = dot(prediction, target) / norm;
  for (std::size_t i = 0; i < prediction.size(); ++i)
    grad[i] = -(target[i] - cos * prediction[i] / norm) / norm;
  return 1.0 - cos;
}

}  // namespace varmt::vmf
