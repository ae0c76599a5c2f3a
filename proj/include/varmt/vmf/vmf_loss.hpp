#pragma once

#include <Eigen/Core>
#include <span>

namespace varmt::vmf {

/// log C_m(kappa), the log normalizer of the von Mises-Fisher density on the
/// unit sphere in R^m:  C_m(k) = k^{m/2-1} / ((2 pi)^{m/2} I_{m/2-1}(k)).
double log_normalizer(int dim, double kappa);

/// d/dkappa log C_m(kappa) = -I_{m/2}(kappa) / I_{m/2-1}(kappa).
double log_normalizer_derivative(int dim, double kappa);

struct VmfLossValue {
  double loss = 0.0;
  Eigen::VectorXd grad_wrt_prediction;
};

/// Loss options. lambda1 adds lambda1 * |pred|; lambda2 scales the alignment
/// term (-lambda2 * pred . target). lambda1 = 0, lambda2 = 1 is the plain NLL.
struct VmfOptions {
  double lambda1 = 0.0;
  double lambda2 = 1.0;
};

inline constexpr double kMinPredictionNorm = 1e-8;

/// NLL of a unit target under a vMF whose mean direction and concentration
/// are the direction and norm of `prediction`. Writes the gradient into
/// `grad` (same length) and returns the loss.
double vmf_loss_into(std::span<const double> prediction, std::span<const double> target,
                     const VmfOptions& options, std::span<double> grad);

VmfLossValue nll_vmf(std::span<const double> prediction, std::span<const double> target);

VmfLossValue nll_vmf_regularized(std::span<const double> prediction,
                                 std::span<const double> target, double lambda1);

/// 1 - cos(prediction, target); the cosine-distance ablation.
double cosine_loss_into(std::span<const double> prediction, std::span<const double> target,
                        std::span<double> grad);

}  // namespace varmt::vmf
