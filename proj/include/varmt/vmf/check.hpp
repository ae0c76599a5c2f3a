#pragma once

#include <cstdint>
#include <vector>

namespace varmt::vmf {

struct GradientCheck {
  int dim = 0;
  std::size_t pairs = 0;
  /// Worst relative 2-norm error of the analytic gradient against central
  /// differences over all pairs.
  double max_relative_error = 0.0;
};

/// Seeded random (prediction, unit target) pairs per dimension; prediction
/// norms are drawn from [0.5, 60).
std::vector<GradientCheck> gradient_check(const std::vector<int>& dims, std::size_t pairs, double h,
                                          double lambda1, std::uint64_t seed);

struct NormalizerCheck {
  /// Against log(k / (4 pi sinh k)) for k in {0.1, 1, 10, 100}.
  double max_closed_form_error = 0.0;
  /// Largest jump of log C_m across the series/asymptotic boundary for
  /// m in {3, 50, 300, 1000}.
  double max_switchover_jump = 0.0;
};

NormalizerCheck normalizer_check();

}  // namespace varmt::vmf
