#include "varmt/vmf/check.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "varmt/vmf/vmf_loss.hpp"

namespace varmt::vmf {

namespace {

std::vector<double> random_unit(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(d);
  double s = 0;
  for (auto& x : v) {
    x = n(rng);
    s += x * x;
  }
  for (auto& x : v) x /= std::sqrt(s);
  return v;
}

}  // namespace

std::vector<GradientCheck> gradient_check(const std::vector<int>& dims, std::size_t pairs, double h,
                                          double lambda1, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> norm(0.5, 60.0);
  const VmfOptions opts{lambda1, 1.0};
  std::vector<GradientCheck> out;
  for (int d : dims) {
    GradientCheck r{d, pairs, 0.0};
    std::vector<double> grad(d), scratch(d);
    for (std::size_t i = 0; i < pairs; ++i) {
      auto p = random_unit(rng, d);
      const double k = norm(rng);
      for (auto& x : p) x *= k;
      const auto t = random_unit(rng, d);
      vmf_loss_into(p, t, opts, grad);
      double num = 0, den = 0;
      for (int j = 0; j < d; ++j) {
        const double keep = p[j];
        p[j] = keep + h;
        const double up = vmf_loss_into(p, t, opts, scratch);
        p[j] = keep - h;
        const double down = vmf_loss_into(p, t, opts, scratch);
        p[j] = keep;
        const double fd = (up - down) / (2 * h);
        num += (fd - grad[j]) * (fd - grad[j]);
        den += grad[j] * grad[j];
      }
      r.max_relative_error = std::max(r.max_relative_error, std::sqrt(num) / std::max(std::sqrt(den), 1e-12));
    }
    out.push_back(r);
  }
  return out;
}

NormalizerCheck normalizer_check() {
  NormalizerCheck r;
  for (double k : {0.1, 1.0, 10.0, 100.0}) {
    // log sinh k written stably for large k.
    const double log_sinh = k + std::log1p(-std::exp(-2 * k)) - std::log(2.0);
    const double closed = std::log(k) - std::log(4 * std::numbers::pi) - log_sinh;
    r.max_closed_form_error = std::max(r.max_closed_form_error, std::abs(log_normalizer(3, k) - closed));
  }
  for (int m : {3, 50, 300, 1000}) {
    const double nu = 0.5 * m - 1.0;
    const double boundary = std::max(20.0, nu);
    const double jump = std::abs(log_normalizer(m, boundary) - log_normalizer(m, std::nextafter(boundary, 0.0)));
    r.max_switchover_jump = std::max(r.max_switchover_jump, jump);
  }
  return r;
}

}  // namespace varmt::vmf
