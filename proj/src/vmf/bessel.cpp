#include "varmt/vmf/bessel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "varmt/common/error.hpp"

namespace varmt::vmf {
namespace {

constexpr double kSeriesFloor = 20.0;
constexpr double kDebyeMinOrder = 15.0;
constexpr int kDebyeTerms = 12;

using Poly = std::vector<double>;  // coefficient of t^k at index k

// u_{k+1}(t) = t^2 (1 - t^2) u_k'(t) / 2 + (1/8) \int_0^t (1 - 5 s^2) u_k(s) ds
std::array<Poly, kDebyeTerms + 1> make_debye_polynomials() {
  std::array<Poly, kDebyeTerms + 1> u;
  u[0] = {1.0};
  for (int k = 0; k < kDebyeTerms; ++k) {
    const Poly& p = u[k];
    Poly next(p.size() + 3, 0.0);
    for (std::size_t j = 1; j < p.size(); ++j) {
      const double d = static_cast<double>(j) * p[j];  // coefficient of t^{j-1} in u_k'
      next[j + 1] += 0.5 * d;
      next[j + 3] -= 0.5 * d;
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      next[j + 1] += p[j] / (8.0 * static_cast<double>(j + 1));
      next[j + 3] -= 5.0 * p[j] / (8.0 * static_cast<double>(j + 3));
    }
    u[k + 1] = std::move(next);
  }
  return u;
}

double horner(const Poly& p, double t) {
  double acc = 0.0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * t + *it;
  return acc;
}

}  // namespace

namespace detail {

double log_bessel_i_series(double nu, double x) {
  // I_nu(x) = sum_k (x/2)^{2k+nu} / (k! Gamma(nu+k+1))
  const double log_first = nu * std::log(0.5 * x) - std::lgamma(nu + 1.0);
  const double q = 0.25 * x * x;
  double sum = 1.0;
  double term = 1.0;
  double log_scale = 0.0;
  for (int k = 0; k < 100000; ++k) {
    term *= q / ((k + 1.0) * (nu + k + 1.0));
    sum += term;
    if (sum > 1e280) {
      log_scale += std::log(sum);
      term /= sum;
      sum = 1.0;
    }
    // Terms decrease once k exceeds the peak; stop when they no longer matter.
    if (term < 1e-17 * sum && (k + 1.0) * (nu + k + 1.0) > q) break;
  }
  return log_first + log_scale + std::log(sum);
}

double log_bessel_i_debye(double nu, double x) {
  static const auto u = make_debye_polynomials();
  const double z = x / nu;
  const double root = std::sqrt(1.0 + z * z);
  const double t = 1.0 / root;
  const double eta = root + std::log(z / (1.0 + root));
  double sum = 1.0;
  double nu_pow = 1.0;
  for (int k = 1; k <= kDebyeTerms; ++k) {
    nu_pow *= nu;
    sum += horner(u[k], t) / nu_pow;
  }
  return nu * eta - 0.5 * std::log(2.0 * std::numbers::pi * nu) - 0.5 * std::log(root) +
         std::log(sum);
}

double log_bessel_i_hankel(double nu, double x) {
  // I_nu(x) ~ e^x / sqrt(2 pi x) * sum_k (-1)^k a_k(nu) / x^k
  const double mu = 4.0 * nu * nu;
  double sum = 1.0;
  double term = 1.0;
  double prev = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= -(mu - odd * odd) / (8.0 * k * x);
    if (std::abs(term) > std::abs(prev)) break;  // asymptotic series starts diverging
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    prev = term;
  }
  return x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(sum);
}

}  // namespace detail

double log_bessel_i(double nu, double x) {
  if (!(x > 0.0)) throw Error("log_bessel_i: x must be positive");
  if (!(nu >= 0.0)) throw Error("log_bessel_i: order must be non-negative");
  if (x < std::max(kSeriesFloor, nu)) return detail::log_bessel_i_series(nu, x);
  if (nu >= kDebyeMinOrder) return detail::log_bessel_i_debye(nu, x);
  if (x >= std::max(kSeriesFloor, 8.0 * nu * nu)) return detail::log_bessel_i_hankel(nu, x);
  return detail::log_bessel_i_series(nu, x);
}

double bessel_i_ratio(double nu, double x) {
  return std::exp(log_bessel_i(nu + 1.0, x) - log_bessel_i(nu, x));
}

}  // namespace varmt::vmf
