#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "varmt/common/error.hpp"
#include "varmt/vmf/bessel.hpp"
#include "varmt/vmf/vmf_loss.hpp"

using namespace varmt;
using namespace varmt::vmf;

namespace {

// log I_nu(x) from mpmath at 40 digits.
struct BesselRef {
  double nu, x, log_i;
};
const BesselRef kBesselRefs[] = {
    {0, 1, 0.23591435850717864869},      {0.5, 2, 0.71600242968946804298},
    {0, 0.001, 2.4999998437500174652e-7}, {1, 5, 3.1919420305456754634},
    {24, 24, 10.107479326983500815},     {24, 100, 93.899176145844155175},
    {149, 149, 75.799055655012063071},   {149, 10, -360.03664678117797382},
    {149, 1000, 984.54171491199249454},  {499, 10000, 9982.0278134535284019},
    {0, 10000, 9994.475903781432301},    {3.5, 30, 27.177258008253870815},
    {14, 200, 195.94150048954438047},    {0.5, 100, 96.778476373801281574},
};

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

double loss_only(const std::vector<double>& p, const std::vector<double>& t, double lambda1) {
  return nll_vmf_regularized(p, t, lambda1).loss;
}

// Central finite differences, relative error in the 2-norm.
double fd_relative_error(const std::vector<double>& p, const std::vector<double>& t,
                         double lambda1) {
  const double h = 1e-5;
  const auto analytic = nll_vmf_regularized(p, t, lambda1).grad_wrt_prediction;
  double num = 0, den = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto a = p, b = p;
    a[i] += h;
    b[i] -= h;
    const double fd = (loss_only(a, t, lambda1) - loss_only(b, t, lambda1)) / (2 * h);
    num += (fd - analytic[i]) * (fd - analytic[i]);
    den += analytic[i] * analytic[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

}  // namespace

TEST(Bessel, MatchesHighPrecisionReference) {
  for (const auto& r : kBesselRefs) {
    const double got = log_bessel_i(r.nu, r.x);
    EXPECT_NEAR(got, r.log_i, 1e-10 * std::max(1.0, std::abs(r.log_i))) << r.nu << " " << r.x;
  }
}

TEST(Bessel, HalfIntegerClosedForm) {
  for (double x : {0.3, 2.0, 15.0, 19.9, 20.0, 45.0, 300.0}) {
    // I_{1/2}(x) = sqrt(2/(pi x)) sinh x
    const double expect =
        0.5 * std::log(2.0 / (std::numbers::pi * x)) + x + std::log1p(-std::exp(-2 * x)) -
        std::log(2.0);
    EXPECT_NEAR(log_bessel_i(0.5, x), expect, 1e-12 * std::max(1.0, x)) << x;
  }
  EXPECT_NEAR(std::exp(log_bessel_i(0.5, 2.0)), 2.0462, 1e-4);
}

TEST(Bessel, MonotoneInX) {
  for (double nu : {0.0, 0.5, 3.0, 24.0, 149.0}) {
    double prev = log_bessel_i(nu, 0.01);
    for (double x = 0.02; x < 2000; x *= 1.07) {
      const double cur = log_bessel_i(nu, x);
      EXPECT_GT(cur, prev) << nu << " " << x;
      prev = cur;
    }
  }
}

TEST(Bessel, BranchesAgreeAtSwitchover) {
  for (double nu = 0.0; nu <= 500.0; nu += (nu < 30 ? 0.5 : 7.5)) {
    const double x = std::max(20.0, nu);
    const double series = detail::log_bessel_i_series(nu, x);
    const double asym = nu >= 15.0 ? detail::log_bessel_i_debye(nu, x)
                                   : (x >= 8 * nu * nu ? detail::log_bessel_i_hankel(nu, x)
                                                       : detail::log_bessel_i_series(nu, x));
    EXPECT_NEAR(series, asym, 1e-9) << nu;
  }
  for (double nu : {0.0, 0.5, 1.0, 1.5}) {
    const double x = std::max(20.0, 8 * nu * nu);
    EXPECT_NEAR(detail::log_bessel_i_series(nu, x), detail::log_bessel_i_hankel(nu, x), 1e-12);
  }
}

TEST(Bessel, RejectsNonPositiveArgument) {
  EXPECT_THROW(log_bessel_i(0.0, 0.0), Error);
  EXPECT_THROW(log_bessel_i(1.0, -1.0), Error);
}

TEST(VmfNormalizer, ThreeDimensionalClosedForm) {
  for (double k : {0.1, 1.0, 10.0, 100.0}) {
    const double closed = std::log(k) - std::log(4 * std::numbers::pi) -
                          (k + std::log1p(-std::exp(-2 * k)) - std::log(2.0));
    EXPECT_NEAR(log_normalizer(3, k), closed, 1e-8) << k;
  }
}

TEST(VmfNormalizer, ContinuousAcrossSwitchover) {
  for (int m : {3, 50, 300, 1000}) {
    const double nu = 0.5 * m - 1.0;
    const double boundary = std::max(20.0, nu);
    const double below = log_normalizer(m, std::nextafter(boundary, 0.0));
    const double at = log_normalizer(m, boundary);
    EXPECT_LT(std::abs(at - below), 1e-6) << m;
  }
}

TEST(NllVmf, OnlyDotTermDependsOnTarget) {
  const std::vector<double> p{1.2, -0.7, 0.4};
  const double n = std::sqrt(1.2 * 1.2 + 0.7 * 0.7 + 0.4 * 0.4);
  const std::vector<double> along{1.2 / n, -0.7 / n, 0.4 / n};
  const std::vector<double> against{-1.2 / n, 0.7 / n, -0.4 / n};
  EXPECT_NEAR(nll_vmf(p, along).loss - nll_vmf(p, against).loss, -2 * n, 1e-12);
}

TEST(NllVmf, ThreeDimensionalValue) {
  const auto v = nll_vmf(std::vector<double>{2, 0, 0}, std::vector<double>{1, 0, 0});
  const double expect = -std::log(2.0 / (4 * std::numbers::pi * std::sinh(2.0))) - 2.0;
  EXPECT_NEAR(v.loss, expect, 1e-12);
}

TEST(NllVmf, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> norm(0.5, 60.0);
  for (int d : {3, 50, 300}) {
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
      auto p = random_unit(rng, d);
      const double k = norm(rng);
      for (auto& x : p) x *= k;
      const auto t = random_unit(rng, d);
      worst = std::max(worst, fd_relative_error(p, t, 0.0));
    }
    EXPECT_LT(worst, 1e-4) << d;
  }
}

TEST(NllVmfRegularized, ReducesToPlain) {
  const std::vector<double> p{0.3, 1.1, -2.0}, t{0, 1, 0};
  const auto a = nll_vmf(p, t);
  const auto b = nll_vmf_regularized(p, t, 0.0);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.grad_wrt_prediction, b.grad_wrt_prediction);
}

TEST(NllVmfRegularized, AddsNormPenalty) {
  const std::vector<double> p{2, 0, 0}, t{1, 0, 0};
  EXPECT_NEAR(nll_vmf_regularized(p, t, 0.02).loss, nll_vmf(p, t).loss + 0.04, 1e-12);
}

TEST(NllVmfRegularized, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> norm(0.5, 40.0);
  for (double lambda1 : {0.01, 0.1}) {
    for (int d : {3, 50, 300}) {
      for (int i = 0; i < 20; ++i) {
        auto p = random_unit(rng, d);
        const double k = norm(rng);
        for (auto& x : p) x *= k;
        EXPECT_LT(fd_relative_error(p, random_unit(rng, d), lambda1), 1e-4);
      }
    }
  }
}

TEST(NllVmf, StrictlyDecreasingInCosine) {
  // Fixed norm 5 in d=4; rotate the target toward the prediction.
  const std::vector<double> p{5, 0, 0, 0};
  double prev = INFINITY;
  for (double angle = std::numbers::pi; angle >= 0; angle -= 0.05) {
    const std::vector<double> t{std::cos(angle), std::sin(angle), 0, 0};
    const double l = nll_vmf(p, t).loss;
    EXPECT_LT(l, prev);
    prev = l;
  }
}

TEST(NllVmf, Errors) {
  EXPECT_THROW(nll_vmf(std::vector<double>{0, 0, 0}, std::vector<double>{1, 0, 0}), Error);
  EXPECT_THROW(nll_vmf(std::vector<double>{1, 0, 0}, std::vector<double>{2, 0, 0}), Error);
  EXPECT_THROW(nll_vmf(std::vector<double>{1, 0}, std::vector<double>{1, 0, 0}), Error);
}

TEST(CosineLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  auto p = random_unit(rng, 10);
  for (auto& x : p) x *= 3.0;
  const auto t = random_unit(rng, 10);
  std::vector<double> g(10), scratch(10);
  cosine_loss_into(p, t, g);
  for (int i = 0; i < 10; ++i) {
    auto a = p, b = p;
    a[i] += 1e-6;
    b[i] -= 1e-6;
    const double fd = (cosine_loss_into(a, t, scratch) - cosine_loss_into(b, t, scratch)) / 2e-6;
    EXPECT_NEAR(fd, g[i], 1e-7);
  }
}
