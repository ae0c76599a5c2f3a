#pragma once

namespace varmt::vmf {

/// log I_nu(x), the modified Bessel function of the first kind, for nu >= 0
/// and x > 0. Stable for nu up to several hundred and x up to ~1e4.
///
/// Branches:
///  - x < max(20, nu): ascending power series, summed with running rescaling.
///  - nu >= 15: Debye uniform asymptotic expansion in 1/nu.
///  - x >= max(20, 8 nu^2): Hankel large-argument expansion.
///  - otherwise (small nu, moderate x): power series.
double log_bessel_i(double nu, double x);

/// I_{nu+1}(x) / I_nu(x), computed from two log evaluations.
double bessel_i_ratio(double nu, double x);

namespace detail {
double log_bessel_i_series(double nu, double x);
double log_bessel_i_debye(double nu, double x);
double log_bessel_i_hankel(double nu, double x);
}  // namespace detail

}  // namespace varmt::vmf
