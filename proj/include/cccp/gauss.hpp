#pragma once

#include <cmath>

#include "cccp/errors.hpp"

namespace cccp {

inline double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

/// Standard normal CDF via erfc; accurate in both tails.
inline double normal_cdf(double x) {
  static const double inv_sqrt2 = 0.7071067811865475244008444;
  return 0.5 * std::erfc(-x * inv_sqrt2);
}

namespace detail {

// Rational approximation for the lower half u in (0, 0.5]; relative error
// below 1.2e-9 everywhere (Acklam-style coefficients).
inline double quantile_estimate_lower(double u) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double u_low = 0.02425;
  if (u < u_low) {
    double q = std::sqrt(-2.0 * std::log(u));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = u - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

/// Inverse standard normal CDF. Rational initial estimate refined by one
/// Halley iteration of the CDF; |cdf(quantile(u)) - u| <= 1e-12 on
/// [1e-8, 1 - 1e-8].
inline double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw DomainError("normal_quantile: argument must lie strictly in (0,1)");
  }
  if (u == 0.5) return 0.0;
  // Work on the lower half so that cdf(x) - u is evaluated without
  // cancellation (erfc handles the left tail natively).
  const bool flip = u > 0.5;
  const double ul = flip ? 1.0 - u : u;
  double x = detail::quantile_estimate_lower(ul);
  // Halley step: x1 = x - r / (1 + x r / 2), r = (cdf(x) - u) / pdf(x).
  const double r = (normal_cdf(x) - ul) / normal_pdf(x);
  x -= r / (1.0 + 0.5 * x * r);
  return flip ? -x : x;
}

/// d/du of the quantile, computed analytically as 1/pdf(quantile(u)).
inline double normal_quantile_derivative(double u) {
  return 1.0 / normal_pdf(normal_quantile(u));
}

}  // namespace cccp
