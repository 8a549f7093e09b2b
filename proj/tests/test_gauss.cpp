#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "cccp/gauss.hpp"

using namespace cccp;

namespace {

// Independent oracle: bisection on the erfc-based CDF.
double quantile_by_bisection(double u) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("normal_cdf basic values") {
  CHECK(normal_cdf(0.0) == Catch::Approx(0.5).margin(1e-16));
  CHECK(normal_cdf(1.6448536269514722) == Catch::Approx(0.95).margin(1e-12));
  for (double x : {-5.0, -2.3, -0.7, 0.4, 1.9, 4.2}) {
    CHECK(normal_cdf(-x) == Catch::Approx(1.0 - normal_cdf(x)).margin(1e-14));
  }
}

TEST_CASE("normal_quantile matches bisection oracle") {
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK(normal_quantile(0.95) == Catch::Approx(1.6448536269514722).margin(1e-10));
  CHECK(normal_quantile(0.975) == Catch::Approx(1.959963984540054).margin(1e-10));
  for (double u : {1e-8, 1e-6, 1e-3, 0.02, 0.2, 0.45, 0.55, 0.9, 0.99, 1.0 - 1e-6,
                   1.0 - 1e-8}) {
    CHECK(normal_quantile(u) == Catch::Approx(quantile_by_bisection(u)).margin(5e-12));
  }
}

TEST_CASE("normal_quantile round trip") {
  // |cdf(quantile(u)) - u| <= 1e-12 on [1e-8, 1 - 1e-8].
  for (int i = 0; i <= 400; ++i) {
    const double t = i / 400.0;
    const double u = 1e-8 + (1.0 - 2e-8) * t;
    CHECK(std::abs(normal_cdf(normal_quantile(u)) - u) <= 1e-12);
  }
  // quantile(cdf(x)) = x within 1e-10 on [-6, 6].
  for (int i = 0; i <= 240; ++i) {
    const double x = -6.0 + 12.0 * i / 240.0;
    CHECK(normal_quantile(normal_cdf(x)) == Catch::Approx(x).margin(1e-10));
  }
}

TEST_CASE("normal_quantile and cdf are monotone") {
  double prev = -1e300;
  for (int i = 1; i < 1000; ++i) {
    const double q = normal_quantile(i / 1000.0);
    CHECK(q > prev);
    prev = q;
  }
  prev = -1.0;
  for (int i = 0; i <= 100; ++i) {
    const double c = normal_cdf(-8.0 + 0.16 * i);
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("normal_quantile domain errors") {
  CHECK_THROWS_AS(normal_quantile(0.0), DomainError);
  CHECK_THROWS_AS(normal_quantile(1.0), DomainError);
  CHECK_THROWS_AS(normal_quantile(-0.2), DomainError);
  CHECK_THROWS_AS(normal_quantile(1.7), DomainError);
}

TEST_CASE("quantile derivative is the reciprocal density") {
  for (double u : {0.51, 0.7, 0.9, 0.95, 0.999}) {
    const double x = normal_quantile(u);
    CHECK(normal_quantile_derivative(u) == Catch::Approx(1.0 / normal_pdf(x)).epsilon(1e-12));
    // Finite-difference cross-check of the analytic derivative.
    const double h = 1e-6;
    const double fd = (normal_quantile(u + h) - normal_quantile(u - h)) / (2.0 * h);
    CHECK(normal_quantile_derivative(u) == Catch::Approx(fd).epsilon(1e-4));
  }
}
