#pragma once

#include <complex>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>

#include "cccp/linalg.hpp"
#include "cccp/rng.hpp"

namespace cccp {

/// Complex normal law N_c(mu, Gamma, C): mean vector, Hermitian covariance
/// Gamma = E[(z-mu)(z-mu)^H], symmetric relation matrix C = E[(z-mu)(z-mu)^T].
struct ComplexNormal {
  CVec mean;
  CMat gamma;
  CMat relation;

  int dim() const { return static_cast<int>(mean.size()); }

  static ComplexNormal deterministic(CVec mu) {
    const int n = static_cast<int>(mu.size());
    return ComplexNormal{std::move(mu), CMat::Zero(n, n), CMat::Zero(n, n)};
  }

  /// Circular case C = 0.
  static ComplexNormal circular(CVec mu, CMat gamma_in) {
    const int n = static_cast<int>(mu.size());
    return ComplexNormal{std::move(mu), std::move(gamma_in), CMat::Zero(n, n)};
  }

  static ComplexNormal scalar(std::complex<double> mu, double gamma_in,
                              double relation_in) {
    ComplexNormal d;
    d.mean = CVec::Constant(1, mu);
    d.gamma = CMat::Constant(1, 1, gamma_in);
    d.relation = CMat::Constant(1, 1, relation_in);
    return d;
  }
};

/// Report-style validation result; each invariant is listed with the
/// magnitude of its violation.
struct DistributionCheck {
  bool dims_ok = true;
  bool finite_ok = true;
  bool hermitian_ok = true;
  double hermitian_err = 0.0;
  bool relation_symmetric_ok = true;
  double relation_symmetry_err = 0.0;
  bool gx_psd_ok = true;
  double gx_min_eig = 0.0;
  bool gy_psd_ok = true;
  double gy_min_eig = 0.0;

  bool ok() const {
    return dims_ok && finite_ok && hermitian_ok && relation_symmetric_ok &&
           gx_psd_ok && gy_psd_ok;
  }

  std::string describe() const {
    std::ostringstream os;
    if (!dims_ok) os << "dimension mismatch; ";
    if (!finite_ok) os << "non-finite entries; ";
    if (!hermitian_ok) os << "Gamma not Hermitian (err " << hermitian_err << "); ";
    if (!relation_symmetric_ok)
      os << "C not symmetric (err " << relation_symmetry_err << "); ";
    if (!gx_psd_ok) os << "Gx = Re(Gamma+C)/2 not PSD (min eig " << gx_min_eig << "); ";
    if (!gy_psd_ok) os << "Gy = Re(Gamma-C)/2 not PSD (min eig " << gy_min_eig << "); ";
    const std::string s = os.str();
    return s.empty() ? "valid" : s;
  }
};

inline DistributionCheck validate(const ComplexNormal& d, double tol = 1e-10) {
  DistributionCheck r;
  const int n = d.dim();
  if (d.gamma.rows() != n || d.gamma.cols() != n || d.relation.rows() != n ||
      d.relation.cols() != n) {
    r.dims_ok = false;
    return r;
  }
  if (!all_finite(d.mean) || !all_finite(d.gamma) || !all_finite(d.relation)) {
    r.finite_ok = false;
    return r;
  }
  const double scale =
      std::max({d.gamma.cwiseAbs().maxCoeff(), d.relation.cwiseAbs().maxCoeff(), 1.0});
  r.hermitian_err = hermitian_error(d.gamma);
  r.hermitian_ok = r.hermitian_err <= tol * scale;
  r.relation_symmetry_err = symmetric_error(d.relation);
  r.relation_symmetric_ok = r.relation_symmetry_err <= tol * scale;
  if (r.hermitian_ok && r.relation_symmetric_ok) {
    const RMat gx = 0.5 * (d.gamma.real() + d.relation.real());
    const RMat gy = 0.5 * (d.gamma.real() - d.relation.real());
    Eigen::SelfAdjointEigenSolver<RMat> ex(0.5 * (gx + gx.transpose()),
                                           Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<RMat> ey(0.5 * (gy + gy.transpose()),
                                           Eigen::EigenvaluesOnly);
    r.gx_min_eig = ex.eigenvalues().minCoeff();
    r.gy_min_eig = ey.eigenvalues().minCoeff();
    r.gx_psd_ok = r.gx_min_eig >= -tol * scale * 10.0;
    r.gy_psd_ok = r.gy_min_eig >= -tol * scale * 10.0;
  }
  return r;
}

struct AugmentedReal {
  RVec mean;   // [Re mu; Im mu]
  RMat cov;    // [[Gx, Gxy], [Gyx, Gy]]
};

/// Augmented-real representation; the general inversion of the defining
/// equations (imaginary cross blocks permitted):
///   Gx  = Re(Gamma+C)/2,  Gy  = Re(Gamma-C)/2,
///   Gyx = Im(Gamma+C)/2,  Gxy = Im(C-Gamma)/2.
inline AugmentedReal augmented_real(const ComplexNormal& d, double tol = 1e-10) {
  const int n = d.dim();
  if (d.gamma.rows() != n || d.gamma.cols() != n || d.relation.rows() != n ||
      d.relation.cols() != n) {
    throw DimensionMismatch("augmented_real: inconsistent dimensions");
  }
  AugmentedReal a;
  a.mean.resize(2 * n);
  a.mean.head(n) = d.mean.real();
  a.mean.tail(n) = d.mean.imag();
  a.cov.resize(2 * n, 2 * n);
  a.cov.topLeftCorner(n, n) = 0.5 * (d.gamma.real() + d.relation.real());
  a.cov.bottomRightCorner(n, n) = 0.5 * (d.gamma.real() - d.relation.real());
  a.cov.bottomLeftCorner(n, n) = 0.5 * (d.gamma.imag() + d.relation.imag());
  a.cov.topRightCorner(n, n) = 0.5 * (d.relation.imag() - d.gamma.imag());
  const double asym = symmetric_error(a.cov);
  const double scale = std::max(a.cov.cwiseAbs().maxCoeff(), 1.0);
  if (asym > tol * scale * 10.0) {
    throw NotPSD("augmented_real: inconsistent (Gamma, C) pair (asymmetric embedding)");
  }
  a.cov = 0.5 * (a.cov + a.cov.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<RMat> es(a.cov, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-9 * scale) {
    throw NotPSD("augmented_real: assembled 2n x 2n covariance not PSD");
  }
  return a;
}

/// Draws `count` samples (columns) deterministically for a fixed seed.
inline CMat sample(const ComplexNormal& d, long count, std::uint64_t seed) {
  const int n = d.dim();
  const AugmentedReal a = augmented_real(d);
  const RMat f = psd_sqrt(a.cov, -1.0, /*drop_negligible=*/true);  // k x 2n
  const int k = static_cast<int>(f.rows());
  GaussianRng rng(seed);
  CMat out(n, count);
  const long block = 16384;
  RMat g;
  RMat x2;
  for (long start = 0; start < count; start += block) {
    const long nb = std::min(block, count - start);
    g.resize(k, nb);
    rng.fill_gaussian(g);
    x2.noalias() = f.transpose() * g;
    x2.colwise() += a.mean;
    for (long j = 0; j < nb; ++j) {
      for (int i = 0; i < n; ++i) {
        out(i, start + j) = std::complex<double>(x2(i, j), x2(n + i, j));
      }
    }
  }
  return out;
}

/// Affine closure: A z + b ~ N_c(A mu + b, A Gamma A^H, A C A^T).
inline ComplexNormal affine(const ComplexNormal& d, const CMat& a, const CVec& b) {
  if (a.cols() != d.dim() || b.size() != a.rows()) {
    throw DimensionMismatch("affine: operator/offset dimensions do not conform");
  }
  ComplexNormal out;
  out.mean = a * d.mean + b;
  out.gamma = a * d.gamma * a.adjoint();
  out.relation = a * d.relation * a.transpose();
  return out;
}

struct RealGaussStats {
  double mean = 0.0;
  double variance = 0.0;
};

/// Distribution of Re(c^H z) for random c: mean Re(mu_c^H z) and variance
/// Re(z)^T Gx Re(z) + Im(z)^T Gy Im(z), which is the manifestly PSD block
/// form of (1/2) Re(z^H Gamma z + z^T C z) for real Gamma, C.
inline RealGaussStats re_inner_stats(const ComplexNormal& d_c, const CVec& z) {
  if (z.size() != d_c.dim()) {
    throw DimensionMismatch("re_inner_stats: z dimension mismatch");
  }
  const SplitBlocks sb = split_blocks(d_c.gamma, d_c.relation);
  const RVec x = z.real();
  const RVec y = z.imag();
  RealGaussStats s;
  s.mean = d_c.mean.real().dot(x) + d_c.mean.imag().dot(y);
  s.variance = x.dot(sb.gx.mat * x) + y.dot(sb.gy.mat * y);
  if (s.variance < 0.0) s.variance = 0.0;
  return s;
}

/// Variance of Re(b) for a scalar distribution: (Re Gamma_b + Re C_b)/2.
inline double re_scalar_variance(const ComplexNormal& d_b) {
  if (d_b.dim() != 1) {
    throw DimensionMismatch("re_scalar_variance: scalar distribution expected");
  }
  double v = 0.5 * (d_b.gamma(0, 0).real() + d_b.relation(0, 0).real());
  return v < 0.0 ? 0.0 : v;
}

/// Distribution of the row statistic Re(A_i^H-form) minus the offset:
///   h = sum_j Re(conj(a_ij) z_j) - Re(b_i),
/// with variance from the row blocks plus sigma_b = Var(Re b_i). Row and
/// offset are independent.
inline RealGaussStats re_row_stats(const ComplexNormal& d_row,
                                   const ComplexNormal& d_b, const CVec& z) {
  RealGaussStats s = re_inner_stats(d_row, z);
  s.mean -= d_b.mean(0).real();
  s.variance += re_scalar_variance(d_b);
  return s;
}

}  // namespace cccp
