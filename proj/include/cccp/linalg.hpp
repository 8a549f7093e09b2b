#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <string>
#include <utility>

#include "cccp/errors.hpp"

namespace cccp {

using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline bool all_finite(const RMat& m) { return m.allFinite(); }
inline bool all_finite(const CMat& m) {
  return m.real().allFinite() && m.imag().allFinite();
}

/// max |M - M^H| entry, as an absolute deviation.
inline double hermitian_error(const CMat& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

/// max |M - M^T| entry.
inline double symmetric_error(const CMat& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

inline double symmetric_error(const RMat& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// Real symmetric positive-semidefinite matrix, validated on construction.
struct RealSymPSD {
  RMat mat;
  double min_eigenvalue = 0.0;

  int dim() const { return static_cast<int>(mat.rows()); }
};

namespace detail {

inline double matrix_scale(const RMat& s) {
  if (s.size() == 0) return 0.0;
  return s.cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Validates symmetry (relative tolerance) and spectrum (eigenvalues above
/// -psd_tol); psd_tol < 0 selects the default 1e-9 * |S|.
inline RealSymPSD make_real_sym_psd(RMat s, double sym_tol = 1e-10,
                                    double psd_tol = -1.0) {
  if (s.rows() != s.cols()) {
    throw DimensionMismatch("make_real_sym_psd: matrix must be square");
  }
  if (!all_finite(s)) throw Error("make_real_sym_psd: non-finite entries");
  const double scale = std::max(detail::matrix_scale(s), 1e-300);
  if (symmetric_error(s) > sym_tol * std::max(1.0, scale)) {
    throw NotSymmetric("make_real_sym_psd: asymmetry " +
                       std::to_string(symmetric_error(s)) +
                       " exceeds tolerance");
  }
  s = 0.5 * (s + s.transpose()).eval();
  if (psd_tol < 0.0) psd_tol = 1e-9 * scale;
  Eigen::SelfAdjointEigenSolver<RMat> es(s, Eigen::EigenvaluesOnly);
  const double min_eig = s.size() ? es.eigenvalues().minCoeff() : 0.0;
  if (min_eig < -psd_tol) {
    throw NotPSD("make_real_sym_psd: eigenvalue " + std::to_string(min_eig) +
                 " below -" + std::to_string(psd_tol));
  }
  return RealSymPSD{std::move(s), min_eig};
}

/// Factor F with F^T F = S. Eigenvalues in [-psd_tol, 0) are clamped to 0 so
/// that singular matrices (zero blocks allowed) factor cleanly; an eigenvalue
/// below -psd_tol raises NotPSD. psd_tol < 0 selects 1e-9 * |S|.
/// With drop_negligible set, rows whose eigenvalue is at rounding level are
/// removed, giving a rectangular k x n factor.
inline RMat psd_sqrt(const RMat& s, double psd_tol = -1.0,
                     bool drop_negligible = false) {
  if (s.rows() != s.cols()) {
    throw DimensionMismatch("psd_sqrt: matrix must be square");
  }
  if (!all_finite(s)) throw Error("psd_sqrt: non-finite entries");
  const double scale = detail::matrix_scale(s);
  if (symmetric_error(s) > 1e-10 * std::max(1.0, scale)) {
    throw NotSymmetric("psd_sqrt: matrix not symmetric within tolerance");
  }
  if (psd_tol < 0.0) psd_tol = 1e-9 * std::max(scale, 1e-300);
  const RMat sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<RMat> es(sym);
  if (es.info() != Eigen::Success) {
    throw NumericalError("psd_sqrt: eigendecomposition failed");
  }
  RVec lam = es.eigenvalues();
  const int n = static_cast<int>(s.rows());
  for (int i = 0; i < n; ++i) {
    if (lam[i] < -psd_tol) {
      throw NotPSD("psd_sqrt: eigenvalue " + std::to_string(lam[i]) +
                   " below -" + std::to_string(psd_tol));
    }
    if (lam[i] < 0.0) lam[i] = 0.0;
  }
  const double drop_tol = drop_negligible ? 1e-14 * std::max(scale, 0.0) : -1.0;
  int kept = 0;
  for (int i = 0; i < n; ++i) {
    if (lam[i] > drop_tol) ++kept;
  }
  RMat f(drop_negligible ? kept : n, n);
  int r = 0;
  for (int i = 0; i < n; ++i) {
    if (drop_negligible && lam[i] <= drop_tol) continue;
    f.row(r++) = std::sqrt(lam[i]) * es.eigenvectors().col(i).transpose();
  }
  if (!drop_negligible) {
    // Rows for clamped eigenvalues are zero but keep F square.
    for (int i = 0; r < n; ++i, ++r) f.row(r).setZero();
  }
  return f;
}

inline RMat psd_sqrt(const RealSymPSD& s, double psd_tol = -1.0) {
  return psd_sqrt(s.mat, psd_tol);
}

struct SplitBlocks {
  RealSymPSD gx;  // covariance of the real part
  RealSymPSD gy;  // covariance of the imaginary part
};

/// Inverts the (Gamma, C) pair into real/imaginary-part covariances under the
/// independence assumption Im(Gamma) = Im(C) = 0:
///   Gx = (Gamma + C)/2,  Gy = (Gamma - C)/2.
inline SplitBlocks split_blocks(const CMat& gamma, const CMat& relation,
                                double tol = 1e-10) {
  if (gamma.rows() != gamma.cols() || relation.rows() != relation.cols() ||
      gamma.rows() != relation.rows()) {
    throw DimensionMismatch("split_blocks: Gamma and C must be square, same size");
  }
  const double scale =
      std::max({detail::matrix_scale(gamma.cwiseAbs()), detail::matrix_scale(relation.cwiseAbs()), 1.0});
  const double im_g = gamma.size() ? gamma.imag().cwiseAbs().maxCoeff() : 0.0;
  const double im_c = relation.size() ? relation.imag().cwiseAbs().maxCoeff() : 0.0;
  if (im_g > tol * scale || im_c > tol * scale) {
    throw IndependenceViolated(
        "split_blocks: Gamma/C have imaginary parts (real/imaginary parts of "
        "the vector are not independent)");
  }
  RMat gx = 0.5 * (gamma.real() + relation.real());
  RMat gy = 0.5 * (gamma.real() - relation.real());
  return SplitBlocks{make_real_sym_psd(std::move(gx), tol),
                     make_real_sym_psd(std::move(gy), tol)};
}

/// Real embedding of a Hermitian form: [w_r; w_i]^T E [w_r; w_i] = w^H H w.
inline RMat hermitian_real_embedding(const CMat& h) {
  const int n = static_cast<int>(h.rows());
  RMat e(2 * n, 2 * n);
  e.topLeftCorner(n, n) = h.real();
  e.topRightCorner(n, n) = -h.imag();
  e.bottomLeftCorner(n, n) = h.imag();
  e.bottomRightCorner(n, n) = h.real();
  return 0.5 * (e + e.transpose());
}

}  // namespace cccp
