#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cccp/errors.hpp"
#include "cccp/linalg.hpp"

namespace cccp {

struct Slice {
  int offset = 0;
  int size = 0;
};

enum class ConeKind { NonNeg, SecondOrder };

struct ConeBlock {
  ConeKind kind;
  int dim;
};

/// Standard-form cone program
///   min c^T x   s.t.  A x = b,  x in K,
/// where K is the ordered product of nonnegative-orthant and second-order
/// cone blocks partitioning the variable vector. var_map names slices of x
/// so callers can recover problem variables from a solution.
struct ConicProgram {
  RVec objective;
  RMat eq_matrix;
  RVec eq_rhs;
  std::vector<ConeBlock> cones;
  std::map<std::string, Slice> var_map;

  int num_vars() const { return static_cast<int>(objective.size()); }
  int num_eqs() const { return static_cast<int>(eq_rhs.size()); }

  void validate() const {
    int total = 0;
    for (const auto& blk : cones) {
      if (blk.dim <= 0) throw Error("ConicProgram: nonpositive cone dimension");
      if (blk.kind == ConeKind::SecondOrder && blk.dim < 2) {
        throw Error("ConicProgram: second-order cone must have dimension >= 2");
      }
      total += blk.dim;
    }
    if (total != num_vars()) {
      throw DimensionMismatch("ConicProgram: cone dimensions do not sum to variable count");
    }
    if (eq_matrix.cols() != num_vars() || eq_matrix.rows() != num_eqs()) {
      throw DimensionMismatch("ConicProgram: equality matrix shape mismatch");
    }
    std::vector<char> used(num_vars(), 0);
    for (const auto& [name, sl] : var_map) {
      if (sl.offset < 0 || sl.size < 0 || sl.offset + sl.size > num_vars()) {
        throw Error("ConicProgram: slice '" + name + "' out of range");
      }
      for (int i = sl.offset; i < sl.offset + sl.size; ++i) {
        if (used[i]) throw Error("ConicProgram: overlapping named slices");
        used[i] = 1;
      }
    }
    if (!all_finite(eq_matrix) || !objective.allFinite() || !eq_rhs.allFinite()) {
      throw Error("ConicProgram: non-finite data");
    }
  }

  /// Plain-text dump (matrix-market-style coordinate section) for auditing
  /// against external solvers.
  void write_debug(std::ostream& os) const {
    os << "%%conicprogram vars " << num_vars() << " eqs " << num_eqs() << "\n";
    os << "cones " << cones.size() << "\n";
    for (const auto& blk : cones) {
      os << (blk.kind == ConeKind::NonNeg ? "nonneg " : "soc ") << blk.dim << "\n";
    }
    os << "objective";
    for (int j = 0; j < num_vars(); ++j) os << " " << objective[j];
    os << "\n";
    int nnz = 0;
    for (int i = 0; i < num_eqs(); ++i) {
      for (int j = 0; j < num_vars(); ++j) {
        if (eq_matrix(i, j) != 0.0) ++nnz;
      }
    }
    os << "matrix " << num_eqs() << " " << num_vars() << " " << nnz << "\n";
    for (int i = 0; i < num_eqs(); ++i) {
      for (int j = 0; j < num_vars(); ++j) {
        if (eq_matrix(i, j) != 0.0) {
          os << (i + 1) << " " << (j + 1) << " " << eq_matrix(i, j) << "\n";
        }
      }
    }
    os << "rhs";
    for (int i = 0; i < num_eqs(); ++i) os << " " << eq_rhs[i];
    os << "\n";
    for (const auto& [name, sl] : var_map) {
      os << "slice " << name << " " << sl.offset << " " << sl.size << "\n";
    }
  }
};

struct SolverConfig {
  int max_iterations = 100;
  double tol_gap = 1e-8;
  double tol_feas = 1e-8;
  double step_fraction = 0.99;
  double static_reg = 1e-9;
  double infeas_tol = 1e-8;
  bool record_trace = false;
};

enum class SolveStatus {
  Optimal,
  PrimalInfeasible,
  DualInfeasible,
  MaxIterations,
  NumericalError
};

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::PrimalInfeasible: return "primal_infeasible";
    case SolveStatus::DualInfeasible: return "dual_infeasible";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::NumericalError: return "numerical_error";
  }
  return "unknown";
}

struct IterTrace {
  double primal_obj;
  double dual_obj;
  double res_primal;
  double res_dual;
  double res_gap;
  double mu;
};

struct SolveResult {
  SolveStatus status = SolveStatus::NumericalError;
  RVec primal;
  RVec dual;
  RVec slack;
  double objective = 0.0;
  double res_primal = 0.0;
  double res_dual = 0.0;
  double res_gap = 0.0;
  int iterations = 0;
  std::string message;
  std::vector<IterTrace> trace;
};

// ---------------------------------------------------------------------------
// Cone operations
// ---------------------------------------------------------------------------

namespace cones {

struct Layout {
  std::vector<ConeBlock> blocks;
  std::vector<int> offset;
  int total = 0;
  int degree = 0;  // orthant size + number of second-order cones

  static Layout make(const std::vector<ConeBlock>& blks) {
    Layout l;
    l.blocks = blks;
    l.offset.reserve(blks.size());
    for (const auto& b : blks) {
      l.offset.push_back(l.total);
      l.total += b.dim;
      l.degree += (b.kind == ConeKind::NonNeg) ? b.dim : 1;
    }
    return l;
  }
};

inline double jdot(const Eigen::Ref<const RVec>& u, const Eigen::Ref<const RVec>& v) {
  return u[0] * v[0] - u.tail(u.size() - 1).dot(v.tail(v.size() - 1));
}

/// Identity element per block (ones on the orthant, (1,0,...) per SOC).
inline RVec identity(const Layout& l) {
  RVec e = RVec::Zero(l.total);
  for (size_t k = 0; k < l.blocks.size(); ++k) {
    if (l.blocks[k].kind == ConeKind::NonNeg) {
      e.segment(l.offset[k], l.blocks[k].dim).setOnes();
    } else {
      e[l.offset[k]] = 1.0;
    }
  }
  return e;
}

inline bool in_cone(const Layout& l, const RVec& v, double tol = 0.0) {
  for (size_t k = 0; k < l.blocks.size(); ++k) {
    const int off = l.offset[k];
    const int d = l.blocks[k].dim;
    if (l.blocks[k].kind == ConeKind::NonNeg) {
      if ((v.segment(off, d).array() < -tol).any()) return false;
    } else {
      if (v[off] + tol < v.segment(off + 1, d - 1).norm()) return false;
    }
  }
  return true;
}

inline RVec project(const Layout& l, const RVec& v) {
  RVec out(l.total);
  for (size_t k = 0; k < l.blocks.size(); ++k) {
    const int off = l.offset[k];
    const int d = l.blocks[k].dim;
    if (l.blocks[k].kind == ConeKind::NonNeg) {
      out.segment(off, d) = v.segment(off, d).cwiseMax(0.0);
    } else {
      const double t = v[off];
      const double nrm = v.segment(off + 1, d - 1).norm();
      if (nrm <= t) {
        out.segment(off, d) = v.segment(off, d);
      } else if (nrm <= -t) {
        out.segment(off, d).setZero();
      } else {
        const double beta = 0.5 * (t + nrm);
        out[off] = beta;
        out.segment(off + 1, d - 1) = (beta / nrm) * v.segment(off + 1, d - 1);
      }
    }
  }
  return out;
}

/// Jordan product per block.
inline RVec prod(const Layout& l, const RVec& u, const RVec& v) {
  RVec out(l.total);
  for (size_t k = 0; k < l.blocks.size(); ++k) {
    const int off = l.offset[k];
    const int d = l.blocks[k].dim;
    if (l.blocks[k].kind == ConeKind::NonNeg) {
      out.segment(off, d) = u.segment(off, d).cwiseProduct(v.segment(off, d));
    } else {
      out[off] = u.segment(off, d).dot(v.segment(off, d));
      out.segment(off + 1, d - 1) = u[off] * v.segment(off + 1, d - 1) +
                                    v[off] * u.segment(off + 1, d - 1);
    }
  }
  return out;
}

/// Largest alpha with x + alpha*dx in the cone (1e300 when unbounded).
inline double step_to_boundary(const Layout& l, const RVec& x, const RVec& dx) {
  double alpha = 1e300;
  for (size_t k = 0; k < l.blocks.size(); ++k) {
    const int off = l.offset[k];
    const int d = l.blocks[k].dim;
    if (l.blocks[k].kind == ConeKind::NonNeg) {
      for (int i = off; i < off + d; ++i) {
        if (dx[i] < 0.0) alpha = std::min(alpha, -x[i] / dx[i]);
      }
    } else {
      const auto xb = x.segment(off, d);
      const auto db = dx.segment(off, d);
      const double c0 = jdot(xb, xb);
      const double c1 = jdot(xb, db);
      const double c2 = jdot(db, db);
      double best = 1e300;
      if (std::abs(c2) < 1e-300) {
        if (c1 < 0.0) best = -c0 / (2.0 * c1);
      } else {
        const double disc = c1 * c1 - c2 * c0;
        if (disc >= 0.0) {
          const double sq = std::sqrt(disc);
          const double r1 = (-c1 - sq) / c2;
          const double r2 = (-c1 + sq) / c2;
          if (r1 > 0.0) best = std::min(best, r1);
          if (r2 > 0.0) best = std::min(best, r2);
        }
      }
      alpha = std::min(alpha, best);
    }
  }
  return alpha;
}

/// Nesterov-Todd scaling of an interior pair (x, s).
struct Scaling {
  const Layout* layout;
  std::vector<RVec> w2_orth;   // per block: (x ./ s)
  std::vector<double> eta2;    // per SOC block
  std::vector<RVec> wbar;      // per SOC block
  RVec lambda;                 // scaled point W^{-1} x = W s
  bool ok = true;
};

inline RVec apply_W(const Scaling& sc, const RVec& v);

inline Scaling compute_scaling(const Layout& l, const RVec& x, const RVec& s) {
  Scaling sc;
  sc.layout = &l;
  sc.w2_orth.resize(l.blocks.size());
  sc.eta2.assign(l.blocks.size(), 0.0);
  sc.wbar.resize(l.blocks.size());
  for (size_t k = 0; k < l.blocks.size(); ++k) {
    const int off = l.offset[k];
    const int d = l.blocks[k].dim;
    if (l.blocks[k].kind == ConeKind::NonNeg) {
      const auto xb = x.segment(off, d);
      const auto sb = s.segment(off, d);
      if ((xb.array() <= 0.0).any() || (sb.array() <= 0.0).any()) {
        sc.ok = false;
        return sc;
      }
      sc.w2_orth[k] = xb.cwiseQuotient(sb);
    } else {
      const auto xb = x.segment(off, d);
      const auto sb = s.segment(off, d);
      const double ja = jdot(xb, xb);
      const double jb = jdot(sb, sb);
      if (ja <= 0.0 || jb <= 0.0 || xb[0] <= 0.0 || sb[0] <= 0.0) {
        sc.ok = false;
        return sc;
      }
      const double a = std::sqrt(ja);
      const double b = std::sqrt(jb);
      RVec xt = xb / a;
      RVec st = sb / b;
      const double gamma = std::sqrt(0.5 * (1.0 + xt.dot(st)));
      RVec wb(d);
      wb[0] = (xt[0] + st[0]) / (2.0 * gamma);
      wb.tail(d - 1) = (xt.tail(d - 1) - st.tail(d - 1)) / (2.0 * gamma);
      sc.eta2[k] = a / b;
      sc.wbar[k] = std::move(wb);
    }
  }
  sc.lambda = apply_W(sc, s);
  return sc;
}

inline RVec apply_W(const Scaling& sc, const RVec& v) {
  const Layout& l = *sc.layout;
  RVec out(l.total);
  for (size_t k = 0; k < l.blocks.size(); ++k) {
    const int off = l.offset[k];
    const int d = l.blocks[k].dim;
    if (l.blocks[k].kind == ConeKind::NonNeg) {
      out.segment(off, d) =
          sc.w2_orth[k].cwiseSqrt().cwiseProduct(v.segment(off, d));
    } else {
      const RVec& wb = sc.wbar[k];
      const auto vb = v.segment(off, d);
      const double eta = std::sqrt(sc.eta2[k]);
      const double dot_tail = wb.tail(d - 1).dot(vb.tail(d - 1));
      out[off] = eta * (wb[0] * vb[0] + dot_tail);
      out.segment(off + 1, d - 1) =
          eta * (vb[0] * wb.tail(d - 1) + vb.tail(d - 1) +
                 (dot_tail / (1.0 + wb[0])) * wb.tail(d - 1));
    }
  }
  return out;
}

inline RVec apply_Winv(const Scaling& sc, const RVec& v) {
  const Layout& l = *sc.layout;
  RVec out(l.total);
  for (size_t k = 0; k < l.blocks.size(); ++k) {
    const int off = l.offset[k];
    const int d = l.blocks[k].dim;
    if (l.blocks[k].kind == ConeKind::NonNeg) {
      out.segment(off, d) =
          v.segment(off, d).cwiseQuotient(sc.w2_orth[k].cwiseSqrt());
    } else {
      const RVec& wb = sc.wbar[k];
      const auto vb = v.segment(off, d);
      const double eta = std::sqrt(sc.eta2[k]);
      const double dot_tail = wb.tail(d - 1).dot(vb.tail(d - 1));
      out[off] = (wb[0] * vb[0] - dot_tail) / eta;
      out.segment(off + 1, d - 1) =
          (-vb[0] * wb.tail(d - 1) + vb.tail(d - 1) +
           (dot_tail / (1.0 + wb[0])) * wb.tail(d - 1)) /
          eta;
    }
  }
  return out;
}

/// W^2 v, using W^2 = eta^2 (2 wbar wbar^T - J) on second-order blocks.
inline RVec apply_W2(const Scaling& sc, const RVec& v) {
  const Layout& l = *sc.layout;
  RVec out(l.total);
  for (size_t k = 0; k < l.blocks.size(); ++k) {
    const int off = l.offset[k];
    const int d = l.blocks[k].dim;
    if (l.blocks[k].kind == ConeKind::NonNeg) {
      out.segment(off, d) = sc.w2_orth[k].cwiseProduct(v.segment(off, d));
    } else {
      const RVec& wb = sc.wbar[k];
      const auto vb = v.segment(off, d);
      const double wv = wb.dot(vb);
      out[off] = sc.eta2[k] * (2.0 * wv * wb[0] - vb[0]);
      out.segment(off + 1, d - 1) =
          sc.eta2[k] * (2.0 * wv * wb.tail(d - 1) + vb.tail(d - 1));
    }
  }
  return out;
}

/// Solves lambda o u = d for u (inverse of the Jordan multiplication
/// operator at the scaled point).
inline RVec lambda_div(const Layout& l, const RVec& lambda, const RVec& d) {
  RVec out(l.total);
  for (size_t k = 0; k < l.blocks.size(); ++k) {
    const int off = l.offset[k];
    const int dim = l.blocks[k].dim;
    if (l.blocks[k].kind == ConeKind::NonNeg) {
      out.segment(off, dim) =
          d.segment(off, dim).cwiseQuotient(lambda.segment(off, dim));
    } else {
      const auto lb = lambda.segment(off, dim);
      const auto db = d.segment(off, dim);
      const double det = jdot(lb, lb);
      if (det <= 0.0) throw NumericalError("lambda_div: scaled point left the cone");
      const double u0 = (lb[0] * db[0] - lb.tail(dim - 1).dot(db.tail(dim - 1))) / det;
      out[off] = u0;
      out.segment(off + 1, dim - 1) =
          (db.tail(dim - 1) - u0 * lb.tail(dim - 1)) / lb[0];
    }
  }
  return out;
}

}  // namespace cones

/// Relative primal/dual/gap residual measures for a candidate primal-dual
/// pair; all three vanish at an exact optimum.
inline std::array<double, 3> residuals(const ConicProgram& p, const RVec& primal,
                                       const RVec& dual) {
  if (primal.size() != p.num_vars() || dual.size() != p.num_eqs()) {
    throw DimensionMismatch("residuals: dimension mismatch");
  }
  const double bn = p.eq_rhs.norm();
  const double pres = (p.eq_matrix * primal - p.eq_rhs).norm() / (bn > 0.0 ? bn : 1.0);
  const RVec s = p.objective - p.eq_matrix.transpose() * dual;
  const auto layout = cones::Layout::make(p.cones);
  const double dres =
      (s - cones::project(layout, s)).norm() / std::max(1.0, p.objective.norm());
  const double pobj = p.objective.dot(primal);
  const double dobj = p.eq_rhs.dot(dual);
  const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
  return {pres, dres, gap};
}

// ---------------------------------------------------------------------------
// Presolve
// ---------------------------------------------------------------------------

namespace detail {

struct Presolved {
  bool infeasible = false;
  std::string reason;

  RMat A;
  RVec b;
  RVec c;
  std::vector<ConeBlock> cones;

  int n_orig = 0;
  int m_orig = 0;
  std::vector<int> col_orig;                    // reduced col -> original col
  std::vector<int> row_orig;                    // reduced row -> original row
  std::vector<double> row_scale;                // divisor applied per kept row
  struct FixedVar {
    int col;
    double value;
    int row;       // original pinning row
    double coeff;  // coefficient of col in that row
  };
  std::vector<FixedVar> fixed;  // in elimination order
};

inline Presolved presolve(const ConicProgram& p) {
  Presolved out;
  const int n = p.num_vars();
  const int m = p.num_eqs();
  out.n_orig = n;
  out.m_orig = m;

  RMat A = p.eq_matrix;
  RVec b = p.eq_rhs;
  std::vector<char> row_active(m, 1), col_active(n, 1);

  std::vector<ConeKind> kind_of(n, ConeKind::NonNeg);
  std::vector<int> block_of(n, -1);
  {
    int off = 0;
    for (size_t k = 0; k < p.cones.size(); ++k) {
      for (int i = 0; i < p.cones[k].dim; ++i) {
        kind_of[off + i] = p.cones[k].kind;
        block_of[off + i] = static_cast<int>(k);
      }
      off += p.cones[k].dim;
    }
  }

  const double b_scale = 1.0 + (m ? b.cwiseAbs().maxCoeff() : 0.0);

  // Fixed-variable detection: singleton equality rows pinning orthant
  // variables (the homogenizing coordinate of the reformulation emits one).
  bool progress = true;
  while (progress) {
    progress = false;
    for (int i = 0; i < m; ++i) {
      if (!row_active[i]) continue;
      int nz = 0, col = -1;
      for (int j = 0; j < n && nz < 2; ++j) {
        if (col_active[j] && A(i, j) != 0.0) {
          ++nz;
          col = j;
        }
      }
      if (nz != 1 || kind_of[col] != ConeKind::NonNeg) continue;
      const double coeff = A(i, col);
      double val = b[i] / coeff;
      if (val < -1e-9 * b_scale) {
        out.infeasible = true;
        out.reason = "presolve: nonnegative variable pinned to a negative value";
        return out;
      }
      val = std::max(val, 0.0);
      row_active[i] = 0;
      col_active[col] = 0;
      out.fixed.push_back({col, val, i, coeff});
      if (val != 0.0) {
        for (int r = 0; r < m; ++r) {
          if (row_active[r] && A(r, col) != 0.0) b[r] -= A(r, col) * val;
        }
      }
      progress = true;
    }
  }

  // Zero rows.
  for (int i = 0; i < m; ++i) {
    if (!row_active[i]) continue;
    bool zero = true;
    for (int j = 0; j < n; ++j) {
      if (col_active[j] && A(i, j) != 0.0) {
        zero = false;
        break;
      }
    }
    if (zero) {
      if (std::abs(b[i]) > 1e-10 * b_scale) {
        out.infeasible = true;
        out.reason = "presolve: inconsistent constant equality row";
        return out;
      }
      row_active[i] = 0;
    }
  }

  // Exact duplicate rows.
  for (int i = 0; i < m; ++i) {
    if (!row_active[i]) continue;
    for (int r = i + 1; r < m; ++r) {
      if (!row_active[r]) continue;
      bool same = true;
      for (int j = 0; j < n && same; ++j) {
        if (col_active[j] && A(i, j) != A(r, j)) same = false;
      }
      if (!same) continue;
      if (std::abs(b[i] - b[r]) > 1e-10 * b_scale) {
        out.infeasible = true;
        out.reason = "presolve: duplicate rows with conflicting right-hand sides";
        return out;
      }
      row_active[r] = 0;
    }
  }

  // Assemble the reduced system.
  for (int j = 0; j < n; ++j) {
    if (col_active[j]) out.col_orig.push_back(j);
  }
  std::vector<int> rows_kept;
  for (int i = 0; i < m; ++i) {
    if (row_active[i]) rows_kept.push_back(i);
  }
  const int nr = static_cast<int>(out.col_orig.size());
  RMat Ar(static_cast<int>(rows_kept.size()), nr);
  RVec br(static_cast<int>(rows_kept.size()));
  for (size_t i = 0; i < rows_kept.size(); ++i) {
    for (int j = 0; j < nr; ++j) Ar(static_cast<int>(i), j) = A(rows_kept[i], out.col_orig[j]);
    br[static_cast<int>(i)] = b[rows_kept[i]];
  }

  // Rank reduction: drop linearly dependent rows, checking consistency.
  if (Ar.rows() > 0) {
    Eigen::ColPivHouseholderQR<RMat> qr(Ar.transpose());
    const int rank = static_cast<int>(qr.rank());
    if (rank < Ar.rows()) {
      const auto perm = qr.colsPermutation().indices();
      std::vector<char> keep(Ar.rows(), 0);
      for (int i = 0; i < rank; ++i) keep[perm[i]] = 1;
      std::vector<int> kept_idx, removed_idx;
      for (int i = 0; i < Ar.rows(); ++i) (keep[i] ? kept_idx : removed_idx).push_back(i);
      RMat Ak(static_cast<int>(kept_idx.size()), nr);
      RVec bk(static_cast<int>(kept_idx.size()));
      for (size_t i = 0; i < kept_idx.size(); ++i) {
        Ak.row(static_cast<int>(i)) = Ar.row(kept_idx[i]);
        bk[static_cast<int>(i)] = br[kept_idx[i]];
      }
      Eigen::ColPivHouseholderQR<RMat> qrk(Ak.transpose());
      for (int idx : removed_idx) {
        const RVec coef = qrk.solve(Ar.row(idx).transpose());
        if (std::abs(br[idx] - coef.dot(bk)) > 1e-8 * b_scale) {
          out.infeasible = true;
          out.reason = "presolve: linearly dependent rows with inconsistent right-hand sides";
          return out;
        }
      }
      std::vector<int> rows_kept2;
      for (int i : kept_idx) rows_kept2.push_back(rows_kept[i]);
      rows_kept.swap(rows_kept2);
      Ar = std::move(Ak);
      br = std::move(bk);
    }
  }

  // Row equilibration to unit infinity norm.
  out.row_scale.assign(rows_kept.size(), 1.0);
  for (int i = 0; i < Ar.rows(); ++i) {
    const double d = std::max(Ar.row(i).cwiseAbs().maxCoeff(), 1e-12);
    Ar.row(i) /= d;
    br[i] /= d;
    out.row_scale[i] = d;
  }

  out.A = std::move(Ar);
  out.b = std::move(br);
  out.row_orig = std::move(rows_kept);
  out.c.resize(nr);
  for (int j = 0; j < nr; ++j) out.c[j] = p.objective[out.col_orig[j]];

  // Reduced cone list: orthant blocks shrink by their eliminated columns.
  {
    std::vector<int> survivors(p.cones.size(), 0);
    for (int j : out.col_orig) ++survivors[block_of[j]];
    for (size_t k = 0; k < p.cones.size(); ++k) {
      if (survivors[k] == 0) continue;
      if (p.cones[k].kind == ConeKind::SecondOrder && survivors[k] != p.cones[k].dim) {
        throw Error("presolve: second-order block lost coordinates");
      }
      out.cones.push_back({p.cones[k].kind, survivors[k]});
    }
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Solver: homogeneous self-dual embedding, Nesterov-Todd scaled Mehrotra
// predictor-corrector.
// ---------------------------------------------------------------------------

namespace detail {

struct Kkt {
  const cones::Layout* layout;
  const RMat* A;
  Eigen::LLT<RMat> chol;
  const cones::Scaling* sc;
  double reg = 0.0;

  bool factor(const cones::Scaling& scaling, const RMat& a, double base_reg) {
    layout = scaling.layout;
    A = &a;
    sc = &scaling;
    const int m = static_cast<int>(a.rows());
    RMat w2at(a.cols(), m);
    for (int i = 0; i < m; ++i) {
      w2at.col(i) = cones::apply_W2(scaling, a.row(i).transpose());
    }
    RMat M = a * w2at;
    double r = base_reg * std::max(1.0, M.trace() / std::max(1, m));
    for (int attempt = 0; attempt < 4; ++attempt) {
      RMat Mr = M + r * RMat::Identity(m, m);
      chol.compute(Mr);
      if (chol.info() == Eigen::Success) {
        reg = r;
        return true;
      }
      r = (r == 0.0 ? 1e-12 : r * 100.0);
    }
    return false;
  }

  // Solves [W^-2  -A^T; A  0] [u; v] = [r1; r2], one refinement round.
  void solve2(const RVec& r1, const RVec& r2, RVec& u, RVec& v) const {
    v = chol.solve(r2 - (*A) * cones::apply_W2(*sc, r1));
    u = cones::apply_W2(*sc, r1 + A->transpose() * v);
    const RVec res1 =
        r1 - (cones::apply_Winv(*sc, cones::apply_Winv(*sc, u)) - A->transpose() * v);
    const RVec res2 = r2 - (*A) * u;
    RVec dv = chol.solve(res2 - (*A) * cones::apply_W2(*sc, res1));
    RVec du = cones::apply_W2(*sc, res1 + A->transpose() * dv);
    u += du;
    v += dv;
  }
};

}  // namespace detail

/// Solves the cone program with an interior-point method. Optimality and
/// infeasibility are decided on the original (pre-presolve) problem data.
inline SolveResult solve(const ConicProgram& prog, const SolverConfig& cfg = {}) {
  prog.validate();
  SolveResult out;

  detail::Presolved ps = detail::presolve(prog);
  if (ps.infeasible) {
    out.status = SolveStatus::PrimalInfeasible;
    out.message = ps.reason;
    out.primal = RVec::Zero(prog.num_vars());
    out.dual = RVec::Zero(prog.num_eqs());
    out.slack = RVec::Zero(prog.num_vars());
    return out;
  }

  const int n = static_cast<int>(ps.c.size());
  const int m = static_cast<int>(ps.b.size());
  const auto layout = cones::Layout::make(ps.cones);

  // Maps a reduced iterate (divided by tau) back to original coordinates and
  // recovers duals for eliminated rows.
  const auto map_back = [&](const RVec& xr, const RVec& yr, const RVec& sr, RVec& x_full,
                            RVec& y_full, RVec& s_full) {
    x_full = RVec::Zero(prog.num_vars());
    for (int j = 0; j < n; ++j) x_full[ps.col_orig[j]] = xr[j];
    for (const auto& f : ps.fixed) x_full[f.col] = f.value;
    y_full = RVec::Zero(prog.num_eqs());
    for (int i = 0; i < m; ++i) y_full[ps.row_orig[i]] = yr[i] / ps.row_scale[i];
    for (auto it = ps.fixed.rbegin(); it != ps.fixed.rend(); ++it) {
      const double aty = prog.eq_matrix.col(it->col).dot(y_full);
      y_full[it->row] = (prog.objective[it->col] - aty) / it->coeff;
    }
    s_full = prog.objective - prog.eq_matrix.transpose() * y_full;
    if (sr.size() == n) {
      for (int j = 0; j < n; ++j) s_full[ps.col_orig[j]] = sr[j];
    }
  };

  if (n == 0) {
    out.status = SolveStatus::Optimal;
    RVec xr(0), yr(0), sr(0);
    map_back(xr, yr, sr, out.primal, out.dual, out.slack);
    out.objective = prog.objective.dot(out.primal);
    const auto r = residuals(prog, out.primal, out.dual);
    out.res_primal = r[0];
    out.res_dual = r[1];
    out.res_gap = r[2];
    return out;
  }

  RVec x = cones::identity(layout);
  RVec s = cones::identity(layout);
  RVec y = RVec::Zero(m);
  double tau = 1.0, kappa = 1.0;

  const double nu = layout.degree + 1.0;
  const double cnorm = std::max(1.0, prog.objective.norm());
  const double bnorm = std::max(1.0, prog.eq_rhs.norm());

  const auto fail = [&](const std::string& msg) {
    out.status = SolveStatus::NumericalError;
    out.message = msg;
    RVec xr = x / std::max(tau, 1e-300);
    RVec yr = y / std::max(tau, 1e-300);
    RVec sr = s / std::max(tau, 1e-300);
    map_back(xr, yr, sr, out.primal, out.dual, out.slack);
    out.objective = prog.objective.dot(out.primal);
    return out;
  };

  for (int iter = 0; iter <= cfg.max_iterations; ++iter) {
    // --- Termination checks in original coordinates -----------------------
    RVec x_full, y_full, s_full;
    {
      const RVec xr = x / tau, yr = y / tau, sr = s / tau;
      map_back(xr, yr, sr, x_full, y_full, s_full);
    }
    const double pres =
        (prog.eq_matrix * x_full - prog.eq_rhs).norm() / (1.0 + prog.eq_rhs.norm());
    const double dres =
        (prog.eq_matrix.transpose() * y_full + s_full - prog.objective).norm() /
        (1.0 + prog.objective.norm());
    const double pobj = prog.objective.dot(x_full);
    const double dobj = prog.eq_rhs.dot(y_full);
    const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double mu = (x.dot(s) + tau * kappa) / nu;

    if (cfg.record_trace) {
      out.trace.push_back({pobj, dobj, pres, dres, gap, mu});
    }
    out.iterations = iter;

    if (pres <= cfg.tol_feas && dres <= cfg.tol_feas && gap <= cfg.tol_gap) {
      out.status = SolveStatus::Optimal;
      out.primal = std::move(x_full);
      out.dual = std::move(y_full);
      out.slack = std::move(s_full);
      out.objective = pobj;
      out.res_primal = pres;
      out.res_dual = dres;
      out.res_gap = gap;
      return out;
    }

    // Homogeneous-embedding infeasibility certificates.
    if (iter > 0) {
      const double by = ps.b.dot(y);
      if (by > 0.0) {
        const RVec yc = y / by;
        const RVec sc2 = s / by;
        const double meas =
            (ps.A.transpose() * yc + sc2).norm() / (1.0 + yc.norm()) / cnorm;
        if (meas <= cfg.infeas_tol) {
          out.status = SolveStatus::PrimalInfeasible;
          out.message = "primal infeasibility certificate found";
          RVec xr = RVec::Zero(n);
          map_back(xr, yc, sc2, out.primal, out.dual, out.slack);
          out.primal.setZero();
          return out;
        }
      }
      const double cx = ps.c.dot(x);
      if (cx < 0.0) {
        const RVec xc = x / (-cx);
        const double meas = (ps.A * xc).norm() / (1.0 + xc.norm()) / bnorm;
        if (meas <= cfg.infeas_tol) {
          out.status = SolveStatus::DualInfeasible;
          out.message = "dual infeasibility certificate found (objective unbounded)";
          RVec yzero = RVec::Zero(m), szero = RVec::Zero(n);
          map_back(xc, yzero, szero, out.primal, out.dual, out.slack);
          for (const auto& f : ps.fixed) out.primal[f.col] = 0.0;  // ray, not a point
          out.dual.setZero();
          out.slack.setZero();
          return out;
        }
      }
    }

    if (iter == cfg.max_iterations) break;

    // --- Search direction --------------------------------------------------
    const auto scaling = cones::compute_scaling(layout, x, s);
    if (!scaling.ok) return fail("iterate left the cone interior");

    detail::Kkt kkt;
    if (!kkt.factor(scaling, ps.A, cfg.static_reg)) {
      return fail("scaling-point linear system singular beyond regularization");
    }

    RVec qx(n), qy(m);
    kkt.solve2(-ps.c, ps.b, qx, qy);

    const RVec Rd = -ps.A.transpose() * y + ps.c * tau - s;
    const RVec Rp = ps.A * x - ps.b * tau;
    const double Rg = ps.c.dot(x) - ps.b.dot(y) + kappa;

    const auto direction = [&](const RVec& rx, const RVec& rp, double rg,
                               const RVec& dcone, double dtk, RVec& dx, RVec& dy,
                               RVec& dsv, double& dtau, double& dkappa) -> bool {
      const RVec dtil = cones::lambda_div(layout, scaling.lambda, dcone);
      const RVec fx = rx + cones::apply_Winv(scaling, dtil);
      const double fg = rg - dtk / tau;
      RVec px(n), py(m);
      kkt.solve2(fx, rp, px, py);
      const double denom = ps.c.dot(qx) - ps.b.dot(qy) - kappa / tau;
      if (!std::isfinite(denom) || std::abs(denom) < 1e-300) return false;
      dtau = (fg - ps.c.dot(px) + ps.b.dot(py)) / denom;
      dx = px + dtau * qx;
      dy = py + dtau * qy;
      dsv = cones::apply_Winv(scaling,
                              dtil - cones::apply_Winv(scaling, dx));
      dkappa = (dtk - kappa * dtau) / tau;
      return std::isfinite(dtau) && dx.allFinite() && dy.allFinite() && dsv.allFinite();
    };

    const auto max_step = [&](const RVec& dx, const RVec& dsv, double dtau,
                              double dkappa) {
      double a = std::min(cones::step_to_boundary(layout, x, dx),
                          cones::step_to_boundary(layout, s, dsv));
      if (dtau < 0.0) a = std::min(a, -tau / dtau);
      if (dkappa < 0.0) a = std::min(a, -kappa / dkappa);
      return a;
    };

    // Predictor.
    RVec dx_a(n), dy_a(m), ds_a(n);
    double dtau_a = 0.0, dkap_a = 0.0;
    const RVec lam2 = cones::prod(layout, scaling.lambda, scaling.lambda);
    if (!direction(-Rd, -Rp, -Rg, -lam2, -tau * kappa, dx_a, dy_a, ds_a, dtau_a,
                   dkap_a)) {
      return fail("affine direction solve failed");
    }
    const double alpha_aff = std::min(1.0, max_step(dx_a, ds_a, dtau_a, dkap_a));
    const double mu_aff =
        ((x + alpha_aff * dx_a).dot(s + alpha_aff * ds_a) +
         (tau + alpha_aff * dtau_a) * (kappa + alpha_aff * dkap_a)) /
        nu;
    double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
    sigma = std::min(1.0, std::max(0.0, sigma));

    // Corrector.
    const RVec corr = cones::prod(layout, cones::apply_Winv(scaling, dx_a),
                                  cones::apply_W(scaling, ds_a));
    RVec dcone = -lam2 - corr + sigma * mu * cones::identity(layout);
    const double dtk = -tau * kappa - dtau_a * dkap_a + sigma * mu;
    RVec dx(n), dy(m), dsv(n);
    double dtau = 0.0, dkap = 0.0;
    const double lin = 1.0 - sigma;
    if (!direction(-lin * Rd, -lin * Rp, -lin * Rg, dcone, dtk, dx, dy, dsv, dtau,
                   dkap)) {
      return fail("corrector direction solve failed");
    }

    double alpha = cfg.step_fraction * max_step(dx, dsv, dtau, dkap);
    alpha = std::min(alpha, 1.0);
    if (!(alpha > 1e-13)) return fail("step length collapsed");

    x += alpha * dx;
    y += alpha * dy;
    s += alpha * dsv;
    tau += alpha * dtau;
    kappa += alpha * dkap;
    if (!(tau > 0.0) || !(kappa >= 0.0) || !x.allFinite() || !s.allFinite()) {
      return fail("iterate became invalid");
    }
  }

  out.status = SolveStatus::MaxIterations;
  out.message = "iteration budget exhausted";
  RVec xr = x / tau, yr = y / tau, sr = s / tau;
  map_back(xr, yr, sr, out.primal, out.dual, out.slack);
  out.objective = prog.objective.dot(out.primal);
  const auto r = residuals(prog, out.primal, out.dual);
  out.res_primal = r[0];
  out.res_dual = r[1];
  out.res_gap = r[2];
  return out;
}

// ---------------------------------------------------------------------------
// Incremental program construction
// ---------------------------------------------------------------------------

/// Assembles standard-form programs block by block. Free vectors are encoded
/// exactly with a second-order cover block: a fresh head variable bounds the
/// norm of the tail and carries no cost, so the tail coordinates are
/// effectively unconstrained while every variable stays inside a cone.
class ProgramBuilder {
 public:
  Slice add_nonneg(const std::string& name, int k) {
    const Slice sl{nvar_, k};
    cones_.push_back({ConeKind::NonNeg, k});
    nvar_ += k;
    name_slice(name, sl);
    return sl;
  }

  /// Second-order block of dimension dim; returns the slice of the whole
  /// block (head first).
  Slice add_soc(const std::string& name, int dim) {
    if (dim < 2) throw Error("ProgramBuilder: second-order block needs dim >= 2");
    const Slice sl{nvar_, dim};
    cones_.push_back({ConeKind::SecondOrder, dim});
    nvar_ += dim;
    name_slice(name, sl);
    return sl;
  }

  /// k unconstrained coordinates behind a norm cover; returns the slice of
  /// the k usable coordinates. The head is exposed as "<name>.bound" and
  /// upper-bounds the Euclidean norm of the slice.
  Slice add_free(const std::string& name, int k) {
    cones_.push_back({ConeKind::SecondOrder, k + 1});
    const Slice head{nvar_, 1};
    const Slice sl{nvar_ + 1, k};
    nvar_ += k + 1;
    name_slice(name + ".bound", head);
    name_slice(name, sl);
    return sl;
  }

  void objective(int index, double coeff) { obj_.emplace_back(index, coeff); }

  /// Adds sum_i coeff_i x_{idx_i} = rhs; returns the row index.
  int add_equality(std::vector<std::pair<int, double>> terms, double rhs) {
    rows_.push_back({std::move(terms), rhs});
    return static_cast<int>(rows_.size()) - 1;
  }

  ConicProgram build() const {
    ConicProgram p;
    p.objective = RVec::Zero(nvar_);
    for (const auto& [idx, v] : obj_) p.objective[idx] += v;
    p.eq_matrix = RMat::Zero(static_cast<int>(rows_.size()), nvar_);
    p.eq_rhs = RVec::Zero(static_cast<int>(rows_.size()));
    for (size_t i = 0; i < rows_.size(); ++i) {
      for (const auto& [idx, v] : rows_[i].terms) {
        p.eq_matrix(static_cast<int>(i), idx) += v;
      }
      p.eq_rhs[static_cast<int>(i)] = rows_[i].rhs;
    }
    p.cones = cones_;
    p.var_map = names_;
    p.validate();
    return p;
  }

  int num_vars() const { return nvar_; }

 private:
  void name_slice(const std::string& name, Slice sl) {
    if (names_.count(name)) throw Error("ProgramBuilder: duplicate slice name " + name);
    names_[name] = sl;
  }

  struct Row {
    std::vector<std::pair<int, double>> terms;
    double rhs;
  };

  int nvar_ = 0;
  std::vector<ConeBlock> cones_;
  std::map<std::string, Slice> names_;
  std::vector<Row> rows_;
  std::vector<std::pair<int, double>> obj_;
};

}  // namespace cccp
