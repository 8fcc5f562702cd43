#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "msp/sparse.hpp"

namespace msp {

enum class FactorKind { spd, symmetric_indefinite };

/// Sparse LDL^T factorization in natural order, up-looking with an
/// elimination tree. For the spd kind every pivot must be positive, which
/// makes factorization double as a definiteness test.
class Factorization {
 public:
  Factorization(const SparseMatrix& A, FactorKind kind)
      : kind_(kind), n_(A.n_rows) {
    require(A.n_rows == A.n_cols, "Factorization: matrix must be square");
    require(sparse_is_symmetric(A, 1e-12), "Factorization: matrix must be symmetric");

    double scale = sparse_norm_max(A);
    if (scale == 0.0) scale = 1.0;
    const double tiny = 1e-14 * scale;

    // Symbolic phase: elimination tree and column counts from the pattern
    // of the strict upper triangle (read as rows of the symmetric matrix).
    std::vector<std::ptrdiff_t> parent(n_, -1);
    std::vector<std::size_t> flag(n_, SIZE_MAX);
    std::vector<std::size_t> lnz(n_, 0);
    for (std::size_t j = 0; j < n_; ++j) {
      flag[j] = j;
      for (std::size_t p = A.row_offsets[j]; p < A.row_offsets[j + 1]; ++p) {
        std::size_t k = A.col_indices[p];
        if (k >= j) break;
        for (; flag[k] != j; k = static_cast<std::size_t>(parent[k])) {
          if (parent[k] == -1) parent[k] = static_cast<std::ptrdiff_t>(j);
          ++lnz[k];
          flag[k] = j;
        }
      }
    }

    lp_.assign(n_ + 1, 0);
    for (std::size_t j = 0; j < n_; ++j) lp_[j + 1] = lp_[j] + lnz[j];
    li_.assign(lp_[n_], 0);
    lx_.assign(lp_[n_], 0.0);
    d_.assign(n_, 0.0);

    // Numeric phase.
    std::vector<double> y(n_, 0.0);
    std::vector<std::size_t> pattern(n_), stack(n_), lfill(n_, 0);
    std::fill(flag.begin(), flag.end(), SIZE_MAX);
    for (std::size_t j = 0; j < n_; ++j) {
      std::size_t top = n_;
      flag[j] = j;
      for (std::size_t p = A.row_offsets[j]; p < A.row_offsets[j + 1]; ++p) {
        std::size_t k = A.col_indices[p];
        if (k > j) break;
        y[k] += A.values[p];
        std::size_t len = 0;
        for (; flag[k] != j; k = static_cast<std::size_t>(parent[k])) {
          pattern[len++] = k;
          flag[k] = j;
        }
        while (len > 0) stack[--top] = pattern[--len];
      }
      double dj = y[j];
      y[j] = 0.0;
      for (std::size_t s = top; s < n_; ++s) {
        const std::size_t k = stack[s];
        const double yk = y[k];
        y[k] = 0.0;
        const std::size_t pend = lp_[k] + lfill[k];
        for (std::size_t p = lp_[k]; p < pend; ++p) y[li_[p]] -= lx_[p] * yk;
        const double ljk = yk / d_[k];
        dj -= ljk * yk;
        li_[pend] = j;
        lx_[pend] = ljk;
        ++lfill[k];
      }
      if (kind_ == FactorKind::spd) {
        if (dj <= tiny)
          throw IndefiniteError("factorize: non-positive pivot at row " +
                                std::to_string(j));
      } else if (std::abs(dj) <= tiny) {
        throw SingularError("factorize: zero pivot at row " + std::to_string(j));
      }
      d_[j] = dj;
    }
  }

  FactorKind kind() const { return kind_; }
  std::size_t size() const { return n_; }

  /// Number of negative pivots; by Sylvester's law of inertia this equals
  /// the number of negative eigenvalues of the factored matrix.
  std::size_t negative_pivots() const {
    std::size_t count = 0;
    for (double dj : d_) count += dj < 0.0 ? 1 : 0;
    return count;
  }

  Vec solve(const Vec& b) const {
    require(b.size() == n_, "Factorization::solve: dimension mismatch");
    Vec x = b;
    // L is unit lower triangular, stored by columns.
    for (std::size_t j = 0; j < n_; ++j) {
      const double xj = x[j];
      if (xj == 0.0) continue;
      for (std::size_t p = lp_[j]; p < lp_[j + 1]; ++p) x[li_[p]] -= lx_[p] * xj;
    }
    for (std::size_t j = 0; j < n_; ++j) x[j] /= d_[j];
    for (std::size_t jj = n_; jj-- > 0;) {
      double s = x[jj];
      for (std::size_t p = lp_[jj]; p < lp_[jj + 1]; ++p) s -= lx_[p] * x[li_[p]];
      x[jj] = s;
    }
    return x;
  }

 private:
  FactorKind kind_;
  std::size_t n_;
  std::vector<std::size_t> lp_, li_;
  std::vector<double> lx_;
  Vec d_;
};

inline Factorization factorize(const SparseMatrix& A, FactorKind kind) {
  return Factorization(A, kind);
}

/// Zero-fill incomplete Cholesky on the lower-triangular pattern of an SPD
/// matrix. On breakdown the diagonal is shifted and the factorization
/// restarted, so construction always succeeds for symmetric input with a
/// positive diagonal.
class IncompleteCholesky {
 public:
  explicit IncompleteCholesky(const SparseMatrix& A) : n_(A.n_rows) {
    require(A.n_rows == A.n_cols, "IncompleteCholesky: matrix must be square");
    // Lower-triangular pattern, row-wise.
    lp_.assign(n_ + 1, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t p = A.row_offsets[i]; p < A.row_offsets[i + 1]; ++p)
        if (A.col_indices[p] <= i) ++lp_[i + 1];
    }
    for (std::size_t i = 0; i < n_; ++i) lp_[i + 1] += lp_[i];
    li_.assign(lp_[n_], 0);
    base_.assign(lp_[n_], 0.0);
    diag_pos_.assign(n_, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      std::size_t q = lp_[i];
      for (std::size_t p = A.row_offsets[i]; p < A.row_offsets[i + 1]; ++p) {
        const std::size_t j = A.col_indices[p];
        if (j > i) break;
        li_[q] = j;
        base_[q] = A.values[p];
        if (j == i) diag_pos_[i] = q;
        ++q;
      }
      require(q > lp_[i] && li_[q - 1] == i,
              "IncompleteCholesky: missing diagonal entry");
    }

    double scale = sparse_norm_max(A);
    if (scale == 0.0) scale = 1.0;
    double shift = 0.0;
    for (int attempt = 0; attempt < 60; ++attempt) {
      if (try_factor(shift)) {
        shift_ = shift;
        return;
      }
      shift = (shift == 0.0) ? 1e-3 * scale : 2.0 * shift;
    }
    throw IndefiniteError("IncompleteCholesky: shifted factorization failed");
  }

  double shift() const { return shift_; }

  /// Applies (L L^T)^{-1}. The diagonal entry closes each row segment.
  Vec solve(const Vec& b) const {
    Vec x = b;
    for (std::size_t i = 0; i < n_; ++i) {
      double s = x[i];
      for (std::size_t p = lp_[i]; p < diag_pos_[i]; ++p) s -= lx_[p] * x[li_[p]];
      x[i] = s / lx_[diag_pos_[i]];
    }
    for (std::size_t ii = n_; ii-- > 0;) {
      const double xi = x[ii] / lx_[diag_pos_[ii]];
      x[ii] = xi;
      for (std::size_t p = lp_[ii]; p < diag_pos_[ii]; ++p)
        x[li_[p]] -= lx_[p] * xi;
    }
    return x;
  }

 private:
  bool try_factor(double shift) {
    lx_ = base_;
    for (std::size_t i = 0; i < n_; ++i) lx_[diag_pos_[i]] += shift;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t p = lp_[i]; p < lp_[i + 1]; ++p) {
        const std::size_t j = li_[p];
        double s = lx_[p];
        // Sparse dot of rows i and j over columns < j.
        std::size_t pi = lp_[i], pj = lp_[j];
        while (pi < lp_[i + 1] && pj < lp_[j + 1] && li_[pi] < j && li_[pj] < j) {
          if (li_[pi] == li_[pj])
            s -= lx_[pi++] * lx_[pj++];
          else if (li_[pi] < li_[pj])
            ++pi;
          else
            ++pj;
        }
        if (j == i) {
          if (s <= 0.0) return false;
          lx_[p] = std::sqrt(s);
        } else {
          lx_[p] = s / lx_[diag_pos_[j]];
        }
      }
    }
    return true;
  }

  std::size_t n_;
  std::vector<std::size_t> lp_, li_, diag_pos_;
  std::vector<double> base_, lx_;
  double shift_ = 0.0;
};

struct PcgResult {
  Vec x;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Plain preconditioned conjugate gradients for SPD sparse systems; used as
/// the inexact inner solver. The preconditioner M^{-1} is passed as a
/// callable; identity when absent.
template <typename ApplyPrec>
PcgResult pcg_spd(const SparseMatrix& A, const Vec& b, ApplyPrec&& prec,
                  double rel_tol, std::size_t max_it) {
  PcgResult out;
  out.x.assign(A.n_rows, 0.0);
  Vec r = b;
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }
  Vec z = prec(r);
  Vec p = z;
  double rz = dot(r, z);
  for (std::size_t it = 0; it < max_it; ++it) {
    Vec Ap = spmv(A, p);
    const double pAp = dot(p, Ap);
    if (pAp <= 0.0) break;
    const double alpha = rz / pAp;
    axpy(alpha, p, out.x);
    axpy(-alpha, Ap, r);
    out.iterations = it + 1;
    if (norm2(r) <= rel_tol * bnorm) {
      out.converged = true;
      return out;
    }
    z = prec(r);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = z[i] + beta * p[i];
  }
  return out;
}

inline PcgResult pcg_spd(const SparseMatrix& A, const Vec& b, double rel_tol,
                         std::size_t max_it) {
  return pcg_spd(A, b, [](const Vec& r) { return r; }, rel_tol, max_it);
}

}  // namespace msp
