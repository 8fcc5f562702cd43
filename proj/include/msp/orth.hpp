#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "msp/dense.hpp"

namespace msp {

/// Householder QR with column pivoting. A(:, perm) = Q * R with Q square
/// orthogonal and R upper trapezoidal whose diagonal decays in magnitude.
class PivotedQR {
 public:
  explicit PivotedQR(const DenseMatrix& A) : r_(A), perm_(A.cols()) {
    const std::size_t m = A.rows(), n = A.cols();
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    q_ = DenseMatrix::identity(m);
    const std::size_t steps = std::min(m, n);

    for (std::size_t k = 0; k < steps; ++k) {
      // Pivot on the column with the largest remaining norm; norms are
      // recomputed rather than downdated, the matrices here are small.
      std::size_t piv = k;
      double best = -1.0;
      for (std::size_t j = k; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i) s += r_(i, j) * r_(i, j);
        if (s > best) {
          best = s;
          piv = j;
        }
      }
      if (piv != k) {
        for (std::size_t i = 0; i < m; ++i) std::swap(r_(i, k), r_(i, piv));
        std::swap(perm_[k], perm_[piv]);
      }
      if (best <= 0.0) break;

      double alpha = std::sqrt(best);
      if (r_(k, k) > 0.0) alpha = -alpha;
      Vec v(m - k, 0.0);
      for (std::size_t i = k; i < m; ++i) v[i - k] = r_(i, k);
      v[0] -= alpha;
      double vnorm2 = 0.0;
      for (double t : v) vnorm2 += t * t;
      if (vnorm2 == 0.0) continue;

      // Apply I - 2 v v^T / (v^T v) from the left to R and accumulate in Q.
      for (std::size_t j = k; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i) s += v[i - k] * r_(i, j);
        s = 2.0 * s / vnorm2;
        for (std::size_t i = k; i < m; ++i) r_(i, j) -= s * v[i - k];
      }
      for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i) s += v[i - k] * q_(i, j);
        s = 2.0 * s / vnorm2;
        for (std::size_t i = k; i < m; ++i) q_(i, j) -= s * v[i - k];
      }
      r_(k, k) = alpha;
      for (std::size_t i = k + 1; i < m; ++i) r_(i, k) = 0.0;
    }
    q_ = q_.transposed();
  }

  const DenseMatrix& Q() const { return q_; }
  const DenseMatrix& R() const { return r_; }
  const std::vector<std::size_t>& perm() const { return perm_; }

  std::size_t rank(double rel_tol) const {
    const std::size_t steps = std::min(r_.rows(), r_.cols());
    if (steps == 0) return 0;
    const double scale = std::abs(r_(0, 0));
    if (scale == 0.0) return 0;
    std::size_t r = 0;
    while (r < steps && std::abs(r_(r, r)) > rel_tol * scale) ++r;
    return r;
  }

 private:
  DenseMatrix r_;
  DenseMatrix q_;
  std::vector<std::size_t> perm_;
};

/// Complete orthogonal decomposition A = Q [L 0; 0 0] Z^T built from two
/// pivoted QR passes. Provides the numerical rank, orthonormal bases of the
/// kernel and cokernel, and the Moore-Penrose pseudoinverse.
class CompleteOrthogonalDecomposition {
 public:
  explicit CompleteOrthogonalDecomposition(const DenseMatrix& A,
                                           double rel_tol = 1e-10)
      : m_(A.rows()), n_(A.cols()) {
    PivotedQR qr1(A);
    rank_ = qr1.rank(rel_tol);
    const auto& p1 = qr1.perm();

    if (rank_ == 0) {
      q_ = qr1.Q();
      z_ = DenseMatrix::identity(n_);
      return;
    }

    // Second factorization orthogonalizes the trapezoidal part from the
    // right: R1^T P2 = Q2 [U; 0] gives A = Q~ [U^T 0; 0 0] (P1 Q2)^T,
    // where Q~ is Q1 with its leading rank columns permuted by P2.
    DenseMatrix R1t(n_, rank_);
    for (std::size_t i = 0; i < rank_; ++i)
      for (std::size_t j = 0; j < n_; ++j) R1t(j, i) = qr1.R()(i, j);
    PivotedQR qr2(R1t);
    const auto& p2 = qr2.perm();

    l_ = DenseMatrix(rank_, rank_);
    for (std::size_t i = 0; i < rank_; ++i)
      for (std::size_t j = 0; j <= i; ++j) l_(i, j) = qr2.R()(j, i);

    q_ = DenseMatrix(m_, m_);
    for (std::size_t j = 0; j < m_; ++j) {
      const std::size_t src = (j < rank_) ? p2[j] : j;
      for (std::size_t i = 0; i < m_; ++i) q_(i, j) = qr1.Q()(i, src);
    }

    z_ = DenseMatrix(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) z_(p1[i], j) = qr2.Q()(i, j);
  }

  std::size_t rank() const { return rank_; }
  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }

  /// Orthonormal columns spanning {x : A x = 0}; n x (n - rank).
  DenseMatrix kernel() const {
    DenseMatrix K(n_, n_ - rank_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = rank_; j < n_; ++j) K(i, j - rank_) = z_(i, j);
    return K;
  }

  /// Orthonormal columns spanning {y : A^T y = 0}; m x (m - rank).
  DenseMatrix cokernel() const {
    DenseMatrix K(m_, m_ - rank_);
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = rank_; j < m_; ++j) K(i, j - rank_) = q_(i, j);
    return K;
  }

  /// Minimum-norm least-squares solution x = A^+ b.
  Vec solve_min_norm(const Vec& b) const {
    require(b.size() == m_, "solve_min_norm: dimension mismatch");
    Vec c(rank_, 0.0);
    for (std::size_t j = 0; j < rank_; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m_; ++i) s += q_(i, j) * b[i];
      c[j] = s;
    }
    // Forward substitution with the lower-triangular core.
    for (std::size_t i = 0; i < rank_; ++i) {
      for (std::size_t j = 0; j < i; ++j) c[i] -= l_(i, j) * c[j];
      c[i] /= l_(i, i);
    }
    Vec x(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < rank_; ++j) s += z_(i, j) * c[j];
      x[i] = s;
    }
    return x;
  }

  DenseMatrix pseudo_inverse() const {
    DenseMatrix X(n_, m_);
    Vec e(m_, 0.0);
    for (std::size_t j = 0; j < m_; ++j) {
      e[j] = 1.0;
      X.set_col(j, solve_min_norm(e));
      e[j] = 0.0;
    }
    return X;
  }

 private:
  std::size_t m_, n_, rank_ = 0;
  DenseMatrix q_;  // m x m
  DenseMatrix z_;  // n x n
  DenseMatrix l_;  // rank x rank, lower triangular
};

inline DenseMatrix pseudo_inverse(const DenseMatrix& A, double rel_tol = 1e-10) {
  return CompleteOrthogonalDecomposition(A, rel_tol).pseudo_inverse();
}

inline DenseMatrix moore_penrose(const DenseMatrix& A, double rel_tol = 1e-10) {
  return pseudo_inverse(A, rel_tol);
}

inline std::size_t numerical_rank(const DenseMatrix& A, double rel_tol = 1e-10) {
  return PivotedQR(A).rank(rel_tol);
}

/// Orthonormal bases of both null spaces. right_basis has orthonormal
/// columns with A*right_basis ~ 0; left_basis has orthonormal rows with
/// left_basis*A ~ 0.
struct NullBasisPair {
  DenseMatrix right_basis;
  DenseMatrix left_basis;
  std::size_t numerical_rank = 0;
  double tolerance = 0.0;
};

inline NullBasisPair null_basis(const DenseMatrix& A, double rel_tol = 1e-10) {
  CompleteOrthogonalDecomposition cod(A, rel_tol);
  NullBasisPair out;
  out.numerical_rank = cod.rank();
  out.tolerance = rel_tol;
  out.right_basis = cod.kernel();
  out.left_basis = cod.cokernel().transposed();
  return out;
}

}  // namespace msp
