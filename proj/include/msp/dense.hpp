#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "msp/common.hpp"

namespace msp {

/// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix I(n, n);
    for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
    return I;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  const std::vector<double>& data() const { return a_; }
  std::vector<double>& data() { return a_; }

  DenseMatrix transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Vec col(std::size_t j) const {
    Vec v(rows_);
    for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
    return v;
  }

  Vec row(std::size_t i) const {
    Vec v(cols_);
    for (std::size_t j = 0; j < cols_; ++j) v[j] = (*this)(i, j);
    return v;
  }

  void set_col(std::size_t j, const Vec& v) {
    require(v.size() == rows_, "set_col: length mismatch");
    for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = v[i];
  }

  double norm_frobenius() const {
    double s = 0.0;
    for (double v : a_) s += v * v;
    return std::sqrt(s);
  }

  double norm_max() const {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::abs(v));
    return m;
  }

  DenseMatrix block(std::size_t i0, std::size_t j0, std::size_t nr, std::size_t nc) const {
    DenseMatrix b(nr, nc);
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t j = 0; j < nc; ++j) b(i, j) = (*this)(i0 + i, j0 + j);
    return b;
  }

  void set_block(std::size_t i0, std::size_t j0, const DenseMatrix& b) {
    for (std::size_t i = 0; i < b.rows(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) (*this)(i0 + i, j0 + j) = b(i, j);
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

inline DenseMatrix operator*(const DenseMatrix& A, const DenseMatrix& B) {
  require(A.cols() == B.rows(), "matmul: inner dimension mismatch");
  DenseMatrix C(A.rows(), B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t k = 0; k < A.cols(); ++k) {
      const double aik = A(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < B.cols(); ++j) C(i, j) += aik * B(k, j);
    }
  }
  return C;
}

inline DenseMatrix operator+(const DenseMatrix& A, const DenseMatrix& B) {
  require(A.rows() == B.rows() && A.cols() == B.cols(), "add: shape mismatch");
  DenseMatrix C = A;
  for (std::size_t i = 0; i < C.rows(); ++i)
    for (std::size_t j = 0; j < C.cols(); ++j) C(i, j) += B(i, j);
  return C;
}

inline DenseMatrix operator-(const DenseMatrix& A, const DenseMatrix& B) {
  require(A.rows() == B.rows() && A.cols() == B.cols(), "sub: shape mismatch");
  DenseMatrix C = A;
  for (std::size_t i = 0; i < C.rows(); ++i)
    for (std::size_t j = 0; j < C.cols(); ++j) C(i, j) -= B(i, j);
  return C;
}

inline DenseMatrix operator*(double s, const DenseMatrix& A) {
  DenseMatrix C = A;
  for (std::size_t i = 0; i < C.rows(); ++i)
    for (std::size_t j = 0; j < C.cols(); ++j) C(i, j) *= s;
  return C;
}

inline Vec operator*(const DenseMatrix& A, const Vec& x) {
  require(A.cols() == x.size(), "matvec: dimension mismatch");
  Vec y(A.rows(), 0.0);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < A.cols(); ++j) s += A(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

inline bool is_symmetric(const DenseMatrix& A, double tol = 0.0) {
  if (A.rows() != A.cols()) return false;
  double scale = std::max(1e-300, A.norm_max());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = i + 1; j < A.cols(); ++j)
      if (std::abs(A(i, j) - A(j, i)) > tol * scale) return false;
  return true;
}

/// LU factorization with partial pivoting. Used for the dense verification
/// paths (block inverses, oracles), where the subject matrices may be
/// symmetric indefinite or fully general.
class DenseLU {
 public:
  explicit DenseLU(DenseMatrix A) : lu_(std::move(A)), perm_(lu_.rows()) {
    require(lu_.rows() == lu_.cols(), "DenseLU: matrix must be square");
    const std::size_t n = lu_.rows();
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    double scale = std::max(lu_.norm_max(), 1e-300);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      double best = std::abs(lu_(k, k));
      for (std::size_t i = k + 1; i < n; ++i) {
        double v = std::abs(lu_(i, k));
        if (v > best) {
          best = v;
          piv = i;
        }
      }
      if (best <= 1e-14 * scale)
        throw SingularError("DenseLU: numerically singular at column " + std::to_string(k));
      if (piv != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
        std::swap(perm_[k], perm_[piv]);
      }
      const double d = lu_(k, k);
      for (std::size_t i = k + 1; i < n; ++i) {
        const double m = lu_(i, k) / d;
        lu_(i, k) = m;
        if (m == 0.0) continue;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= m * lu_(k, j);
      }
    }
  }

  Vec solve(const Vec& b) const {
    const std::size_t n = lu_.rows();
    require(b.size() == n, "DenseLU::solve: dimension mismatch");
    Vec x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
    for (std::size_t ii = n; ii-- > 0;) {
      for (std::size_t j = ii + 1; j < n; ++j) x[ii] -= lu_(ii, j) * x[j];
      x[ii] /= lu_(ii, ii);
    }
    return x;
  }

  DenseMatrix solve(const DenseMatrix& B) const {
    require(B.rows() == lu_.rows(), "DenseLU::solve: dimension mismatch");
    DenseMatrix X(B.rows(), B.cols());
    for (std::size_t j = 0; j < B.cols(); ++j) X.set_col(j, solve(B.col(j)));
    return X;
  }

  DenseMatrix inverse() const { return solve(DenseMatrix::identity(lu_.rows())); }

 private:
  DenseMatrix lu_;
  std::vector<std::size_t> perm_;
};

inline DenseMatrix dense_inverse(const DenseMatrix& A) { return DenseLU(A).inverse(); }

/// Lower-triangular Cholesky factor of a dense SPD matrix.
/// Throws IndefiniteError when a pivot is not safely positive, which doubles
/// as the SPD test used by the spectral bisection.
class DenseCholesky {
 public:
  explicit DenseCholesky(const DenseMatrix& A) : l_(A.rows(), A.cols()) {
    require(A.rows() == A.cols(), "DenseCholesky: matrix must be square");
    const std::size_t n = A.rows();
    double scale = std::max(A.norm_max(), 1e-300);
    for (std::size_t j = 0; j < n; ++j) {
      double d = A(j, j);
      for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
      if (d <= 1e-14 * scale)
        throw IndefiniteError("DenseCholesky: non-positive pivot at " + std::to_string(j));
      const double lj = std::sqrt(d);
      l_(j, j) = lj;
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = A(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
        l_(i, j) = s / lj;
      }
    }
  }

  const DenseMatrix& lower() const { return l_; }

  Vec solve(const Vec& b) const {
    const std::size_t n = l_.rows();
    require(b.size() == n, "DenseCholesky::solve: dimension mismatch");
    Vec x = b;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) x[i] -= l_(i, j) * x[j];
      x[i] /= l_(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      for (std::size_t j = ii + 1; j < n; ++j) x[ii] -= l_(j, ii) * x[j];
      x[ii] /= l_(ii, ii);
    }
    return x;
  }

  DenseMatrix solve(const DenseMatrix& B) const {
    require(B.rows() == l_.rows(), "DenseCholesky::solve: dimension mismatch");
    DenseMatrix X(B.rows(), B.cols());
    for (std::size_t j = 0; j < B.cols(); ++j) X.set_col(j, solve(B.col(j)));
    return X;
  }

  DenseMatrix inverse() const {
    return solve(DenseMatrix::identity(l_.rows()));
  }

  /// x := L^{-1} b (forward substitution only).
  Vec solve_lower(const Vec& b) const {
    const std::size_t n = l_.rows();
    Vec x = b;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) x[i] -= l_(i, j) * x[j];
      x[i] /= l_(i, i);
    }
    return x;
  }

  /// x := L^{-T} b (backward substitution only).
  Vec solve_lower_t(const Vec& b) const {
    const std::size_t n = l_.rows();
    Vec x = b;
    for (std::size_t ii = n; ii-- > 0;) {
      for (std::size_t j = ii + 1; j < n; ++j) x[ii] -= l_(j, ii) * x[j];
      x[ii] /= l_(ii, ii);
    }
    return x;
  }

 private:
  DenseMatrix l_;
};

/// True iff the symmetric matrix admits a Cholesky factorization.
inline bool is_positive_definite(const DenseMatrix& A) {
  try {
    DenseCholesky chol(A);
    (void)chol;
    return true;
  } catch (const IndefiniteError&) {
    return false;
  }
}

}  // namespace msp
