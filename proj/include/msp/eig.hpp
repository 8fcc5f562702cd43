#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "msp/dense.hpp"

namespace msp {

namespace detail {

// Householder reduction of a symmetric matrix to tridiagonal form with
// accumulated transformations (EISPACK tred2 lineage). On entry V holds the
// matrix; on exit V holds the orthogonal accumulation, d the diagonal and
// e the subdiagonal.
inline void tred2(DenseMatrix& V, Vec& d, Vec& e) {
  const int n = static_cast<int>(V.rows());
  for (int j = 0; j < n; ++j) d[j] = V(n - 1, j);

  for (int i = n - 1; i > 0; --i) {
    double scale = 0.0, h = 0.0;
    for (int k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (int j = 0; j < i; ++j) {
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
        V(j, i) = 0.0;
      }
    } else {
      for (int k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0.0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (int j = 0; j < i; ++j) e[j] = 0.0;

      for (int j = 0; j < i; ++j) {
        f = d[j];
        V(j, i) = f;
        g = e[j] + V(j, j) * f;
        for (int k = j + 1; k <= i - 1; ++k) {
          g += V(k, j) * d[k];
          e[k] += V(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (int j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (int j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (int j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (int k = j; k <= i - 1; ++k) V(k, j) -= f * e[k] + g * d[k];
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (int i = 0; i < n - 1; ++i) {
    V(n - 1, i) = V(i, i);
    V(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (int k = 0; k <= i; ++k) d[k] = V(k, i + 1) / h;
      for (int j = 0; j <= i; ++j) {
        double g = 0.0;
        for (int k = 0; k <= i; ++k) g += V(k, i + 1) * V(k, j);
        for (int k = 0; k <= i; ++k) V(k, j) -= g * d[k];
      }
    }
    for (int k = 0; k <= i; ++k) V(k, i + 1) = 0.0;
  }
  for (int j = 0; j < n; ++j) {
    d[j] = V(n - 1, j);
    V(n - 1, j) = 0.0;
  }
  V(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit QL with Wilkinson shifts on the tridiagonal (d, e), updating the
// eigenvector accumulation V. Sorts the spectrum ascending.
inline void tql2(DenseMatrix& V, Vec& d, Vec& e) {
  const int n = static_cast<int>(V.rows());
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0, tst1 = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  for (int l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    int m = l;
    while (m < n && std::abs(e[m]) > eps * tst1) ++m;

    if (m > l) {
      int iter = 0;
      do {
        if (++iter > 60)
          throw std::runtime_error("symmetric QL iteration failed to converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0.0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (int i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = c, c3 = c;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (int i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);

          for (int k = 0; k < n; ++k) {
            h = V(k, i + 1);
            V(k, i + 1) = s * V(k, i) + c * h;
            V(k, i) = c * V(k, i) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }

  for (int i = 0; i < n - 1; ++i) {
    int k = i;
    double p = d[i];
    for (int j = i + 1; j < n; ++j)
      if (d[j] < p) {
        k = j;
        p = d[j];
      }
    if (k != i) {
      d[k] = d[i];
      d[i] = p;
      for (int j = 0; j < n; ++j) std::swap(V(j, i), V(j, k));
    }
  }
}

}  // namespace detail

/// Eigenvalues (ascending) and matching eigenvector columns.
struct SymmetricEigen {
  Vec values;
  DenseMatrix vectors;
};

inline SymmetricEigen eigen_symmetric(const DenseMatrix& A) {
  require(A.rows() == A.cols(), "eigen_symmetric: matrix must be square");
  const std::size_t n = A.rows();
  SymmetricEigen out;
  out.values.assign(n, 0.0);
  out.vectors = A;
  if (n == 0) return out;
  Vec e(n, 0.0);
  detail::tred2(out.vectors, out.values, e);
  detail::tql2(out.vectors, out.values, e);
  return out;
}

inline Vec eigenvalues_symmetric(const DenseMatrix& A) {
  return eigen_symmetric(A).values;
}

/// Solves A x = lambda B x for symmetric A and SPD B by the Cholesky
/// reduction C = L^{-1} A L^{-T}. Returned vectors are B-orthonormal.
inline SymmetricEigen eigen_symmetric_generalized(const DenseMatrix& A,
                                                  const DenseMatrix& B) {
  require(A.rows() == A.cols() && B.rows() == B.cols() && A.rows() == B.rows(),
          "eigen_symmetric_generalized: shape mismatch");
  const std::size_t n = A.rows();
  DenseCholesky chol(B);

  DenseMatrix W(n, n);
  for (std::size_t j = 0; j < n; ++j) W.set_col(j, chol.solve_lower(A.col(j)));
  DenseMatrix C(n, n);
  // C = W L^{-T}, formed row-wise through L^{-1} W^T.
  DenseMatrix Wt = W.transposed();
  for (std::size_t j = 0; j < n; ++j) C.set_col(j, chol.solve_lower(Wt.col(j)));
  // Symmetrize to shed the round-off skew before the QL sweep.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (C(i, j) + C(j, i));
      C(i, j) = v;
      C(j, i) = v;
    }

  SymmetricEigen out = eigen_symmetric(C);
  for (std::size_t j = 0; j < n; ++j)
    out.vectors.set_col(j, chol.solve_lower_t(out.vectors.col(j)));
  return out;
}

/// Checked entry point: symmetric standard or generalized problem with an
/// SPD right-hand matrix.
inline SymmetricEigen sym_eig(const DenseMatrix& A) {
  require(is_symmetric(A, 1e-12), "sym_eig: matrix must be symmetric");
  return eigen_symmetric(A);
}

inline SymmetricEigen sym_eig(const DenseMatrix& A, const DenseMatrix& H) {
  require(is_symmetric(A, 1e-12), "sym_eig: matrix must be symmetric");
  require(is_symmetric(H, 1e-12), "sym_eig: metric must be symmetric");
  return eigen_symmetric_generalized(A, H);
}

/// Real and imaginary parts of the spectrum of a general real matrix,
/// sorted by real part then imaginary part.
struct GeneralEigenvalues {
  Vec re;
  Vec im;
};

/// Householder reduction to Hessenberg form followed by the Francis
/// double-shift QR iteration (eigenvalues only).
inline GeneralEigenvalues eigenvalues_general(DenseMatrix H) {
  require(H.rows() == H.cols(), "eigenvalues_general: matrix must be square");
  const int nn = static_cast<int>(H.rows());
  GeneralEigenvalues out;
  out.re.assign(nn, 0.0);
  out.im.assign(nn, 0.0);
  if (nn == 0) return out;

  // Balance first: a diagonal similarity with powers of two that equalizes
  // row and column norms. The spectrum is unchanged, but the QR iteration
  // loses far less accuracy on badly scaled, non-normal input.
  {
    const double radix = 2.0;
    bool done = false;
    while (!done) {
      done = true;
      for (int i = 0; i < nn; ++i) {
        double col = 0.0, row = 0.0;
        for (int j = 0; j < nn; ++j) {
          if (j == i) continue;
          col += std::abs(H(j, i));
          row += std::abs(H(i, j));
        }
        if (col == 0.0 || row == 0.0) continue;
        const double total = col + row;
        double grow = row / radix, f = 1.0;
        while (col < grow) {
          f *= radix;
          col *= radix * radix;
        }
        grow = row * radix;
        while (col > grow) {
          f /= radix;
          col /= radix * radix;
        }
        if ((col + row) / f < 0.95 * total) {
          done = false;
          const double finv = 1.0 / f;
          for (int j = 0; j < nn; ++j) H(i, j) *= finv;
          for (int j = 0; j < nn; ++j) H(j, i) *= f;
        }
      }
    }
  }

  const int low = 0, high = nn - 1;
  Vec ort(nn, 0.0);
  for (int m = low + 1; m <= high - 1; ++m) {
    double scale = 0.0;
    for (int i = m; i <= high; ++i) scale += std::abs(H(i, m - 1));
    if (scale == 0.0) continue;
    double h = 0.0;
    for (int i = high; i >= m; --i) {
      ort[i] = H(i, m - 1) / scale;
      h += ort[i] * ort[i];
    }
    double g = std::sqrt(h);
    if (ort[m] > 0.0) g = -g;
    h -= ort[m] * g;
    ort[m] -= g;

    for (int j = m; j < nn; ++j) {
      double f = 0.0;
      for (int i = high; i >= m; --i) f += ort[i] * H(i, j);
      f /= h;
      for (int i = m; i <= high; ++i) H(i, j) -= f * ort[i];
    }
    for (int i = 0; i <= high; ++i) {
      double f = 0.0;
      for (int j = high; j >= m; --j) f += ort[j] * H(i, j);
      f /= h;
      for (int j = m; j <= high; ++j) H(i, j) -= f * ort[j];
    }
    H(m, m - 1) = scale * g;
    for (int i = m + 1; i <= high; ++i) H(i, m - 1) = 0.0;
  }

  const double eps = std::numeric_limits<double>::epsilon();
  double exshift = 0.0;
  double p = 0, q = 0, r = 0, s = 0, z = 0, t, w, x, y;

  double norm = 0.0;
  for (int i = 0; i < nn; ++i)
    for (int j = std::max(i - 1, 0); j < nn; ++j) norm += std::abs(H(i, j));
  if (norm == 0.0) return out;

  int n = nn - 1;
  int iter = 0;
  while (n >= low) {
    int l = n;
    while (l > low) {
      s = std::abs(H(l - 1, l - 1)) + std::abs(H(l, l));
      if (s == 0.0) s = norm;
      if (std::abs(H(l, l - 1)) < eps * s) break;
      --l;
    }

    if (l == n) {
      H(n, n) += exshift;
      out.re[n] = H(n, n);
      out.im[n] = 0.0;
      --n;
      iter = 0;
    } else if (l == n - 1) {
      w = H(n, n - 1) * H(n - 1, n);
      p = (H(n - 1, n - 1) - H(n, n)) / 2.0;
      q = p * p + w;
      z = std::sqrt(std::abs(q));
      H(n, n) += exshift;
      H(n - 1, n - 1) += exshift;
      x = H(n, n);

      if (q >= 0.0) {
        z = (p >= 0.0) ? p + z : p - z;
        out.re[n - 1] = x + z;
        out.re[n] = out.re[n - 1];
        if (z != 0.0) out.re[n] = x - w / z;
        out.im[n - 1] = 0.0;
        out.im[n] = 0.0;
      } else {
        out.re[n - 1] = x + p;
        out.re[n] = x + p;
        out.im[n - 1] = z;
        out.im[n] = -z;
      }
      n -= 2;
      iter = 0;
    } else {
      x = H(n, n);
      y = 0.0;
      w = 0.0;
      if (l < n) {
        y = H(n - 1, n - 1);
        w = H(n, n - 1) * H(n - 1, n);
      }

      if (iter == 10) {
        exshift += x;
        for (int i = low; i <= n; ++i) H(i, i) -= x;
        s = std::abs(H(n, n - 1)) + std::abs(H(n - 1, n - 2));
        x = y = 0.75 * s;
        w = -0.4375 * s * s;
      }
      if (iter == 30) {
        s = (y - x) / 2.0;
        s = s * s + w;
        if (s > 0.0) {
          s = std::sqrt(s);
          if (y < x) s = -s;
          s = x - w / ((y - x) / 2.0 + s);
          for (int i = low; i <= n; ++i) H(i, i) -= s;
          exshift += s;
          x = y = w = 0.964;
        }
      }

      if (++iter > 120)
        throw std::runtime_error("nonsymmetric QR iteration failed to converge");

      int m = n - 2;
      while (m >= l) {
        z = H(m, m);
        r = x - z;
        s = y - z;
        p = (r * s - w) / H(m + 1, m) + H(m, m + 1);
        q = H(m + 1, m + 1) - z - r - s;
        r = H(m + 2, m + 1);
        s = std::abs(p) + std::abs(q) + std::abs(r);
        p /= s;
        q /= s;
        r /= s;
        if (m == l) break;
        if (std::abs(H(m, m - 1)) * (std::abs(q) + std::abs(r)) <
            eps * (std::abs(p) * (std::abs(H(m - 1, m - 1)) + std::abs(z) +
                                  std::abs(H(m + 1, m + 1)))))
          break;
        --m;
      }

      for (int i = m + 2; i <= n; ++i) {
        H(i, i - 2) = 0.0;
        if (i > m + 2) H(i, i - 3) = 0.0;
      }

      for (int k = m; k <= n - 1; ++k) {
        const bool notlast = (k != n - 1);
        if (k != m) {
          p = H(k, k - 1);
          q = H(k + 1, k - 1);
          r = notlast ? H(k + 2, k - 1) : 0.0;
          x = std::abs(p) + std::abs(q) + std::abs(r);
          if (x == 0.0) continue;
          p /= x;
          q /= x;
          r /= x;
        }
        s = std::sqrt(p * p + q * q + r * r);
        if (p < 0.0) s = -s;
        if (s == 0.0) continue;
        if (k != m)
          H(k, k - 1) = -s * x;
        else if (l != m)
          H(k, k - 1) = -H(k, k - 1);
        p += s;
        x = p / s;
        y = q / s;
        z = r / s;
        q /= p;
        r /= p;

        for (int j = k; j < nn; ++j) {
          t = H(k, j) + q * H(k + 1, j);
          if (notlast) {
            t += r * H(k + 2, j);
            H(k + 2, j) -= t * z;
          }
          H(k, j) -= t * x;
          H(k + 1, j) -= t * y;
        }
        for (int i = 0; i <= std::min(n, k + 3); ++i) {
          t = x * H(i, k) + y * H(i, k + 1);
          if (notlast) {
            t += z * H(i, k + 2);
            H(i, k + 2) -= t * r;
          }
          H(i, k) -= t;
          H(i, k + 1) -= t * q;
        }
      }
    }
  }

  std::vector<int> idx(nn);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (out.re[a] != out.re[b]) return out.re[a] < out.re[b];
    return out.im[a] < out.im[b];
  });
  GeneralEigenvalues sorted;
  sorted.re.reserve(nn);
  sorted.im.reserve(nn);
  for (int i : idx) {
    sorted.re.push_back(out.re[i]);
    sorted.im.push_back(out.im[i]);
  }
  return sorted;
}

}  // namespace msp
