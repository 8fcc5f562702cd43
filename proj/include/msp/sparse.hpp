#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "msp/dense.hpp"

namespace msp {

/// Compressed-row sparse matrix. Within each row the column indices are
/// strictly increasing and exact zeros are never stored.
struct SparseMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::size_t> row_offsets;  // length n_rows + 1
  std::vector<std::size_t> col_indices;
  std::vector<double> values;

  SparseMatrix() : row_offsets(1, 0) {}
  SparseMatrix(std::size_t r, std::size_t c)
      : n_rows(r), n_cols(c), row_offsets(r + 1, 0) {}

  std::size_t nnz() const { return col_indices.size(); }

  double at(std::size_t i, std::size_t j) const {
    const auto b = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i]);
    const auto e = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i + 1]);
    auto it = std::lower_bound(b, e, j);
    if (it == e || *it != j) return 0.0;
    return values[static_cast<std::size_t>(it - col_indices.begin())];
  }

  bool structurally_valid() const {
    if (row_offsets.size() != n_rows + 1) return false;
    if (row_offsets.front() != 0 || row_offsets.back() != nnz()) return false;
    if (values.size() != col_indices.size()) return false;
    for (std::size_t i = 0; i < n_rows; ++i) {
      if (row_offsets[i] > row_offsets[i + 1]) return false;
      for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p) {
        if (col_indices[p] >= n_cols) return false;
        if (p > row_offsets[i] && col_indices[p] <= col_indices[p - 1]) return false;
        if (values[p] == 0.0) return false;
      }
    }
    return true;
  }
};

/// Triplet accumulator: duplicate entries are summed, exact zeros dropped
/// at compression time.
class SparseBuilder {
 public:
  SparseBuilder(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

  void add(std::size_t i, std::size_t j, double v) {
    require(i < rows_ && j < cols_, "SparseBuilder::add: index out of range");
    trips_.emplace_back(i, j, v);
  }

  SparseMatrix compress() const {
    std::vector<std::tuple<std::size_t, std::size_t, double>> t = trips_;
    std::sort(t.begin(), t.end(), [](const auto& a, const auto& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
      return std::get<1>(a) < std::get<1>(b);
    });
    SparseMatrix A(rows_, cols_);
    std::size_t p = 0;
    const std::size_t nt = t.size();
    std::vector<std::size_t> counts(rows_, 0);
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    cols.reserve(nt);
    vals.reserve(nt);
    while (p < nt) {
      const std::size_t i = std::get<0>(t[p]);
      const std::size_t j = std::get<1>(t[p]);
      double s = 0.0;
      while (p < nt && std::get<0>(t[p]) == i && std::get<1>(t[p]) == j)
        s += std::get<2>(t[p++]);
      if (s != 0.0) {
        cols.push_back(j);
        vals.push_back(s);
        ++counts[i];
      }
    }
    A.col_indices = std::move(cols);
    A.values = std::move(vals);
    for (std::size_t i = 0; i < rows_; ++i)
      A.row_offsets[i + 1] = A.row_offsets[i] + counts[i];
    return A;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<std::tuple<std::size_t, std::size_t, double>> trips_;
};

inline Vec spmv(const SparseMatrix& A, const Vec& x) {
  require(x.size() == A.n_cols, "spmv: dimension mismatch");
  Vec y(A.n_rows, 0.0);
  for (std::size_t i = 0; i < A.n_rows; ++i) {
    double s = 0.0;
    for (std::size_t p = A.row_offsets[i]; p < A.row_offsets[i + 1]; ++p)
      s += A.values[p] * x[A.col_indices[p]];
    y[i] = s;
  }
  return y;
}

/// y = A^T x without materializing the transpose.
inline Vec spmv_transposed(const SparseMatrix& A, const Vec& x) {
  require(x.size() == A.n_rows, "spmv_transposed: dimension mismatch");
  Vec y(A.n_cols, 0.0);
  for (std::size_t i = 0; i < A.n_rows; ++i)
    for (std::size_t p = A.row_offsets[i]; p < A.row_offsets[i + 1]; ++p)
      y[A.col_indices[p]] += A.values[p] * x[i];
  return y;
}

inline SparseMatrix sparse_transpose(const SparseMatrix& A) {
  SparseMatrix T(A.n_cols, A.n_rows);
  std::vector<std::size_t> counts(A.n_cols, 0);
  for (std::size_t j : A.col_indices) ++counts[j];
  for (std::size_t j = 0; j < A.n_cols; ++j)
    T.row_offsets[j + 1] = T.row_offsets[j] + counts[j];
  T.col_indices.assign(A.nnz(), 0);
  T.values.assign(A.nnz(), 0.0);
  std::vector<std::size_t> next(T.row_offsets.begin(), T.row_offsets.end() - 1);
  for (std::size_t i = 0; i < A.n_rows; ++i)
    for (std::size_t p = A.row_offsets[i]; p < A.row_offsets[i + 1]; ++p) {
      const std::size_t q = next[A.col_indices[p]]++;
      T.col_indices[q] = i;
      T.values[q] = A.values[p];
    }
  return T;
}

/// Row-by-row sparse product with a dense scatter workspace.
inline SparseMatrix sparse_product(const SparseMatrix& A, const SparseMatrix& B) {
  require(A.n_cols == B.n_rows, "sparse_product: inner dimension mismatch");
  SparseMatrix C(A.n_rows, B.n_cols);
  std::vector<double> acc(B.n_cols, 0.0);
  std::vector<std::size_t> marker(B.n_cols, SIZE_MAX);
  std::vector<std::size_t> touched;
  for (std::size_t i = 0; i < A.n_rows; ++i) {
    touched.clear();
    for (std::size_t p = A.row_offsets[i]; p < A.row_offsets[i + 1]; ++p) {
      const std::size_t k = A.col_indices[p];
      const double aik = A.values[p];
      for (std::size_t q = B.row_offsets[k]; q < B.row_offsets[k + 1]; ++q) {
        const std::size_t j = B.col_indices[q];
        if (marker[j] != i) {
          marker[j] = i;
          acc[j] = 0.0;
          touched.push_back(j);
        }
        acc[j] += aik * B.values[q];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::size_t j : touched)
      if (acc[j] != 0.0) {
        C.col_indices.push_back(j);
        C.values.push_back(acc[j]);
      }
    C.row_offsets[i + 1] = C.col_indices.size();
  }
  return C;
}

/// alpha*A + beta*B by merging sorted rows.
inline SparseMatrix sparse_add(double alpha, const SparseMatrix& A, double beta,
                               const SparseMatrix& B) {
  require(A.n_rows == B.n_rows && A.n_cols == B.n_cols, "sparse_add: shape mismatch");
  SparseMatrix C(A.n_rows, A.n_cols);
  for (std::size_t i = 0; i < A.n_rows; ++i) {
    std::size_t pa = A.row_offsets[i], ea = A.row_offsets[i + 1];
    std::size_t pb = B.row_offsets[i], eb = B.row_offsets[i + 1];
    while (pa < ea || pb < eb) {
      std::size_t j;
      double v;
      if (pb >= eb || (pa < ea && A.col_indices[pa] < B.col_indices[pb])) {
        j = A.col_indices[pa];
        v = alpha * A.values[pa++];
      } else if (pa >= ea || B.col_indices[pb] < A.col_indices[pa]) {
        j = B.col_indices[pb];
        v = beta * B.values[pb++];
      } else {
        j = A.col_indices[pa];
        v = alpha * A.values[pa++] + beta * B.values[pb++];
      }
      if (v != 0.0) {
        C.col_indices.push_back(j);
        C.values.push_back(v);
      }
    }
    C.row_offsets[i + 1] = C.col_indices.size();
  }
  return C;
}

inline SparseMatrix sparse_scale(double alpha, const SparseMatrix& A) {
  if (alpha == 0.0) return SparseMatrix(A.n_rows, A.n_cols);
  SparseMatrix C = A;
  for (double& v : C.values) v *= alpha;
  return C;
}

inline SparseMatrix sparse_identity(std::size_t n) {
  SparseMatrix I(n, n);
  I.col_indices.resize(n);
  I.values.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    I.col_indices[i] = i;
    I.row_offsets[i + 1] = i + 1;
  }
  return I;
}

inline SparseMatrix sparse_diag(const Vec& d) {
  SparseMatrix D(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] != 0.0) {
      D.col_indices.push_back(i);
      D.values.push_back(d[i]);
    }
    D.row_offsets[i + 1] = D.col_indices.size();
  }
  return D;
}

inline DenseMatrix to_dense(const SparseMatrix& A) {
  DenseMatrix D(A.n_rows, A.n_cols);
  for (std::size_t i = 0; i < A.n_rows; ++i)
    for (std::size_t p = A.row_offsets[i]; p < A.row_offsets[i + 1]; ++p)
      D(i, A.col_indices[p]) = A.values[p];
  return D;
}

inline SparseMatrix from_dense(const DenseMatrix& D) {
  SparseMatrix A(D.rows(), D.cols());
  for (std::size_t i = 0; i < D.rows(); ++i) {
    for (std::size_t j = 0; j < D.cols(); ++j)
      if (D(i, j) != 0.0) {
        A.col_indices.push_back(j);
        A.values.push_back(D(i, j));
      }
    A.row_offsets[i + 1] = A.col_indices.size();
  }
  return A;
}

inline bool sparse_is_symmetric(const SparseMatrix& A, double tol = 0.0) {
  if (A.n_rows != A.n_cols) return false;
  double scale = 0.0;
  for (double v : A.values) scale = std::max(scale, std::abs(v));
  scale = std::max(scale, 1e-300);
  for (std::size_t i = 0; i < A.n_rows; ++i)
    for (std::size_t p = A.row_offsets[i]; p < A.row_offsets[i + 1]; ++p)
      if (std::abs(A.values[p] - A.at(A.col_indices[p], i)) > tol * scale)
        return false;
  return true;
}

inline double sparse_norm_max(const SparseMatrix& A) {
  double m = 0.0;
  for (double v : A.values) m = std::max(m, std::abs(v));
  return m;
}

/// Writes coordinate-format MatrixMarket, 1-based, general symmetry.
inline void write_matrix_market(const SparseMatrix& A, std::ostream& os) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << A.n_rows << " " << A.n_cols << " " << A.nnz() << "\n";
  os.precision(17);
  for (std::size_t i = 0; i < A.n_rows; ++i)
    for (std::size_t p = A.row_offsets[i]; p < A.row_offsets[i + 1]; ++p)
      os << i + 1 << " " << A.col_indices[p] + 1 << " " << A.values[p] << "\n";
}

inline void write_matrix_market(const SparseMatrix& A, const std::string& path) {
  std::ofstream os(path);
  require(bool(os), "write_matrix_market: cannot open " + path);
  write_matrix_market(A, os);
}

/// Reads coordinate-format MatrixMarket; accepts general and symmetric
/// headers (symmetric input is expanded to full storage).
inline SparseMatrix read_matrix_market(std::istream& is) {
  std::string line;
  require(bool(std::getline(is, line)), "matrix market: empty stream");
  std::istringstream hdr(line);
  std::string banner, object, format, field, symmetry;
  hdr >> banner >> object >> format >> field >> symmetry;
  require(banner == "%%MatrixMarket", "matrix market: missing banner");
  require(object == "matrix" && format == "coordinate",
          "matrix market: only coordinate matrices are supported");
  require(field == "real" || field == "integer",
          "matrix market: only real entries are supported");
  const bool symmetric = (symmetry == "symmetric");
  require(symmetric || symmetry == "general",
          "matrix market: unsupported symmetry " + symmetry);

  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream szs(line);
  std::size_t rows = 0, cols = 0, entries = 0;
  szs >> rows >> cols >> entries;
  require(bool(szs), "matrix market: malformed size line");

  SparseBuilder builder(rows, cols);
  std::size_t seen = 0;
  while (seen < entries && std::getline(is, line)) {
    if (line.empty() || line[0] == '%') continue;
    std::istringstream es(line);
    std::size_t i = 0, j = 0;
    double v = 0.0;
    es >> i >> j >> v;
    require(bool(es), "matrix market: malformed entry line");
    require(i >= 1 && i <= rows && j >= 1 && j <= cols,
            "matrix market: entry out of range");
    builder.add(i - 1, j - 1, v);
    if (symmetric && i != j) builder.add(j - 1, i - 1, v);
    ++seen;
  }
  require(seen == entries, "matrix market: fewer entries than declared");
  return builder.compress();
}

inline SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream is(path);
  require(bool(is), "read_matrix_market: cannot open " + path);
  return read_matrix_market(is);
}

}  // namespace msp
