#pragma once

// Dense eigenvalue diagnostics for the saddle operator and its
// preconditioned forms: the coercivity constant of the curl-curl block over
// the constraint kernel, the smallest eigenvalue of the shifted block
// operator, full preconditioned spectra with unit-cluster counting, and the
// small-eigenvalue tail comparison that explains when the diagonally
// preconditioned CG iteration becomes fragile.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msp/common.hpp"
#include "msp/dense.hpp"
#include "msp/eig.hpp"
#include "msp/orth.hpp"
#include "msp/saddle.hpp"

namespace msp {

/// Half-width of the cluster around 1 used when counting unit eigenvalues.
inline constexpr double kUnitClusterTol = 1e-6;

/// Eigenvalue summary for a preconditioned operator (or the bare shifted
/// pencil). `violations` lists eigenvalues outside [bound_lower, 1] that do
/// not belong to the unit cluster; for triangular preconditioners with a
/// negative secondary cluster this list is legitimately non-empty. The lower
/// endpoint is attained exactly by the mode that realizes the computed
/// coercivity constant, so membership is tested with round-off slack.
struct SpectrumReport {
  std::vector<double> eigenvalues;  // sorted ascending
  std::size_t multiplicity_of_one = 0;
  double bound_lower = 0.0;  // (alpha_bar - k^2) / (alpha_bar + eta - k^2)
  std::vector<double> violations;
  double alpha_bar = 0.0;
  double lambda_min_Aeta = 0.0;
  double k = 0.0;
  double eta = 0.0;
  std::size_t constraints = 0;  // m, the number of multiplier unknowns
  std::size_t expected_unit_multiplicity = 0;
};

/// Smallest Rayleigh quotient u'Au / u'Mu over the kernel of B: the discrete
/// coercivity constant of the curl-curl form on divergence-free fields.
/// Nearly mesh-independent under refinement.
inline double estimate_alpha_bar(const SaddleSystem& sys) {
  require(sys.n > sys.m,
          "estimate_alpha_bar: constraint kernel is empty (m = n)");
  const DenseMatrix A = to_dense(sys.A);
  const DenseMatrix M = to_dense(sys.M);

  DenseMatrix Z;
  if (sys.m == 0) {
    Z = DenseMatrix::identity(sys.n);
  } else {
    Z = null_basis(to_dense(sys.B)).right_basis;
    require(Z.cols() == sys.n - sys.m,
            "estimate_alpha_bar: kernel dimension mismatch");
  }

  const std::size_t d = Z.cols();
  DenseMatrix AZ(sys.n, d), MZ(sys.n, d);
  for (std::size_t j = 0; j < d; ++j) {
    AZ.set_col(j, A * Z.col(j));
    MZ.set_col(j, M * Z.col(j));
  }
  DenseMatrix Zt = Z.transposed();
  const DenseMatrix ZAZ = Zt * AZ;
  const DenseMatrix ZMZ = Zt * MZ;
  return eigen_symmetric_generalized(ZAZ, ZMZ).values.front();
}

/// Smallest eigenvalue of the block-diagonal operator
/// diag(A + eta B'L^{-1}B - k^2 M, I). Positive exactly when the shifted
/// block is positive definite; turns negative once k^2 passes the
/// coercivity constant.
inline double lambda_min_Aeta(const SaddleSystem& sys, double eta) {
  const double k2 = sys.k * sys.k;
  require(eta != k2, "lambda_min_Aeta: eta must differ from k^2");
  const detail::DenseParts parts = detail::dense_parts(sys);
  DenseMatrix Aeta = parts.A;
  for (std::size_t i = 0; i < sys.n; ++i)
    for (std::size_t j = 0; j < sys.n; ++j)
      Aeta(i, j) += eta * parts.G(i, j) - k2 * parts.M(i, j);
  double lam = eigen_symmetric(Aeta).values.front();
  if (sys.m > 0) lam = std::min(lam, 1.0);
  return lam;
}

namespace detail {

/// Shared tail: sort, count the unit cluster, compute the lower bound from
/// alpha_bar, and collect out-of-window eigenvalues.
inline void finish_report(SpectrumReport& rep, const SaddleSystem& sys,
                          double eta) {
  std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end());
  rep.k = sys.k;
  rep.eta = eta;
  rep.constraints = sys.m;
  rep.alpha_bar = estimate_alpha_bar(sys);
  const double k2 = sys.k * sys.k;
  rep.bound_lower = (rep.alpha_bar - k2) / (rep.alpha_bar + eta - k2);
  rep.lambda_min_Aeta = lambda_min_Aeta(sys, eta);
  rep.multiplicity_of_one = 0;
  rep.violations.clear();
  for (double lam : rep.eigenvalues) {
    if (std::abs(lam - 1.0) <= kUnitClusterTol) {
      ++rep.multiplicity_of_one;
      continue;
    }
    const double slack = 1e-9;
    if (lam < rep.bound_lower - slack || lam > 1.0 + slack)
      rep.violations.push_back(lam);
  }
}

/// Eigenvalues of the pencil (A + eta G - k^2 M, A + (eta - k^2) M). The
/// right matrix must be positive definite, which holds for eta > k^2.
inline std::vector<double> shifted_pencil_values(const SaddleSystem& sys,
                                                 double eta) {
  const double k2 = sys.k * sys.k;
  require(eta > k2, "spectrum: eta must exceed k^2 for the pencil route");
  const DenseParts parts = dense_parts(sys);
  DenseMatrix Aeta = parts.A;
  DenseMatrix As = parts.A;
  for (std::size_t i = 0; i < sys.n; ++i)
    for (std::size_t j = 0; j < sys.n; ++j) {
      Aeta(i, j) += eta * parts.G(i, j) - k2 * parts.M(i, j);
      As(i, j) += (eta - k2) * parts.M(i, j);
    }
  auto values = eigen_symmetric_generalized(Aeta, As).values;
  return {values.begin(), values.end()};
}

}  // namespace detail

/// Spectrum of the bare shifted pencil, whose unit eigenvalue has
/// multiplicity m (the gradient directions) and whose remaining eigenvalues
/// fill the window (bound_lower, 1) whenever k^2 < alpha_bar.
inline SpectrumReport spectrum_shifted_pencil(const SaddleSystem& sys,
                                              double eta) {
  SpectrumReport rep;
  rep.eigenvalues = detail::shifted_pencil_values(sys, eta);
  rep.expected_unit_multiplicity = sys.m;
  detail::finish_report(rep, sys, eta);
  return rep;
}

/// Dense spectrum of the preconditioned operator. The block preconditioner
/// rides the symmetric pencil route plus m exact unit eigenvalues from the
/// multiplier block; the diagonal preconditioner is a symmetric-definite
/// pencil with the full saddle matrix; general triangular preconditioners
/// go through the nonsymmetric eigensolver on the explicit dense product.
inline SpectrumReport spectrum_preconditioned(const SaddleSystem& sys,
                                              const PreconditionerConfig& cfg) {
  SpectrumReport rep;
  switch (cfg.kind) {
    case PrecondKind::P: {
      rep.eigenvalues = detail::shifted_pencil_values(sys, cfg.eta);
      rep.eigenvalues.insert(rep.eigenvalues.end(), sys.m, 1.0);
      rep.expected_unit_multiplicity = 2 * sys.m;
      break;
    }
    case PrecondKind::Mdiag: {
      const double k2 = sys.k * sys.k;
      require(cfg.eta > k2, "spectrum: eta must exceed k^2");
      const detail::DenseParts parts = detail::dense_parts(sys);
      const std::size_t t = sys.total_size();
      DenseMatrix Kd = dense_K(sys);
      DenseMatrix Md(t, t);
      for (std::size_t i = 0; i < sys.n; ++i)
        for (std::size_t j = 0; j < sys.n; ++j)
          Md(i, j) = parts.A(i, j) + (cfg.eta - k2) * parts.M(i, j);
      const DenseMatrix L = to_dense(sys.L);
      for (std::size_t i = 0; i < sys.m; ++i)
        for (std::size_t j = 0; j < sys.m; ++j)
          Md(sys.n + i, sys.n + j) = L(i, j) / cfg.eta;
      auto values = eigen_symmetric_generalized(Kd, Md).values;
      rep.eigenvalues.assign(values.begin(), values.end());
      rep.expected_unit_multiplicity = sys.m;
      break;
    }
    case PrecondKind::Mtri: {
      Preconditioner prec(sys, cfg);
      const DenseMatrix Minv = dense_precond_inverse(prec);
      const DenseMatrix N = Minv * dense_K(sys);
      GeneralEigenvalues ge = eigenvalues_general(N);
      double scale = 0.0;
      for (double re : ge.re) scale = std::max(scale, std::abs(re));
      for (std::size_t i = 0; i < ge.im.size(); ++i)
        require(std::abs(ge.im[i]) <= 1e-6 * (scale + 1.0),
                "spectrum: triangular preconditioned operator produced a "
                "non-real eigenvalue");
      rep.eigenvalues = ge.re;
      rep.expected_unit_multiplicity = sys.m;
      break;
    }
    default:
      throw std::invalid_argument(
          "spectrum_preconditioned: supported kinds are P, Mdiag, Mtri");
  }
  detail::finish_report(rep, sys, cfg.eta);
  return rep;
}

/// Outcome of the window check on a spectrum report.
struct SpectrumWindowCheck {
  bool multiplicity_ok = false;
  bool bounds_ok = false;
  bool pass = false;
  std::string detail;
};

/// Verifies that the unit eigenvalue has exactly the expected multiplicity
/// and that every other eigenvalue lies strictly inside (bound_lower, 1).
/// Meaningful only in the definite regime k^2 < alpha_bar, which is checked.
inline SpectrumWindowCheck check_spectrum_window(const SpectrumReport& rep) {
  require(rep.k * rep.k < rep.alpha_bar,
          "check_spectrum_window: requires k^2 below the coercivity constant");
  SpectrumWindowCheck out;
  out.multiplicity_ok =
      rep.multiplicity_of_one == rep.expected_unit_multiplicity;
  out.bounds_ok = rep.violations.empty();
  out.pass = out.multiplicity_ok && out.bounds_ok;
  std::ostringstream os;
  os << "unit multiplicity " << rep.multiplicity_of_one << " (expected "
     << rep.expected_unit_multiplicity << "), window ("
     << rep.bound_lower << ", 1]";
  if (!out.bounds_ok) {
    os << ", outliers:";
    for (double v : rep.violations) os << ' ' << v;
  }
  out.detail = os.str();
  return out;
}

/// Small-eigenvalue tails of the saddle matrix and of the shifted block
/// operator, with negative counts. A much fatter tail for the saddle matrix
/// signals the regime where diagonally preconditioned CG breaks down while
/// the block preconditioner keeps a thin, well-separated tail.
struct SpectrumTails {
  std::vector<double> saddle_tail;   // eigenvalues of K below the cutoff
  std::vector<double> shifted_tail;  // eigenvalues of diag(A_eta, I) below it
  std::size_t negatives_saddle = 0;
  std::size_t negatives_shifted = 0;
  double cutoff = 0.0;
};

inline SpectrumTails spectrum_K_vs_Aeta(const SaddleSystem& sys, double eta,
                                        double cutoff = 0.3) {
  SpectrumTails tails;
  tails.cutoff = cutoff;

  const Vec k_values = eigen_symmetric(dense_K(sys)).values;
  for (double lam : k_values) {
    if (lam < cutoff) tails.saddle_tail.push_back(lam);
    if (lam < 0.0) ++tails.negatives_saddle;
  }

  const double k2 = sys.k * sys.k;
  require(eta != k2, "spectrum_K_vs_Aeta: eta must differ from k^2");
  const detail::DenseParts parts = detail::dense_parts(sys);
  DenseMatrix Aeta = parts.A;
  for (std::size_t i = 0; i < sys.n; ++i)
    for (std::size_t j = 0; j < sys.n; ++j)
      Aeta(i, j) += eta * parts.G(i, j) - k2 * parts.M(i, j);
  Vec a_values = eigen_symmetric(Aeta).values;
  a_values.insert(a_values.end(), sys.m, 1.0);
  std::sort(a_values.begin(), a_values.end());
  for (double lam : a_values) {
    if (lam < cutoff) tails.shifted_tail.push_back(lam);
    if (lam < 0.0) ++tails.negatives_shifted;
  }
  return tails;
}

}  // namespace msp
