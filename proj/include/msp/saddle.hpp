#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "msp/assembly.hpp"
#include "msp/factorization.hpp"

namespace msp {

inline double default_eta(double k) { return k * k + 1.0; }

enum class PrecondKind { P, Mtri, Mdiag, P0, PD, DirectK0 };

inline std::string precond_name(PrecondKind kind) {
  switch (kind) {
    case PrecondKind::P: return "P";
    case PrecondKind::Mtri: return "Mtri";
    case PrecondKind::Mdiag: return "Mdiag";
    case PrecondKind::P0: return "P0";
    case PrecondKind::PD: return "PD";
    case PrecondKind::DirectK0: return "directk0";
  }
  return "?";
}

/// Inner-solve policy: exact cached factorization, or conjugate gradients
/// with an incomplete-factorization preconditioner and a tolerance knob.
struct InnerPolicy {
  enum class Mode { exact, pcg };
  Mode mode = Mode::exact;
  double tol = 1e-8;
  std::size_t max_it = 2000;
};

struct PreconditionerConfig {
  PrecondKind kind = PrecondKind::P;
  double eta = 1.0;
  double epsilon = 1.0;               // Mtri only
  std::optional<DenseMatrix> D;       // PD only; absent means zero
  InnerPolicy inner;
};

/// Bookkeeping for the solve-count and inexactness contracts.
struct InnerStats {
  std::size_t shifted_solves = 0;  // systems with A + (eta - k^2) M
  std::size_t laplacian_solves = 0;
  std::size_t pcg_iterations = 0;
  std::size_t pcg_failures = 0;
  double worst_residual = 0.0;
};

namespace detail {

/// One reusable inner solver: either a cached direct factorization or
/// incomplete-factorization-preconditioned CG on the same matrix.
class InnerOperator {
 public:
  InnerOperator() = default;

  InnerOperator(SparseMatrix S, const InnerPolicy& policy)
      : policy_(policy), matrix_(std::move(S)) {
    if (policy_.mode == InnerPolicy::Mode::exact) {
      factor_.emplace(matrix_, FactorKind::spd);
    } else if (matrix_.n_rows > 0) {
      ic_.emplace(matrix_);
    }
  }

  Vec solve(const Vec& b) const {
    ++solves_;
    if (factor_) return factor_->solve(b);
    if (matrix_.n_rows == 0) return {};
    auto result = pcg_spd(
        matrix_, b, [&](const Vec& r) { return ic_->solve(r); }, policy_.tol,
        policy_.max_it);
    iterations_ += result.iterations;
    if (!result.converged) {
      ++failures_;
      const double bn = norm2(b);
      if (bn > 0.0)
        worst_residual_ =
            std::max(worst_residual_, norm2(vdiff(b, spmv(matrix_, result.x))) / bn);
    }
    return result.x;
  }

  std::size_t solves() const { return solves_; }
  std::size_t iterations() const { return iterations_; }
  std::size_t failures() const { return failures_; }
  double worst_residual() const { return worst_residual_; }
  void reset() const {
    solves_ = 0;
    iterations_ = 0;
    failures_ = 0;
    worst_residual_ = 0.0;
  }

 private:
  InnerPolicy policy_;
  SparseMatrix matrix_;
  std::optional<Factorization> factor_;
  std::optional<IncompleteCholesky> ic_;
  mutable std::size_t solves_ = 0;
  mutable std::size_t iterations_ = 0;
  mutable std::size_t failures_ = 0;
  mutable double worst_residual_ = 0.0;
};

}  // namespace detail

/// y = K x with K = [[A - k^2 M, B^T], [B, 0]].
inline Vec apply_K(const SaddleSystem& sys, const Vec& x) {
  require(x.size() == sys.n + sys.m, "apply_K: dimension mismatch");
  Vec u(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(sys.n));
  Vec p(x.begin() + static_cast<std::ptrdiff_t>(sys.n), x.end());
  Vec f = spmv(sys.A, u);
  Vec Mu = spmv(sys.M, u);
  axpy(-sys.k * sys.k, Mu, f);
  if (sys.m > 0) {
    Vec Btp = spmv_transposed(sys.B, p);
    axpy(1.0, Btp, f);
  }
  Vec g = (sys.m > 0) ? spmv(sys.B, u) : Vec{};
  return vcat(f, g);
}

/// Holds the cached inner solvers for one (system, configuration) pair and
/// applies the selected preconditioner inverse.
class Preconditioner {
 public:
  Preconditioner(const SaddleSystem& sys, PreconditionerConfig cfg)
      : sys_(&sys), cfg_(std::move(cfg)) {
    const double k2 = sys.k * sys.k;
    switch (cfg_.kind) {
      case PrecondKind::P:
      case PrecondKind::Mtri:
      case PrecondKind::Mdiag:
        require(cfg_.eta > k2, "preconditioner: eta must exceed k^2");
        break;
      case PrecondKind::P0:
        cfg_.eta = 1.0;  // fixed by definition
        break;
      case PrecondKind::PD:
        require(cfg_.eta > 0.0, "preconditioner: eta must be positive");
        break;
      case PrecondKind::DirectK0:
        require(false, "preconditioner: the k=0 direct solver is not an "
                       "iterative preconditioner");
    }
    if (cfg_.kind == PrecondKind::Mtri)
      require(cfg_.epsilon != 0.0, "preconditioner: epsilon must be nonzero");
    if (cfg_.D)
      require(cfg_.D->rows() == sys.m && cfg_.D->cols() == sys.m,
              "preconditioner: D must be m x m");

    const double shift = effective_shift();
    shifted_ = detail::InnerOperator(
        sparse_add(1.0, sys.A, shift, sys.M), cfg_.inner);
    laplacian_ = detail::InnerOperator(sys.L, cfg_.inner);
  }

  const PreconditionerConfig& config() const { return cfg_; }
  const SaddleSystem& system() const { return *sys_; }

  /// Shift s in the leading inner matrix A + s M.
  double effective_shift() const {
    const double k2 = sys_->k * sys_->k;
    switch (cfg_.kind) {
      case PrecondKind::P0: return 1.0;
      case PrecondKind::PD: return cfg_.eta;
      default: return cfg_.eta - k2;
    }
  }

  Vec apply(const Vec& r) const {
    require(r.size() == sys_->n + sys_->m, "preconditioner: dimension mismatch");
    Vec x(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(sys_->n));
    Vec y(r.begin() + static_cast<std::ptrdiff_t>(sys_->n), r.end());
    switch (cfg_.kind) {
      case PrecondKind::P: return apply_P(x, y);
      case PrecondKind::Mtri: return apply_Mtri(x, y, cfg_.epsilon);
      case PrecondKind::Mdiag: return apply_Mdiag(x, y);
      case PrecondKind::P0: return apply_P0(x, y);
      case PrecondKind::PD: return apply_PD(x, y);
      default: break;
    }
    require(false, "preconditioner: unsupported kind");
    return {};
  }

  InnerStats stats() const {
    InnerStats s;
    s.shifted_solves = shifted_.solves();
    s.laplacian_solves = laplacian_.solves();
    s.pcg_iterations = shifted_.iterations() + laplacian_.iterations();
    s.pcg_failures = shifted_.failures() + laplacian_.failures();
    s.worst_residual =
        std::max(shifted_.worst_residual(), laplacian_.worst_residual());
    return s;
  }

  void reset_stats() const {
    shifted_.reset();
    laplacian_.reset();
  }

  /// Solves with A + (eta - k^2) M (exposed for the Krylov metric).
  Vec solve_shifted(const Vec& b) const { return shifted_.solve(b); }
  Vec solve_laplacian(const Vec& b) const { return laplacian_.solve(b); }

 private:
  // u = A_s^{-1} x - (eta-k^2)^{-1} C L^{-1} C^T x + C L^{-1} y
  // p = L^{-1} C^T x + k^2 L^{-1} y
  // Exactly one shifted solve and two Laplacian solves.
  Vec apply_P(const Vec& x, const Vec& y) const {
    const auto& sys = *sys_;
    const double k2 = sys.k * sys.k;
    const double gap = cfg_.eta - k2;
    Vec w1, w2;
    if (sys.m > 0) {
      w1 = laplacian_.solve(spmv_transposed(sys.C, x));
      w2 = laplacian_.solve(y);
    }
    Vec u = shifted_.solve(x);
    Vec p(sys.m, 0.0);
    if (sys.m > 0) {
      Vec cw1 = spmv(sys.C, w1);
      Vec cw2 = spmv(sys.C, w2);
      for (std::size_t i = 0; i < sys.n; ++i)
        u[i] += -cw1[i] / gap + cw2[i];
      for (std::size_t j = 0; j < sys.m; ++j) p[j] = w1[j] + k2 * w2[j];
    }
    return vcat(u, p);
  }

  // Back-substitution through [[A_s, (1-eta*eps) B^T], [0, eps L]].
  Vec apply_Mtri(const Vec& x, const Vec& y, double eps) const {
    const auto& sys = *sys_;
    Vec p(sys.m, 0.0);
    Vec rhs = x;
    if (sys.m > 0) {
      p = laplacian_.solve(y);
      for (double& v : p) v /= eps;
      const double c = 1.0 - cfg_.eta * eps;
      if (c != 0.0) {
        Vec btp = spmv_transposed(sys.B, p);
        axpy(-c, btp, rhs);
      }
    }
    Vec u = shifted_.solve(rhs);
    return vcat(u, p);
  }

  // Exactly block diagonal: u = A_s^{-1} x, p = eta L^{-1} y.
  Vec apply_Mdiag(const Vec& x, const Vec& y) const {
    Vec p(sys_->m, 0.0);
    if (sys_->m > 0) {
      p = laplacian_.solve(y);
      for (double& v : p) v *= cfg_.eta;
    }
    return vcat(shifted_.solve(x), p);
  }

  // u = (A+M)^{-1} x - C L^{-1} C^T x + C L^{-1} y ; p = L^{-1} C^T x.
  Vec apply_P0(const Vec& x, const Vec& y) const {
    const auto& sys = *sys_;
    Vec w1, w2;
    if (sys.m > 0) {
      w1 = laplacian_.solve(spmv_transposed(sys.C, x));
      w2 = laplacian_.solve(y);
    }
    Vec u = shifted_.solve(x);
    if (sys.m > 0) {
      Vec cw1 = spmv(sys.C, w1);
      Vec cw2 = spmv(sys.C, w2);
      for (std::size_t i = 0; i < sys.n; ++i) u[i] += cw2[i] - cw1[i];
    }
    return vcat(u, sys.m > 0 ? w1 : Vec{});
  }

  // u = (A+eta M)^{-1}(x - B^T L^{-1} C^T x) - C L^{-1} D L^{-1} C^T x
  //     + C L^{-1} y ; p = L^{-1} C^T x.
  Vec apply_PD(const Vec& x, const Vec& y) const {
    const auto& sys = *sys_;
    if (sys.m == 0) return vcat(shifted_.solve(x), Vec{});
    Vec w1 = laplacian_.solve(spmv_transposed(sys.C, x));
    Vec rhs = x;
    Vec btw1 = spmv_transposed(sys.B, w1);
    axpy(-1.0, btw1, rhs);
    Vec u = shifted_.solve(rhs);
    if (cfg_.D) {
      Vec dw1 = (*cfg_.D) * w1;
      Vec w3 = laplacian_.solve(dw1);
      Vec cw3 = spmv(sys.C, w3);
      axpy(-1.0, cw3, u);
    }
    Vec w2 = laplacian_.solve(y);
    Vec cw2 = spmv(sys.C, w2);
    axpy(1.0, cw2, u);
    return vcat(u, w1);
  }

  const SaddleSystem* sys_;
  PreconditionerConfig cfg_;
  detail::InnerOperator shifted_;
  detail::InnerOperator laplacian_;
};

struct DirectSolveResult {
  Vec u;
  Vec p;
  std::size_t kernel_cg_iterations = 0;
  bool kernel_cg_converged = true;
  double relative_residual = 0.0;
};

/// Null-space direct solver for the k = 0 system [[A, B^T], [B, 0]].
/// p = L^{-1} C^T f; a particular solution of the consistent singular
/// system A u0 = f - B^T p via Jacobi CG; the kernel component is then
/// fixed through u = (I - C L^{-1} B) u0 + C L^{-1} g.
inline DirectSolveResult direct_solve_k0(const SaddleSystem& sys, const Vec& f,
                                         const Vec& g,
                                         double kernel_tol = 1e-10,
                                         std::size_t kernel_max_it = 0) {
  require(sys.k == 0.0, "direct_solve_k0: wave number must be zero");
  require(f.size() == sys.n && g.size() == sys.m,
          "direct_solve_k0: dimension mismatch");
  DirectSolveResult out;
  if (kernel_max_it == 0) kernel_max_it = 20 * sys.n + 100;

  std::optional<Factorization> lfac;
  if (sys.m > 0) lfac.emplace(sys.L, FactorKind::spd);

  out.p.assign(sys.m, 0.0);
  Vec rhs = f;
  if (sys.m > 0) {
    out.p = lfac->solve(spmv_transposed(sys.C, f));
    Vec btp = spmv_transposed(sys.B, out.p);
    axpy(-1.0, btp, rhs);
  }

  Vec diag(sys.n, 1.0);
  for (std::size_t i = 0; i < sys.n; ++i) {
    const double d = sys.A.at(i, i);
    if (d > 0.0) diag[i] = d;
  }
  auto jacobi = [&](const Vec& r) {
    Vec z(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / diag[i];
    return z;
  };
  auto cg = pcg_spd(sys.A, rhs, jacobi, kernel_tol, kernel_max_it);
  out.kernel_cg_iterations = cg.iterations;
  out.kernel_cg_converged = cg.converged;

  out.u = cg.x;
  if (sys.m > 0) {
    Vec corr = lfac->solve(spmv(sys.B, cg.x));
    Vec ccorr = spmv(sys.C, corr);
    axpy(-1.0, ccorr, out.u);
    Vec lift = spmv(sys.C, lfac->solve(g));
    axpy(1.0, lift, out.u);
  }

  // Residual of the full saddle system.
  Vec x = vcat(out.u, out.p);
  Vec r = vdiff(vcat(f, g), apply_K(sys, x));
  const double bn = norm2(vcat(f, g));
  out.relative_residual = (bn > 0.0) ? norm2(r) / bn : norm2(r);
  return out;
}

inline DenseMatrix dense_K(const SaddleSystem& sys) {
  const std::size_t t = sys.n + sys.m;
  DenseMatrix K(t, t);
  K.set_block(0, 0, to_dense(sparse_add(1.0, sys.A, -sys.k * sys.k, sys.M)));
  if (sys.m > 0) {
    K.set_block(0, sys.n, to_dense(sparse_transpose(sys.B)));
    K.set_block(sys.n, 0, to_dense(sys.B));
  }
  return K;
}

namespace detail {

struct DenseParts {
  DenseMatrix A, M, B, C, Linv, G;  // G = B^T L^{-1} B
};

inline DenseParts dense_parts(const SaddleSystem& sys) {
  DenseParts parts;
  parts.A = to_dense(sys.A);
  parts.M = to_dense(sys.M);
  parts.B = to_dense(sys.B);
  parts.C = to_dense(sys.C);
  if (sys.m > 0) {
    parts.Linv = DenseCholesky(to_dense(sys.L)).solve(DenseMatrix::identity(sys.m));
    parts.G = parts.B.transposed() * parts.Linv * parts.B;
  } else {
    parts.Linv = DenseMatrix(0, 0);
    parts.G = DenseMatrix(sys.n, sys.n);
  }
  return parts;
}

}  // namespace detail

/// Exact dense inverse of K assembled from the closed-form blocks
/// [[S^{-1}(I - B^T L^{-1} C^T), C L^{-1}], [L^{-1} C^T, k^2 L^{-1}]] with
/// S = A + eta B^T L^{-1} B - k^2 M. Desk-scale verification oracle.
inline DenseMatrix dense_K_inverse(const SaddleSystem& sys, double eta) {
  const double k2 = sys.k * sys.k;
  require(eta != k2, "dense_K_inverse: eta must differ from k^2");
  const auto parts = detail::dense_parts(sys);
  const std::size_t t = sys.n + sys.m;

  DenseMatrix S = parts.A + eta * parts.G + (-k2) * parts.M;
  DenseMatrix Sinv;
  try {
    Sinv = DenseLU(S).inverse();
  } catch (const SingularError&) {
    throw SingularError("dense_K_inverse: shifted block singular");
  }

  DenseMatrix R(t, t);
  if (sys.m == 0) {
    R.set_block(0, 0, Sinv);
    return R;
  }
  DenseMatrix proj = DenseMatrix::identity(sys.n) -
                     parts.B.transposed() * parts.Linv * parts.C.transposed();
  R.set_block(0, 0, Sinv * proj);
  R.set_block(0, sys.n, parts.C * parts.Linv);
  R.set_block(sys.n, 0, parts.Linv * parts.C.transposed());
  R.set_block(sys.n, sys.n, k2 * parts.Linv);
  return R;
}

/// Dense action matrix of the configured preconditioner inverse, by
/// applying it to the identity columns. Verification oracle only.
inline DenseMatrix dense_precond_inverse(const Preconditioner& prec) {
  const std::size_t t = prec.system().n + prec.system().m;
  DenseMatrix R(t, t);
  Vec e(t, 0.0);
  for (std::size_t j = 0; j < t; ++j) {
    e[j] = 1.0;
    R.set_col(j, prec.apply(e));
    e[j] = 0.0;
  }
  return R;
}

/// Residual checks of the closed-form inverse blocks: with T the (1,1)
/// block at k and V its k=0 counterpart, checks BT = 0, (A - k^2 M) T = AV,
/// VA = I - C L^{-1} B, V B^T = 0, AV = I - B^T L^{-1} C^T, BV = 0.
inline StructureReport verify_T_properties(const SaddleSystem& sys, double eta,
                                           double tol = 1e-9) {
  StructureReport report;
  const auto parts = detail::dense_parts(sys);
  const double k2 = sys.k * sys.k;

  DenseMatrix Kinv = dense_K_inverse(sys, eta);
  DenseMatrix T = Kinv.block(0, 0, sys.n, sys.n);

  SaddleSystem sys0 = sys;
  sys0.k = 0.0;
  DenseMatrix V =
      dense_K_inverse(sys0, eta == k2 ? eta + 1.0 : eta).block(0, 0, sys.n, sys.n);

  const double scale = std::max(1.0, parts.A.norm_max());
  if (sys.m > 0) {
    report.add("B T = 0", (parts.B * T).norm_max() / scale, tol);
    report.add("B V = 0", (parts.B * V).norm_max() / scale, tol);
    report.add("V B^T = 0",
               (V * parts.B.transposed()).norm_max() / scale, tol);
  } else {
    report.add("B T = 0", 0.0, tol);
    report.add("B V = 0", 0.0, tol);
    report.add("V B^T = 0", 0.0, tol);
  }

  DenseMatrix AkT = (parts.A + (-k2) * parts.M) * T;
  DenseMatrix AV = parts.A * V;
  report.add("(A - k^2 M) T = A V", (AkT - AV).norm_max() / scale, tol);

  DenseMatrix I = DenseMatrix::identity(sys.n);
  DenseMatrix proj_right =
      sys.m > 0 ? I - parts.C * parts.Linv * parts.B : I;
  DenseMatrix proj_left =
      sys.m > 0 ? I - parts.B.transposed() * parts.Linv * parts.C.transposed() : I;
  report.add("V A = I - C L^{-1} B", (V * parts.A - proj_right).norm_max(), tol);
  report.add("A V = I - B^T L^{-1} C^T", (AV - proj_left).norm_max(), tol);
  return report;
}

}  // namespace msp
