#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "msp/saddle.hpp"

namespace msp {

using LinearAction = std::function<Vec(const Vec&)>;

/// Metric for the Krylov recurrences: plain Euclidean pairing, or the SPD
/// block-diagonal form diag(A + shift * M, I_m) under which the block
/// preconditioned operator is self-adjoint.
class InnerProduct {
 public:
  enum class Kind { euclidean, hblock };

  static InnerProduct euclidean() { return InnerProduct(); }

  static InnerProduct h_block(const SaddleSystem& sys, double shift) {
    InnerProduct ip;
    ip.kind_ = Kind::hblock;
    SparseMatrix As = sparse_add(1.0, sys.A, shift, sys.M);
    Factorization spd_check(As, FactorKind::spd);
    (void)spd_check;
    SparseBuilder builder(sys.n + sys.m, sys.n + sys.m);
    for (std::size_t i = 0; i < As.n_rows; ++i)
      for (std::size_t p = As.row_offsets[i]; p < As.row_offsets[i + 1]; ++p)
        builder.add(i, As.col_indices[p], As.values[p]);
    for (std::size_t j = 0; j < sys.m; ++j)
      builder.add(sys.n + j, sys.n + j, 1.0);
    ip.metric_ = builder.compress();
    return ip;
  }

  Kind kind() const { return kind_; }

  Vec apply(const Vec& x) const {
    if (kind_ == Kind::euclidean) return x;
    return spmv(metric_, x);
  }

  double dot_pair(const Vec& x, const Vec& y) const {
    if (kind_ == Kind::euclidean) return msp::dot(x, y);
    return msp::dot(x, spmv(metric_, y));
  }

  double norm_sq(const Vec& x) const { return dot_pair(x, x); }

 private:
  Kind kind_ = Kind::euclidean;
  SparseMatrix metric_;
};

struct SolveReport {
  std::string algorithm;
  std::string config;
  Vec solution;  // final iterate, also on breakdown or stagnation
  std::size_t iterations = 0;
  std::vector<double> relative_residuals;  // true ||b - K x|| / ||b||
  bool converged = false;
  bool breakdown = false;
  std::string breakdown_reason;
  bool symmetry_warning = false;
  double max_symmetry_residual = 0.0;
  bool experimental = false;
  std::size_t inner_failures = 0;
  double wall_time = 0.0;
};

namespace detail {

class WallClock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline double true_relative_residual(const LinearAction& op, const Vec& b,
                                     const Vec& x, double bnorm) {
  Vec r = vdiff(b, op(x));
  return norm2(r) / bnorm;
}

}  // namespace detail

/// Conjugate gradients on the preconditioned operator. Euclidean kind runs
/// the classical pairing recurrence (gamma = r.z, curvature = p.Kp) which is
/// CG in the preconditioner metric when the preconditioner is SPD; hblock
/// kind runs CG on precond(op(.)) in the explicit block metric. Stops on the
/// true residual; flags breakdown when a dividend loses all significance.
inline SolveReport pcg(const LinearAction& apply_op,
                       const LinearAction& apply_precond, const Vec& b,
                       const InnerProduct& ip, double tol = 1e-6,
                       std::size_t max_it = 200) {
  require(tol > 0.0, "pcg: tolerance must be positive");
  detail::WallClock clock;
  SolveReport report;
  report.algorithm =
      ip.kind() == InnerProduct::Kind::euclidean ? "cg" : "cg-hmetric";

  const double bnorm = norm2(b);
  Vec x(b.size(), 0.0);
  if (bnorm == 0.0) {
    report.solution = x;
    report.relative_residuals.push_back(0.0);
    report.converged = true;
    report.wall_time = clock.seconds();
    return report;
  }
  report.relative_residuals.push_back(1.0);

  const bool hmetric = ip.kind() == InnerProduct::Kind::hblock;
  Vec r = b;                      // unpreconditioned recurrence residual
  Vec z = apply_precond(r);       // preconditioned residual
  Vec p = z;
  double gamma = hmetric ? ip.norm_sq(z) : dot(r, z);

  for (std::size_t it = 1; it <= max_it; ++it) {
    Vec w = apply_op(p);
    double curvature;
    Vec wt;
    if (hmetric) {
      wt = apply_precond(w);
      curvature = ip.dot_pair(p, wt);
    } else {
      curvature = dot(p, w);
    }
    // The iteration survives negative curvature in practice; it only dies
    // when the dividend loses all significance and the step blows up.
    if (std::abs(curvature) < 1e-14 * ip.norm_sq(p)) {
      report.breakdown = true;
      report.breakdown_reason = "curvature dividend vanished";
      break;
    }
    const double alpha = gamma / curvature;
    axpy(alpha, p, x);
    axpy(-alpha, w, r);
    // Recomputing the preconditioned residual from r (instead of recurring
    // z -= alpha*wt) costs one extra application but keeps the direction
    // anchored to the true residual when the inner solves are inexact.
    z = apply_precond(r);

    report.iterations = it;
    const double res = detail::true_relative_residual(apply_op, b, x, bnorm);
    report.relative_residuals.push_back(res);
    if (res <= tol) {
      report.converged = true;
      break;
    }

    double gamma_next;
    if (hmetric) {
      gamma_next = ip.norm_sq(z);
    } else {
      gamma_next = dot(r, z);
      if (std::abs(gamma_next) < 1e-14 * norm2(r) * (norm2(z) + 1e-300)) {
        report.breakdown = true;
        report.breakdown_reason = "pairing dividend vanished";
        break;
      }
    }
    const double beta = gamma_next / gamma;
    gamma = gamma_next;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = z[i] + beta * p[i];
  }

  // Return the partial iterate even on breakdown or stagnation.
  report.solution = x;
  report.wall_time = clock.seconds();
  std::ostringstream cfg;
  cfg << "tol=" << tol << " max_it=" << max_it;
  if (report.config.empty()) report.config = cfg.str();
  return report;
}

/// Minimum residual iteration. Euclidean kind is the classical
/// pair-tracked recurrence for an SPD preconditioner; hblock runs the
/// Lanczos-Givens recurrence on precond(op(.)) in the explicit block metric,
/// which stays valid for symmetric indefinite preconditioners. A drifting
/// Lanczos symmetry residual raises a warning flag instead of aborting.
inline SolveReport minres(const LinearAction& apply_op,
                          const LinearAction& apply_precond, const Vec& b,
                          const InnerProduct& ip, double tol = 1e-6,
                          std::size_t max_it = 200) {
  require(tol > 0.0, "minres: tolerance must be positive");
  detail::WallClock clock;
  SolveReport report;
  const bool hmetric = ip.kind() == InnerProduct::Kind::hblock;
  report.algorithm = hmetric ? "minres-hmetric" : "minres";

  const double bnorm = norm2(b);
  Vec x(b.size(), 0.0);
  if (bnorm == 0.0) {
    report.solution = x;
    report.relative_residuals.push_back(0.0);
    report.converged = true;
    report.wall_time = clock.seconds();
    return report;
  }
  report.relative_residuals.push_back(1.0);

  const std::size_t nsize = b.size();

  // Lanczos state. In the classical variant r1/r2 carry the unpreconditioned
  // vectors and y the preconditioned image of r2; in the hblock variant the
  // normalized vectors v_prev/v_cur live in the preconditioned space and the
  // metric is applied explicitly.
  Vec r1(nsize, 0.0), r2 = b;
  Vec y = apply_precond(b);
  Vec v_prev(nsize, 0.0), v_cur;

  double beta_sq = hmetric ? ip.norm_sq(y) : dot(r2, y);
  if (beta_sq <= 0.0) {
    report.breakdown = true;
    report.breakdown_reason = "preconditioner pairing not positive";
    report.solution = x;
    report.wall_time = clock.seconds();
    return report;
  }
  double beta = std::sqrt(beta_sq);
  if (hmetric) v_cur = scaled(y, 1.0 / beta);

  double oldb = 0.0, dbar = 0.0, epsln = 0.0, phibar = beta;
  double cs = -1.0, sn = 0.0;
  Vec w(nsize, 0.0), w2(nsize, 0.0);

  for (std::size_t it = 1; it <= max_it; ++it) {
    Vec vj;  // normalized Lanczos vector of this step, preconditioned space
    double alfa;
    bool pairing_failed = false;
    if (hmetric) {
      vj = v_cur;
      Vec t = apply_precond(apply_op(vj));
      alfa = ip.dot_pair(vj, t);
      if (it >= 2) {
        // Self-adjointness gives <T v_j, v_{j-1}> = beta_j exactly.
        const double cross = ip.dot_pair(t, v_prev);
        const double sym = std::abs(cross - beta) / (std::abs(alfa) + beta + 1.0);
        report.max_symmetry_residual =
            std::max(report.max_symmetry_residual, sym);
        axpy(-beta, v_prev, t);
      }
      axpy(-alfa, vj, t);
      oldb = beta;
      beta = std::sqrt(std::max(ip.norm_sq(t), 0.0));
      v_prev = vj;
      if (beta > 0.0)
        v_cur = scaled(t, 1.0 / beta);
      else
        v_cur.assign(nsize, 0.0);
    } else {
      vj = scaled(y, 1.0 / beta);
      Vec t = apply_op(vj);
      if (it >= 2) {
        const double cross = dot(t, v_prev);
        const double sym = std::abs(cross - beta) / (beta + 1.0);
        report.max_symmetry_residual =
            std::max(report.max_symmetry_residual, sym);
        axpy(-beta / oldb, r1, t);
      }
      alfa = dot(vj, t);
      axpy(-alfa / beta, r2, t);
      r1 = r2;
      r2 = t;
      y = apply_precond(r2);
      oldb = beta;
      const double newb_sq = dot(r2, y);
      if (newb_sq < 0.0) {
        pairing_failed = true;
      } else {
        beta = std::sqrt(newb_sq);
        v_prev = vj;
      }
    }
    if (pairing_failed) {
      report.breakdown = true;
      report.breakdown_reason = "preconditioner pairing not positive";
      break;
    }

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::hypot(gbar, beta);
    if (gamma < 1e-300) gamma = 1e-300;
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    // w holds the direction from one step back, w2 from two steps back.
    for (std::size_t i = 0; i < nsize; ++i)
      vj[i] = (vj[i] - oldeps * w2[i] - delta * w[i]) / gamma;
    w2 = w;
    w = vj;
    axpy(phi, vj, x);

    report.iterations = it;
    const double res = detail::true_relative_residual(apply_op, b, x, bnorm);
    report.relative_residuals.push_back(res);
    if (res <= tol) {
      report.converged = true;
      break;
    }
    if (beta <= 1e-300) break;  // exact invariant subspace reached
  }

  if (report.max_symmetry_residual > 1e-6) report.symmetry_warning = true;
  report.solution = x;
  report.wall_time = clock.seconds();
  std::ostringstream cfg;
  cfg << "tol=" << tol << " max_it=" << max_it;
  if (report.config.empty()) report.config = cfg.str();
  return report;
}

enum class RhsKind { ones, df0g, rf0g, rfrg };

inline std::string rhs_name(RhsKind kind) {
  switch (kind) {
    case RhsKind::ones: return "ones";
    case RhsKind::df0g: return "df0g";
    case RhsKind::rf0g: return "rf0g";
    case RhsKind::rfrg: return "rfrg";
  }
  return "?";
}

struct Rhs {
  Vec f, g;
  Vec stacked() const { return vcat(f, g); }
};

/// Load vectors for the benchmark cases: all ones, a seeded random load
/// projected onto discretely divergence-free fields (g = 0), a plain seeded
/// random load with g = 0, or random on both components.
inline Rhs build_rhs(const SaddleSystem& sys, RhsKind kind,
                     std::uint64_t seed = 1234) {
  Rhs rhs;
  Rng rng(seed);
  switch (kind) {
    case RhsKind::ones:
      rhs.f.assign(sys.n, 1.0);
      rhs.g.assign(sys.m, 1.0);
      return rhs;
    case RhsKind::df0g: {
      Vec f0 = rng.uniform_vec(sys.n, -1.0, 1.0);
      rhs.f = f0;
      if (sys.m > 0) {
        // f := (I - B^T L^{-1} C^T) f0, so C^T f = 0 since C^T B^T = L.
        Factorization lfac(sys.L, FactorKind::spd);
        Vec w = lfac.solve(spmv_transposed(sys.C, f0));
        Vec btw = spmv_transposed(sys.B, w);
        axpy(-1.0, btw, rhs.f);
      }
      rhs.g.assign(sys.m, 0.0);
      return rhs;
    }
    case RhsKind::rf0g:
      rhs.f = rng.uniform_vec(sys.n, -1.0, 1.0);
      rhs.g.assign(sys.m, 0.0);
      return rhs;
    case RhsKind::rfrg:
      rhs.f = rng.uniform_vec(sys.n, -1.0, 1.0);
      rhs.g = rng.uniform_vec(sys.m, -1.0, 1.0);
      return rhs;
  }
  require(false, "build_rhs: unknown kind");
  return rhs;
}

enum class Method { cg, minres };

inline std::string method_name(Method m) {
  return m == Method::cg ? "cg" : "minres";
}

/// One benchmark cell: assembles the right-hand side, picks the metric that
/// matches the preconditioner, runs the requested outer iteration from the
/// zero initial guess, and echoes the full configuration in the report.
inline SolveReport solve_case(const SaddleSystem& sys,
                              const PreconditionerConfig& cfg, Method method,
                              RhsKind rhs_kind, std::uint64_t seed = 1234,
                              double tol = 1e-6, std::size_t max_it = 200) {
  Rhs rhs = build_rhs(sys, rhs_kind, seed);
  Vec b = rhs.stacked();

  std::ostringstream cfg_echo;
  cfg_echo << "precond=" << precond_name(cfg.kind) << " k=" << sys.k
           << " eta=" << cfg.eta;
  if (cfg.kind == PrecondKind::Mtri) cfg_echo << " epsilon=" << cfg.epsilon;
  cfg_echo << " method=" << method_name(method)
           << " rhs=" << rhs_name(rhs_kind) << " seed=" << seed
           << " inner="
           << (cfg.inner.mode == InnerPolicy::Mode::exact
                   ? std::string("exact")
                   : "pcg:" + std::to_string(cfg.inner.tol))
           << " tol=" << tol << " max_it=" << max_it;

  if (cfg.kind == PrecondKind::DirectK0) {
    detail::WallClock clock;
    SolveReport report;
    report.algorithm = "direct-nullspace";
    report.config = cfg_echo.str();
    auto sol = direct_solve_k0(sys, rhs.f, rhs.g);
    report.solution = vcat(sol.u, sol.p);
    report.iterations = sol.kernel_cg_iterations;
    report.relative_residuals = {1.0, sol.relative_residual};
    report.converged = sol.relative_residual <= tol && sol.kernel_cg_converged;
    if (!sol.kernel_cg_converged) {
      report.breakdown = true;
      report.breakdown_reason = "kernel CG stagnation";
    }
    report.wall_time = clock.seconds();
    return report;
  }

  Preconditioner prec(sys, cfg);
  prec.reset_stats();
  LinearAction op = [&sys](const Vec& v) { return apply_K(sys, v); };
  LinearAction pc = [&prec](const Vec& v) { return prec.apply(v); };

  const bool classical = cfg.kind == PrecondKind::Mdiag ||
                         cfg.kind == PrecondKind::Mtri;
  InnerProduct ip = classical
                        ? InnerProduct::euclidean()
                        : InnerProduct::h_block(sys, prec.effective_shift());

  SolveReport report = method == Method::cg
                           ? pcg(op, pc, b, ip, tol, max_it)
                           : minres(op, pc, b, ip, tol, max_it);
  report.config = cfg_echo.str();
  if (method == Method::cg && cfg.kind == PrecondKind::Mtri &&
      cfg.epsilon != 1.0 / cfg.eta)
    report.experimental = true;
  report.inner_failures = prec.stats().pcg_failures;
  return report;
}

}  // namespace msp
