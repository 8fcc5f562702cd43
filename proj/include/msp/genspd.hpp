#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "dense.hpp"
#include "eig.hpp"
#include "orth.hpp"

namespace msp {

/// Rectangular saddle-point matrix
///
///     K = [[A, B], [C, D]],   A: m x n,  B: m x k,  C: l x n,  D: l x k,
///
/// square overall (m + l = n + k = t) with a maximally rank-deficient
/// leading block: rank(A) = m + n - t. K is nonsingular exactly when the
/// columns of B restore the rows A misses (rank [A | B] = rank A + k) and
/// the rows of C restore the columns A misses (rank [A; C] = rank A + l);
/// the (2,2) block of the inverse then vanishes identically, whatever D is.
struct GeneralSaddle {
  DenseMatrix A, B, C, D;

  std::size_t m() const { return A.rows(); }
  std::size_t n() const { return A.cols(); }
  std::size_t k() const { return B.cols(); }
  std::size_t l() const { return C.rows(); }
  std::size_t t() const { return m() + l(); }
};

namespace detail {

inline DenseMatrix hcat(const DenseMatrix& A, const DenseMatrix& B) {
  require(A.rows() == B.rows(), "hcat: row count mismatch");
  DenseMatrix out(A.rows(), A.cols() + B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) = A(i, j);
    for (std::size_t j = 0; j < B.cols(); ++j) out(i, A.cols() + j) = B(i, j);
  }
  return out;
}

inline DenseMatrix vcat(const DenseMatrix& A, const DenseMatrix& B) {
  require(A.cols() == B.cols(), "vcat: column count mismatch");
  DenseMatrix out(A.rows() + B.rows(), A.cols());
  for (std::size_t j = 0; j < A.cols(); ++j) {
    for (std::size_t i = 0; i < A.rows(); ++i) out(i, j) = A(i, j);
    for (std::size_t i = 0; i < B.rows(); ++i) out(A.rows() + i, j) = B(i, j);
  }
  return out;
}

inline DenseMatrix gaussian(Rng& rng, std::size_t rows, std::size_t cols) {
  DenseMatrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = rng.normal();
  return out;
}

inline double smallest_singular_value(const DenseMatrix& S) {
  if (S.rows() == 0 || S.cols() == 0) return 0.0;
  const DenseMatrix G = S.transposed() * S;
  const auto eig = eigen_symmetric(G);
  const double lam = eig.values.front();
  return lam > 0.0 ? std::sqrt(lam) : 0.0;
}

}  // namespace detail

inline GeneralSaddle make_general_saddle(DenseMatrix A, DenseMatrix B,
                                         DenseMatrix C, DenseMatrix D) {
  require(B.rows() == A.rows(), "general saddle: B must have m rows");
  require(C.cols() == A.cols(), "general saddle: C must have n columns");
  require(D.rows() == C.rows() && D.cols() == B.cols(),
          "general saddle: D must be l x k");
  require(A.rows() + C.rows() == A.cols() + B.cols(),
          "general saddle: m + l must equal n + k");
  return GeneralSaddle{std::move(A), std::move(B), std::move(C), std::move(D)};
}

/// The assembled t x t matrix [[A, B], [C, D]].
inline DenseMatrix block_matrix(const GeneralSaddle& gs) {
  return detail::vcat(detail::hcat(gs.A, gs.B), detail::hcat(gs.C, gs.D));
}

/// Rank bookkeeping for the nonsingularity conditions. `leading_rank_ok`
/// is the maximal-deficiency requirement on A; the two `completes_*` flags
/// say that B's columns meet A's range only at the origin and likewise for
/// C's rows against A's row space.
struct ConditionReport {
  std::size_t rank_A = 0;
  std::size_t rank_B = 0;
  std::size_t rank_C = 0;
  std::size_t expected_rank_A = 0;
  bool leading_rank_ok = false;
  bool b_full_rank = false;
  bool c_full_rank = false;
  bool b_completes_columns = false;
  bool c_completes_rows = false;

  bool all() const {
    return leading_rank_ok && b_full_rank && c_full_rank &&
           b_completes_columns && c_completes_rows;
  }
};

inline ConditionReport check_conditions(const GeneralSaddle& gs) {
  ConditionReport rep;
  rep.rank_A = numerical_rank(gs.A);
  rep.rank_B = numerical_rank(gs.B);
  rep.rank_C = numerical_rank(gs.C);
  rep.expected_rank_A = gs.m() + gs.n() - gs.t();
  rep.leading_rank_ok = rep.rank_A == rep.expected_rank_A;
  rep.b_full_rank = rep.rank_B == gs.k();
  rep.c_full_rank = rep.rank_C == gs.l();
  rep.b_completes_columns =
      numerical_rank(detail::hcat(gs.A, gs.B)) == rep.rank_A + gs.k();
  rep.c_completes_rows =
      numerical_rank(detail::vcat(gs.A, gs.C)) == rep.rank_A + gs.l();
  return rep;
}

/// Null-space data of the leading block: C_r (n x l) has full column rank
/// with A C_r = 0, C_l (k x m) has full row rank with C_l A = 0, and the
/// small coupling matrices L_l = C_l B (k x k) and L_r = C C_r (l x l) are
/// nonsingular whenever the rank conditions hold.
struct NullData {
  DenseMatrix C_r;
  DenseMatrix C_l;
  DenseMatrix L_l;
  DenseMatrix L_r;
};

inline NullData build_null_data(const GeneralSaddle& gs) {
  const ConditionReport cond = check_conditions(gs);
  if (!cond.all()) {
    std::string what = "build_null_data: rank conditions violated:";
    if (!cond.leading_rank_ok)
      what += " rank(A) = " + std::to_string(cond.rank_A) + ", expected " +
              std::to_string(cond.expected_rank_A) + ";";
    if (!cond.b_full_rank)
      what += " rank(B) = " + std::to_string(cond.rank_B) + ", expected " +
              std::to_string(gs.k()) + ";";
    if (!cond.c_full_rank)
      what += " rank(C) = " + std::to_string(cond.rank_C) + ", expected " +
              std::to_string(gs.l()) + ";";
    if (!cond.b_completes_columns)
      what += " columns of B intersect the range of A;";
    if (!cond.c_completes_rows)
      what += " rows of C intersect the row space of A;";
    throw std::invalid_argument(what);
  }

  NullData nd;
  const NullBasisPair bases = null_basis(gs.A);
  nd.C_r = bases.right_basis;
  nd.C_l = bases.left_basis;
  require(nd.C_r.cols() == gs.l(),
          "build_null_data: right null space dimension mismatch");
  require(nd.C_l.rows() == gs.k(),
          "build_null_data: left null space dimension mismatch");
  nd.L_l = nd.C_l * gs.B;
  nd.L_r = gs.C * nd.C_r;

  const double sl = detail::smallest_singular_value(nd.L_l);
  const double sr = detail::smallest_singular_value(nd.L_r);
  if (gs.k() > 0)
    require(sl > 1e-10 * std::max(nd.L_l.norm_frobenius(), 1e-300),
            "build_null_data: coupling matrix C_l * B is numerically singular");
  if (gs.l() > 0)
    require(sr > 1e-10 * std::max(nd.L_r.norm_frobenius(), 1e-300),
            "build_null_data: coupling matrix C * C_r is numerically singular");
  return nd;
}

namespace detail {

/// The four inverse blocks assembled as one t x t matrix:
/// [[N, C_r L_r^{-1}], [L_l^{-1} C_l, 0]].
inline DenseMatrix assemble_inverse(const GeneralSaddle& gs, const NullData& nd,
                                    const DenseMatrix& N) {
  const DenseMatrix top_right =
      gs.l() > 0 ? nd.C_r * DenseLU(nd.L_r).inverse()
                 : DenseMatrix(gs.n(), 0);
  const DenseMatrix bottom_left =
      gs.k() > 0 ? DenseLU(nd.L_l).solve(nd.C_l) : DenseMatrix(0, gs.m());
  const DenseMatrix zero(gs.k(), gs.l());
  return vcat(hcat(N, top_right), hcat(bottom_left, zero));
}

}  // namespace detail

/// Inverse through the null-space data. For square A (m = n) the leading
/// inverse block is
///
///     N = (A + X C)^{-1} (I - B L_l^{-1} C_l - X D L_l^{-1} C_l)
///
/// for any X that makes A + X C nonsingular; the default X = C_r is tried
/// first and seeded Gaussian fallbacks cover the rare singular draw. For
/// rectangular A the same block is reached through the pseudoinverse of A
/// combined with the null-space forms of the two projected-block inverses.
inline DenseMatrix inverse_via_nullspace(
    const GeneralSaddle& gs, const NullData& nd,
    const std::optional<DenseMatrix>& X_user = std::nullopt) {
  const std::size_t m = gs.m(), n = gs.n(), k = gs.k(), l = gs.l();
  const DenseMatrix bottom_left =
      k > 0 ? DenseLU(nd.L_l).solve(nd.C_l) : DenseMatrix(0, m);

  if (m == n) {
    // Candidate X list: the caller's choice, then C_r, then seeded draws.
    std::vector<DenseMatrix> candidates;
    if (X_user) {
      require(X_user->rows() == m && X_user->cols() == l,
              "inverse_via_nullspace: X must be m x l");
      candidates.push_back(*X_user);
    }
    candidates.push_back(nd.C_r);
    const int max_attempts = 5;
    for (int seed = 1; static_cast<int>(candidates.size()) < max_attempts;
         ++seed) {
      Rng rng(7710u + static_cast<std::uint64_t>(seed));
      candidates.push_back(detail::gaussian(rng, m, l));
    }

    // I - (B + X D) L_l^{-1} C_l, shared structure across candidates.
    int attempts = 0;
    for (const DenseMatrix& X : candidates) {
      ++attempts;
      try {
        DenseLU lu(gs.A + X * gs.C);
        DenseMatrix rhs = DenseMatrix::identity(n);
        if (k > 0) rhs = rhs - (gs.B + X * gs.D) * bottom_left;
        return detail::assemble_inverse(gs, nd, lu.solve(rhs));
      } catch (const SingularError&) {
        continue;
      }
    }
    throw SingularError(
        "inverse_via_nullspace: A + X C numerically singular for every "
        "candidate X after " +
        std::to_string(attempts) + " attempts");
  }

  // Rectangular leading block: go through the pseudoinverse of A but keep
  // the projected-block inverses in their null-space form.
  const DenseMatrix Ap = pseudo_inverse(gs.A);
  const DenseMatrix B0p = bottom_left;                       // k x m
  const DenseMatrix C0p =
      l > 0 ? nd.C_r * DenseLU(nd.L_r).inverse() : DenseMatrix(n, 0);
  const DenseMatrix V = Ap - Ap * gs.B * B0p - C0p * gs.C * Ap;
  const DenseMatrix T = V + C0p * gs.C * Ap * gs.B * B0p;
  const DenseMatrix N = T - C0p * gs.D * B0p;
  return detail::assemble_inverse(gs, nd, N);
}

/// Inverse assembled purely from Moore-Penrose pseudoinverses:
///
///     N  = A^+ - A^+ B B0^+ - C0^+ C A^+ - C0^+ (D - C A^+ B) B0^+,
///     B0 = (I - A A^+) B,   C0 = C (I - A^+ A),
///
/// with C0^+ and B0^+ as the off-diagonal blocks and 0 in the (2,2) slot.
inline DenseMatrix inverse_via_pseudoinverse(const GeneralSaddle& gs) {
  const std::size_t m = gs.m(), n = gs.n(), k = gs.k(), l = gs.l();
  const DenseMatrix Ap = pseudo_inverse(gs.A);
  const DenseMatrix EA = DenseMatrix::identity(m) - gs.A * Ap;
  const DenseMatrix FA = DenseMatrix::identity(n) - Ap * gs.A;
  const DenseMatrix B0 = EA * gs.B;
  const DenseMatrix C0 = gs.C * FA;
  const DenseMatrix B0p = pseudo_inverse(B0);  // k x m
  const DenseMatrix C0p = pseudo_inverse(C0);  // n x l
  const DenseMatrix N = Ap - Ap * gs.B * B0p - C0p * gs.C * Ap -
                        C0p * (gs.D - gs.C * Ap * gs.B) * B0p;
  const DenseMatrix zero(k, l);
  return detail::vcat(detail::hcat(N, C0p), detail::hcat(B0p, zero));
}

/// One named residual in the identity audit below.
struct IdentityCheck {
  std::string name;
  double residual = 0.0;
  bool pass = false;
};

struct InverseIdentityReport {
  std::vector<IdentityCheck> checks;
  double tol = 1e-9;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

/// Audits the full identity suite connecting the pseudoinverse route with
/// the null-space route: the projected-block pseudoinverses collapse to
/// L_l^{-1} C_l and C_r L_r^{-1}, the three leading-block candidates V, T,
/// N share their one-sided inverse actions, the annihilation and coupling
/// relations hold, and the one-sided actions survive perturbing A by B Y
/// or X C with random Y, X. Each check reports a relative residual against
/// the 1e-9 audit tolerance.
inline InverseIdentityReport verify_inverse_identities(const GeneralSaddle& gs,
                                                       const NullData& nd,
                                                       std::uint64_t seed = 2024) {
  const std::size_t m = gs.m(), n = gs.n(), k = gs.k(), l = gs.l();
  InverseIdentityReport rep;
  auto push = [&rep](const std::string& name, const DenseMatrix& diff,
                     double scale) {
    IdentityCheck c;
    c.name = name;
    c.residual = diff.norm_frobenius() / std::max(scale, 1.0);
    c.pass = c.residual <= rep.tol;
    rep.checks.push_back(std::move(c));
  };
  // Pseudoinverse-route quantities.
  const DenseMatrix Ap = pseudo_inverse(gs.A);
  const DenseMatrix EA = DenseMatrix::identity(m) - gs.A * Ap;
  const DenseMatrix FA = DenseMatrix::identity(n) - Ap * gs.A;
  const DenseMatrix B0 = EA * gs.B;
  const DenseMatrix C0 = gs.C * FA;
  const DenseMatrix B0p = pseudo_inverse(B0);
  const DenseMatrix C0p = pseudo_inverse(C0);

  // Null-space-route counterparts.
  const DenseMatrix Ll_inv_Cl =
      k > 0 ? DenseLU(nd.L_l).solve(nd.C_l) : DenseMatrix(0, m);
  const DenseMatrix Cr_Lr_inv =
      l > 0 ? nd.C_r * DenseLU(nd.L_r).inverse() : DenseMatrix(n, 0);

  // Residuals are scaled by the size of the operands entering each product,
  // so a fixed 1e-9 tolerance stays meaningful when a random instance is
  // poorly conditioned and the pseudoinverses carry large norms.
  const double cond_A = gs.A.norm_frobenius() * Ap.norm_frobenius();
  const double cond_B0 = B0.norm_frobenius() * B0p.norm_frobenius();
  const double cond_C0 = C0.norm_frobenius() * C0p.norm_frobenius();

  push("projected column block pseudoinverse equals L_l^{-1} C_l",
       B0p - Ll_inv_Cl,
       Ll_inv_Cl.norm_frobenius() * std::max(1.0, cond_B0));
  push("projected row block pseudoinverse equals C_r L_r^{-1}",
       C0p - Cr_Lr_inv,
       Cr_Lr_inv.norm_frobenius() * std::max(1.0, cond_C0));

  // Range and row-space projector factorizations through the null bases.
  push("I - A A^+ equals C_l^+ C_l", EA - pseudo_inverse(nd.C_l) * nd.C_l,
       cond_A);
  push("I - A^+ A equals C_r C_r^+", FA - nd.C_r * pseudo_inverse(nd.C_r),
       cond_A);

  // Leading-block candidates and their shared one-sided actions.
  const DenseMatrix V = Ap - Ap * gs.B * B0p - C0p * gs.C * Ap;
  const DenseMatrix T = V + C0p * gs.C * Ap * gs.B * B0p;
  const DenseMatrix N = T - C0p * gs.D * B0p;
  const DenseMatrix left = DenseMatrix::identity(n) - Cr_Lr_inv * gs.C;
  const DenseMatrix right = DenseMatrix::identity(m) - gs.B * Ll_inv_Cl;

  const double nA = gs.A.norm_frobenius();
  auto action_scale = [&](const DenseMatrix& lead, const DenseMatrix& target) {
    return std::max(lead.norm_frobenius() * nA, target.norm_frobenius());
  };
  push("N A matches the left projector", N * gs.A - left, action_scale(N, left));
  push("T A matches the left projector", T * gs.A - left, action_scale(T, left));
  push("V A matches the left projector", V * gs.A - left, action_scale(V, left));
  push("A N matches the right projector", gs.A * N - right,
       action_scale(N, right));
  push("A T matches the right projector", gs.A * T - right,
       action_scale(T, right));
  push("A V matches the right projector", gs.A * V - right,
       action_scale(V, right));

  push("T B vanishes", T * gs.B, std::max(T.norm_frobenius(), 1.0) *
                                     std::max(gs.B.norm_frobenius(), 1.0));
  push("C T vanishes", gs.C * T, std::max(T.norm_frobenius(), 1.0) *
                                     std::max(gs.C.norm_frobenius(), 1.0));
  push("N B equals -C0^+ D", N * gs.B + C0p * gs.D,
       std::max(N.norm_frobenius() * gs.B.norm_frobenius(),
                1.0 + gs.D.norm_frobenius()));
  push("C N equals -D B0^+", gs.C * N + gs.D * B0p,
       std::max(gs.C.norm_frobenius() * N.norm_frobenius(),
                1.0 + gs.D.norm_frobenius()));

  // One-sided inverse actions under random perturbations of A.
  Rng rng(seed);
  const DenseMatrix Y = detail::gaussian(rng, k, n);
  const DenseMatrix X = detail::gaussian(rng, m, l);
  const DenseMatrix left_perturbed = left - Cr_Lr_inv * gs.D * Y;
  const DenseMatrix right_perturbed = right - X * gs.D * Ll_inv_Cl;
  const DenseMatrix A_BY = gs.A + gs.B * Y;
  const DenseMatrix A_XC = gs.A + X * gs.C;
  push("N (A + B Y) keeps the left action", N * A_BY - left_perturbed,
       std::max(N.norm_frobenius() * A_BY.norm_frobenius(),
                left_perturbed.norm_frobenius()));
  push("(A + X C) N keeps the right action", A_XC * N - right_perturbed,
       std::max(A_XC.norm_frobenius() * N.norm_frobenius(),
                right_perturbed.norm_frobenius()));

  // Pseudoinverse axioms for every pseudoinverse in play.
  auto axioms = [&push](const std::string& label, const DenseMatrix& S,
                        const DenseMatrix& Sp) {
    const double cond = std::max(1.0, S.norm_frobenius() * Sp.norm_frobenius());
    push("pseudoinverse axioms (S S^+ S = S) for " + label, S * Sp * S - S,
         std::max(S.norm_frobenius(), 1.0) * cond);
    push("pseudoinverse axioms (S^+ S S^+ = S^+) for " + label,
         Sp * S * Sp - Sp, std::max(Sp.norm_frobenius(), 1.0) * cond);
    push("pseudoinverse axioms (S S^+ symmetric) for " + label,
         S * Sp - (S * Sp).transposed(), cond);
    push("pseudoinverse axioms (S^+ S symmetric) for " + label,
         Sp * S - (Sp * S).transposed(), cond);
  };
  axioms("A", gs.A, Ap);
  if (k > 0) axioms("the projected column block", B0, B0p);
  if (l > 0) axioms("the projected row block", C0, C0p);

  return rep;
}

/// Deterministic random instance with the exact rank pattern: A = P Q with
/// P (m x r), Q (r x n), r = m + n - t, so rank(A) = r for a generic draw;
/// generic B, C, D then satisfy the completion conditions with probability
/// one, and the construction retries (still deterministically) on the
/// measure-zero failures before giving up.
inline GeneralSaddle random_admissible(std::size_t m, std::size_t n,
                                       std::size_t k, std::size_t l,
                                       std::uint64_t seed) {
  if (m + l != n + k)
    throw std::invalid_argument("random_admissible: m + l must equal n + k");
  if (k > m || l > n)
    throw std::invalid_argument(
        "random_admissible: need k <= m and l <= n for a maximally "
        "rank-deficient leading block");
  const std::size_t r = m - k;  // = n - l = m + n - t

  Rng rng(seed);
  for (int attempt = 0; attempt < 8; ++attempt) {
    DenseMatrix A(m, n);
    if (r > 0) {
      const DenseMatrix P = detail::gaussian(rng, m, r);
      const DenseMatrix Q = detail::gaussian(rng, r, n);
      A = P * Q;
    }
    GeneralSaddle gs = make_general_saddle(
        std::move(A), detail::gaussian(rng, m, k), detail::gaussian(rng, l, n),
        detail::gaussian(rng, l, k));
    if (check_conditions(gs).all()) return gs;
  }
  throw std::runtime_error(
      "random_admissible: failed to draw an admissible instance");
}

}  // namespace msp
