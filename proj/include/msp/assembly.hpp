#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "msp/eig.hpp"
#include "msp/factorization.hpp"
#include "msp/mesh.hpp"
#include "msp/orth.hpp"
#include "msp/sparse.hpp"

namespace msp {

/// Interior-DOF numbering. Boundary edges and vertices carry no DOF; the
/// tangential field and the potential vanish there.
struct DofMaps {
  static constexpr std::size_t none = SIZE_MAX;
  std::vector<std::size_t> edge_to_dof;    // size n_edges, `none` on boundary
  std::vector<std::size_t> vertex_to_dof;  // size n_vertices, `none` on boundary
  std::size_t n = 0;  // interior edges
  std::size_t m = 0;  // interior vertices
};

inline DofMaps build_dof_maps(const Mesh& mesh) {
  DofMaps maps;
  maps.edge_to_dof.assign(mesh.n_edges(), DofMaps::none);
  maps.vertex_to_dof.assign(mesh.n_vertices(), DofMaps::none);
  for (std::size_t e = 0; e < mesh.n_edges(); ++e)
    if (!mesh.boundary_edge[e]) maps.edge_to_dof[e] = maps.n++;
  for (std::size_t v = 0; v < mesh.n_vertices(); ++v)
    if (!mesh.boundary_vertex[v]) maps.vertex_to_dof[v] = maps.m++;
  return maps;
}

namespace detail {

struct TriangleGeometry {
  double area = 0.0;
  std::array<std::array<double, 2>, 3> grad_lambda{};  // barycentric gradients
};

inline TriangleGeometry triangle_geometry(const Mesh& mesh, std::size_t t) {
  TriangleGeometry geo;
  geo.area = mesh.signed_area(t);
  require(geo.area > 0.0, "triangle_geometry: degenerate triangle");
  const auto& tri = mesh.triangles[t];
  for (int i = 0; i < 3; ++i) {
    const auto& pn = mesh.vertices[tri[(i + 1) % 3]];
    const auto& pp = mesh.vertices[tri[(i + 2) % 3]];
    geo.grad_lambda[i] = {(pn[1] - pp[1]) / (2.0 * geo.area),
                          (pp[0] - pn[0]) / (2.0 * geo.area)};
  }
  return geo;
}

/// Local mass matrix of the three cyclic-edge basis functions
/// W_e = lambda_p grad(lambda_q) - lambda_q grad(lambda_p), exact for the
/// degree-2 integrand.
inline std::array<std::array<double, 3>, 3> local_edge_mass(
    const TriangleGeometry& geo) {
  auto g = [&](int a, int b) {
    return geo.grad_lambda[a][0] * geo.grad_lambda[b][0] +
           geo.grad_lambda[a][1] * geo.grad_lambda[b][1];
  };
  auto I = [&](int a, int b) { return geo.area * (a == b ? 2.0 : 1.0) / 12.0; };
  std::array<std::array<double, 3>, 3> local{};
  for (int i = 0; i < 3; ++i) {
    const int pi = i, qi = (i + 1) % 3;
    for (int j = 0; j < 3; ++j) {
      const int pj = j, qj = (j + 1) % 3;
      local[i][j] = g(qi, qj) * I(pi, pj) - g(qi, pj) * I(pi, qj) -
                    g(pi, qj) * I(qi, pj) + g(pi, pj) * I(qi, qj);
    }
  }
  return local;
}

}  // namespace detail

/// Curl-curl stiffness matrix on interior edge DOFs. The curl of each
/// cyclic-edge basis function is the constant 1/area, so the local matrix
/// is s s^T / area with s the orientation signs.
inline SparseMatrix assemble_curlcurl(const Mesh& mesh, const DofMaps& maps) {
  SparseBuilder builder(maps.n, maps.n);
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    const double area = mesh.signed_area(t);
    require(area > 0.0, "assemble_curlcurl: degenerate triangle");
    for (int i = 0; i < 3; ++i) {
      const std::size_t di = maps.edge_to_dof[mesh.triangle_edge[t][i]];
      if (di == DofMaps::none) continue;
      for (int j = 0; j < 3; ++j) {
        const std::size_t dj = maps.edge_to_dof[mesh.triangle_edge[t][j]];
        if (dj == DofMaps::none) continue;
        const double v = mesh.triangle_edge_sign[t][i] *
                         mesh.triangle_edge_sign[t][j] / area;
        builder.add(di, dj, v);
      }
    }
  }
  return builder.compress();
}

/// Edge-element mass matrix on interior edge DOFs.
inline SparseMatrix assemble_edge_mass(const Mesh& mesh, const DofMaps& maps) {
  SparseBuilder builder(maps.n, maps.n);
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    const auto geo = detail::triangle_geometry(mesh, t);
    const auto local = detail::local_edge_mass(geo);
    for (int i = 0; i < 3; ++i) {
      const std::size_t di = maps.edge_to_dof[mesh.triangle_edge[t][i]];
      if (di == DofMaps::none) continue;
      for (int j = 0; j < 3; ++j) {
        const std::size_t dj = maps.edge_to_dof[mesh.triangle_edge[t][j]];
        if (dj == DofMaps::none) continue;
        builder.add(di, dj,
                    mesh.triangle_edge_sign[t][i] * mesh.triangle_edge_sign[t][j] *
                        local[i][j]);
      }
    }
  }
  return builder.compress();
}

/// Discrete gradient C (n x m): the edge DOF of a nodal gradient is the
/// potential difference along the oriented edge, +1 at the head vertex and
/// -1 at the tail when interior.
inline SparseMatrix discrete_gradient(const Mesh& mesh, const DofMaps& maps) {
  SparseBuilder builder(maps.n, maps.m);
  for (std::size_t e = 0; e < mesh.n_edges(); ++e) {
    const std::size_t de = maps.edge_to_dof[e];
    if (de == DofMaps::none) continue;
    const std::size_t tail = maps.vertex_to_dof[mesh.edges[e][0]];
    const std::size_t head = maps.vertex_to_dof[mesh.edges[e][1]];
    if (tail != DofMaps::none) builder.add(de, tail, -1.0);
    if (head != DofMaps::none) builder.add(de, head, +1.0);
  }
  return builder.compress();
}

/// Assembled saddle-point data: curl-curl A, edge mass M, discrete gradient
/// C, the derived constraint matrix B = (MC)^T and scalar Laplacian L = BC,
/// plus the wave number k of the shifted block A - k^2 M.
struct SaddleSystem {
  SparseMatrix A;  // n x n, symmetric positive semidefinite
  SparseMatrix M;  // n x n, symmetric positive definite
  SparseMatrix C;  // n x m
  SparseMatrix B;  // m x n
  SparseMatrix L;  // m x m, symmetric positive definite
  std::size_t n = 0;
  std::size_t m = 0;
  double k = 0.0;

  std::size_t total_size() const { return n + m; }
};

inline void derive_B_and_L(const SparseMatrix& M, const SparseMatrix& C,
                           SparseMatrix& B, SparseMatrix& L) {
  require(M.n_cols == C.n_rows, "derive_B_and_L: dimension mismatch");
  B = sparse_transpose(sparse_product(M, C));
  L = sparse_product(B, C);
}

inline SaddleSystem assemble_system(const Mesh& mesh, double k) {
  const DofMaps maps = build_dof_maps(mesh);
  SaddleSystem sys;
  sys.n = maps.n;
  sys.m = maps.m;
  sys.k = k;
  sys.A = assemble_curlcurl(mesh, maps);
  sys.M = assemble_edge_mass(mesh, maps);
  sys.C = discrete_gradient(mesh, maps);
  derive_B_and_L(sys.M, sys.C, sys.B, sys.L);
  return sys;
}

/// One named structural check with its residual.
struct StructureCheck {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct StructureReport {
  std::vector<StructureCheck> checks;
  bool all_pass = true;

  void add(const std::string& name, double residual, double tol) {
    checks.push_back({name, residual, tol, residual <= tol});
    if (residual > tol) all_pass = false;
  }
};

/// Residual checks of the algebraic structure: the gradient fields are
/// curl-free, B and L are consistent with M and C, the space splits into
/// ker(A) + ker(B), gradient and solenoidal parts are M-orthogonal, and on
/// ker(A) the operator B^T L^{-1} B acts as M.
inline StructureReport verify_structure(const SaddleSystem& sys,
                                        double tol = 1e-10,
                                        std::size_t n_samples = 20,
                                        std::uint64_t seed = 1234) {
  StructureReport report;
  const double a_scale = std::max(1.0, sparse_norm_max(sys.A));
  const double m_scale = std::max(1.0, sparse_norm_max(sys.M));

  // AC = 0.
  double r_ac = 0.0;
  if (sys.m > 0) r_ac = sparse_norm_max(sparse_product(sys.A, sys.C));
  report.add("curl of gradients vanishes (AC=0)", r_ac / a_scale, tol);

  // MC = B^T and L = BC.
  double r_mc = 0.0, r_l = 0.0;
  if (sys.m > 0) {
    auto MC = sparse_product(sys.M, sys.C);
    auto Bt = sparse_transpose(sys.B);
    r_mc = sparse_norm_max(sparse_add(1.0, MC, -1.0, Bt));
    auto BC = sparse_product(sys.B, sys.C);
    r_l = sparse_norm_max(sparse_add(1.0, sys.L, -1.0, BC));
  }
  report.add("B matches (MC)^T", r_mc / m_scale, tol);
  report.add("L matches BC", r_l / m_scale, tol);

  // Kernel dimensions via dense rank.
  const std::size_t rank_a = numerical_rank(to_dense(sys.A));
  report.add("dim ker(A) equals interior vertex count",
             double(sys.n - rank_a) - double(sys.m) == 0.0 ? 0.0 : 1.0, 0.5);
  std::size_t rank_b = 0;
  if (sys.m > 0) rank_b = numerical_rank(to_dense(sys.B));
  const std::size_t null_b = sys.n - rank_b;
  report.add("dim ker(A) + dim ker(B) equals n",
             double((sys.n - rank_a) + null_b) - double(sys.n) == 0.0 ? 0.0 : 1.0,
             0.5);

  if (sys.m > 0) {
    Factorization lfac(sys.L, FactorKind::spd);
    Rng rng(seed);
    double worst_orth = 0.0, worst_ident = 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) {
      // u_a in range(C), u_b in ker(B) via the projector I - C L^{-1} B.
      Vec z = rng.normal_vec(sys.m);
      Vec u_a = spmv(sys.C, z);
      Vec w = rng.normal_vec(sys.n);
      Vec u_b = vdiff(w, spmv(sys.C, lfac.solve(spmv(sys.B, w))));

      const double denom =
          std::max(1e-300, norm2(u_a) * norm2(u_b) * sparse_norm_max(sys.M));
      worst_orth = std::max(
          worst_orth, std::abs(dot(u_a, spmv(sys.M, u_b))) / denom);

      Vec g = spmv(sys.B, u_a);
      Vec lhs = spmv_transposed(sys.B, lfac.solve(g));
      Vec rhs = spmv(sys.M, u_a);
      worst_ident =
          std::max(worst_ident, norm_inf(vdiff(lhs, rhs)) /
                                    std::max(1e-300, norm_inf(rhs)));
    }
    report.add("gradient and solenoidal parts are M-orthogonal", worst_orth, tol);
    report.add("B^T L^{-1} B acts as M on gradients", worst_ident, tol);
  } else {
    report.add("gradient and solenoidal parts are M-orthogonal", 0.0, tol);
    report.add("B^T L^{-1} B acts as M on gradients", 0.0, tol);
  }
  return report;
}

}  // namespace msp
