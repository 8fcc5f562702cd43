#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "msp/common.hpp"

namespace msp {

/// Conforming 2D triangulation with globally oriented edges. Edges run from
/// the lower vertex index to the higher; triangle_edge records, per triangle,
/// the edge index and whether the local counterclockwise traversal agrees
/// with that global orientation.
struct Mesh {
  std::vector<std::array<double, 2>> vertices;
  std::vector<std::array<std::size_t, 3>> triangles;  // counterclockwise
  std::vector<std::array<std::size_t, 2>> edges;      // low index -> high index
  std::vector<std::array<std::size_t, 3>> triangle_edge;
  std::vector<std::array<int, 3>> triangle_edge_sign;
  std::vector<bool> boundary_vertex;
  std::vector<bool> boundary_edge;

  std::size_t n_vertices() const { return vertices.size(); }
  std::size_t n_triangles() const { return triangles.size(); }
  std::size_t n_edges() const { return edges.size(); }

  /// Interior-edge DOF count.
  std::size_t n_interior_edges() const {
    std::size_t n = 0;
    for (bool b : boundary_edge)
      if (!b) ++n;
    return n;
  }

  /// Interior-vertex DOF count.
  std::size_t n_interior_vertices() const {
    std::size_t m = 0;
    for (bool b : boundary_vertex)
      if (!b) ++m;
    return m;
  }

  double signed_area(std::size_t t) const {
    const auto& tri = triangles[t];
    const auto& a = vertices[tri[0]];
    const auto& b = vertices[tri[1]];
    const auto& c = vertices[tri[2]];
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
  }

  double edge_length(std::size_t e) const {
    const auto& a = vertices[edges[e][0]];
    const auto& b = vertices[edges[e][1]];
    return std::hypot(b[0] - a[0], b[1] - a[1]);
  }

  double min_edge_length() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < n_edges(); ++e) m = std::min(m, edge_length(e));
    return m;
  }

  double max_edge_length() const {
    double m = 0.0;
    for (std::size_t e = 0; e < n_edges(); ++e) m = std::max(m, edge_length(e));
    return m;
  }
};

struct MeshStats {
  std::size_t vertices = 0, edges = 0, triangles = 0;
  std::size_t n = 0, m = 0;  // interior edges / interior vertices
  double min_edge = 0.0, max_edge = 0.0;
};

inline MeshStats mesh_statistics(const Mesh& mesh) {
  MeshStats s;
  s.vertices = mesh.n_vertices();
  s.edges = mesh.n_edges();
  s.triangles = mesh.n_triangles();
  s.n = mesh.n_interior_edges();
  s.m = mesh.n_interior_vertices();
  s.min_edge = mesh.min_edge_length();
  s.max_edge = mesh.max_edge_length();
  return s;
}

namespace detail {

/// Derives edges, orientation signs, and boundary flags from vertices and
/// counterclockwise triangles. Triangles with negative area are flipped;
/// zero area is rejected.
inline void finalize_mesh(Mesh& mesh) {
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    double a2 = mesh.signed_area(t);
    if (a2 < 0.0) {
      std::swap(mesh.triangles[t][1], mesh.triangles[t][2]);
      a2 = -a2;
    }
    require(a2 > 0.0, "mesh: degenerate triangle " + std::to_string(t));
  }

  std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_of;
  mesh.edges.clear();
  mesh.triangle_edge.assign(mesh.n_triangles(), {0, 0, 0});
  mesh.triangle_edge_sign.assign(mesh.n_triangles(), {0, 0, 0});
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int le = 0; le < 3; ++le) {
      const std::size_t a = tri[le];
      const std::size_t b = tri[(le + 1) % 3];
      const auto key = std::minmax(a, b);
      auto [it, inserted] = edge_of.try_emplace(key, mesh.edges.size());
      if (inserted) mesh.edges.push_back({key.first, key.second});
      mesh.triangle_edge[t][le] = it->second;
      mesh.triangle_edge_sign[t][le] = (a < b) ? +1 : -1;
    }
  }

  std::vector<int> incidence(mesh.n_edges(), 0);
  for (const auto& te : mesh.triangle_edge)
    for (std::size_t e : te) ++incidence[e];
  mesh.boundary_edge.assign(mesh.n_edges(), false);
  mesh.boundary_vertex.assign(mesh.n_vertices(), false);
  for (std::size_t e = 0; e < mesh.n_edges(); ++e) {
    require(incidence[e] == 1 || incidence[e] == 2,
            "mesh: edge shared by " + std::to_string(incidence[e]) + " triangles");
    if (incidence[e] == 1) {
      mesh.boundary_edge[e] = true;
      mesh.boundary_vertex[mesh.edges[e][0]] = true;
      mesh.boundary_vertex[mesh.edges[e][1]] = true;
    }
  }
}

/// Breakpoints of [lo, hi] after `splits` rounds of bisection in which the
/// interval adjacent to the graded end splits at fraction g/2 toward that
/// end and every other interval splits evenly. With g = 1 the result is the
/// uniform ladder; for g < 1 the cell sizes at the graded end shrink by an
/// extra factor g per round.
inline std::vector<double> graded_ladder(double lo, double hi, int splits,
                                         double g, bool grade_toward_lo) {
  std::vector<double> pts{lo, hi};
  for (int s = 0; s < splits; ++s) {
    std::vector<double> next;
    next.reserve(2 * pts.size());
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const double a = pts[i], b = pts[i + 1];
      const bool graded_cell = grade_toward_lo ? (i == 0) : (i + 2 == pts.size());
      double mid;
      if (!graded_cell)
        mid = a + 0.5 * (b - a);
      else if (grade_toward_lo)
        mid = a + 0.5 * g * (b - a);
      else
        mid = b - 0.5 * g * (b - a);
      next.push_back(a);
      next.push_back(mid);
    }
    next.push_back(pts.back());
    pts = std::move(next);
  }
  return pts;
}

/// Triangulates the tensor grid xs x ys into counterclockwise triangles,
/// sharing vertices with previously meshed patches through `vertex_of`.
inline void add_patch(Mesh& mesh,
                      std::map<std::pair<double, double>, std::size_t>& vertex_of,
                      const std::vector<double>& xs, const std::vector<double>& ys) {
  auto vid = [&](double x, double y) {
    auto [it, inserted] = vertex_of.try_emplace({x, y}, mesh.vertices.size());
    if (inserted) mesh.vertices.push_back({x, y});
    return it->second;
  };
  for (std::size_t j = 0; j + 1 < ys.size(); ++j)
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      const std::size_t v00 = vid(xs[i], ys[j]);
      const std::size_t v10 = vid(xs[i + 1], ys[j]);
      const std::size_t v11 = vid(xs[i + 1], ys[j + 1]);
      const std::size_t v01 = vid(xs[i], ys[j + 1]);
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }
}

}  // namespace detail

/// Triangulation of the square (-1,1)^2 with 2^(levels-1) cells per side.
/// Grading < 1 concentrates cells at the four corners; each refinement
/// level shrinks the corner cells by an extra factor `grading`.
inline Mesh gen_square(int levels, double grading) {
  require(levels >= 1, "gen_square: levels must be >= 1");
  require(grading > 0.0 && grading <= 1.0, "gen_square: grading must be in (0,1]");
  Mesh mesh;
  std::map<std::pair<double, double>, std::size_t> vertex_of;
  if (levels == 1) {
    detail::add_patch(mesh, vertex_of, {-1.0, 1.0}, {-1.0, 1.0});
  } else {
    // Mirror a half-axis ladder graded toward the outer end, so cells
    // shrink toward all four corners.
    auto half = detail::graded_ladder(0.0, 1.0, levels - 2, grading, false);
    std::vector<double> axis;
    for (std::size_t i = half.size(); i-- > 0;) axis.push_back(-half[i]);
    for (std::size_t i = 1; i < half.size(); ++i) axis.push_back(half[i]);
    detail::add_patch(mesh, vertex_of, axis, axis);
  }
  detail::finalize_mesh(mesh);
  return mesh;
}

/// Triangulation of the L-shaped domain (-1,1)^2 minus the fourth quadrant,
/// built from three unit squares with 2^(levels-1) cells per side each.
/// Grading < 1 concentrates cells at the re-entrant corner (the origin).
inline Mesh gen_lshape(int levels, double grading) {
  require(levels >= 1, "gen_lshape: levels must be >= 1");
  require(grading > 0.0 && grading <= 1.0, "gen_lshape: grading must be in (0,1]");
  const int splits = levels - 1;
  auto neg = detail::graded_ladder(-1.0, 0.0, splits, grading, false);  // toward 0
  auto pos = detail::graded_ladder(0.0, 1.0, splits, grading, true);    // toward 0
  Mesh mesh;
  std::map<std::pair<double, double>, std::size_t> vertex_of;
  detail::add_patch(mesh, vertex_of, neg, neg);  // lower-left square
  detail::add_patch(mesh, vertex_of, neg, pos);  // upper-left square
  detail::add_patch(mesh, vertex_of, pos, pos);  // upper-right square
  detail::finalize_mesh(mesh);
  return mesh;
}

/// Reads a Triangle-format .node/.ele pair. Indexing base (0 or 1) is taken
/// from the first node record. Triangles are reoriented counterclockwise.
inline Mesh read_triangle(const std::string& node_text, const std::string& ele_text) {
  Mesh mesh;
  {
    std::istringstream is(node_text);
    std::size_t np = 0, dim = 0, nattr = 0, nmark = 0;
    if (!(is >> np >> dim >> nattr >> nmark) || dim != 2)
      throw std::invalid_argument("read_triangle: malformed .node header");
    mesh.vertices.resize(np);
    long base = -1;
    for (std::size_t r = 0; r < np; ++r) {
      long idx;
      double x, y;
      if (!(is >> idx >> x >> y))
        throw std::invalid_argument("read_triangle: malformed .node record");
      double skip;
      for (std::size_t a = 0; a < nattr + nmark; ++a) is >> skip;
      if (base < 0) base = (idx == 0) ? 0 : 1;
      const long slot = idx - base;
      if (slot < 0 || slot >= static_cast<long>(np))
        throw std::invalid_argument("read_triangle: node index out of range");
      mesh.vertices[static_cast<std::size_t>(slot)] = {x, y};
    }
    std::istringstream es(ele_text);
    std::size_t nt = 0, npt = 0, nattr2 = 0;
    if (!(es >> nt >> npt >> nattr2) || npt != 3)
      throw std::invalid_argument("read_triangle: malformed .ele header");
    mesh.triangles.resize(nt);
    for (std::size_t r = 0; r < nt; ++r) {
      long idx, a, b, c;
      if (!(es >> idx >> a >> b >> c))
        throw std::invalid_argument("read_triangle: malformed .ele record");
      double skip;
      for (std::size_t q = 0; q < nattr2; ++q) es >> skip;
      for (long v : {a - base, b - base, c - base})
        if (v < 0 || v >= static_cast<long>(np))
          throw std::invalid_argument("read_triangle: element index out of range");
      mesh.triangles[r] = {static_cast<std::size_t>(a - base),
                           static_cast<std::size_t>(b - base),
                           static_cast<std::size_t>(c - base)};
    }
  }
  detail::finalize_mesh(mesh);
  return mesh;
}

struct TriangleFiles {
  std::string node_text;
  std::string ele_text;
};

/// Writes the Triangle .node/.ele pair with 1-based indices and boundary
/// markers on the nodes.
inline TriangleFiles write_triangle(const Mesh& mesh) {
  TriangleFiles out;
  {
    std::ostringstream os;
    os.precision(17);
    os << mesh.n_vertices() << " 2 0 1\n";
    for (std::size_t v = 0; v < mesh.n_vertices(); ++v)
      os << v + 1 << " " << mesh.vertices[v][0] << " " << mesh.vertices[v][1]
         << " " << (mesh.boundary_vertex[v] ? 1 : 0) << "\n";
    out.node_text = os.str();
  }
  {
    std::ostringstream os;
    os << mesh.n_triangles() << " 3 0\n";
    for (std::size_t t = 0; t < mesh.n_triangles(); ++t)
      os << t + 1 << " " << mesh.triangles[t][0] + 1 << " "
         << mesh.triangles[t][1] + 1 << " " << mesh.triangles[t][2] + 1 << "\n";
    out.ele_text = os.str();
  }
  return out;
}

}  // namespace msp
