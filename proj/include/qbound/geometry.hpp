#pragma once

// Discretized domains: unions of intervals and rectangles on uniform grids,
// their trapezoidal inner products, boundary traces and outward normal
// derivatives.

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qbound/linalg.hpp"
#include "qbound/types.hpp"

namespace qbound {

struct IntervalUnion {
  std::vector<std::array<double, 2>> intervals;
};

struct Rectangle {
  double L = 1.0;
  double H = 1.0;
};

using DomainSpec = std::variant<IntervalUnion, Rectangle>;

/// One connected piece of the boundary: an interval endpoint in 1D, an edge
/// of the rectangle in 2D. Nodes are listed in the piece's parametrization
/// order (x increasing for horizontal edges, y increasing for vertical ones).
struct BoundaryPiece {
  std::string name;
  std::vector<int> nodes;
  int normal_axis = 0;
  double normal_sign = 1.0;
};

struct Segment {
  double a = 0.0;
  double b = 1.0;
  int cells = 0;
  double h = 0.0;
  std::vector<int> nodes;  // left to right
};

/// A stiffness bond between two neighbouring nodes. `weight` is the
/// coefficient of |Φ_b − Φ_a|² in the Dirichlet form, `cross_section` the
/// transverse quadrature width (1 in 1D).
struct Bond {
  int a = 0;
  int b = 0;
  int axis = 0;
  double length = 0.0;
  double weight = 0.0;
  double cross_section = 1.0;
};

struct Mesh {
  int dimension = 1;
  DomainSpec spec;
  double resolution = 0.0;

  std::vector<Segment> segments;  // 1D only

  // 2D only; grid[j * (nx + 1) + i] is the node at (i * hx, j * hy).
  double length_x = 0.0, length_y = 0.0;
  int nx = 0, ny = 0;
  double hx = 0.0, hy = 0.0;
  std::vector<int> grid;

  std::vector<std::array<double, 2>> coords;
  RVec weights;
  std::vector<BoundaryPiece> pieces;
  int interior_count = 0;

  [[nodiscard]] int node_count() const { return static_cast<int>(coords.size()); }
  [[nodiscard]] int boundary_count() const { return node_count() - interior_count; }
  [[nodiscard]] double volume() const { return weights.sum(); }
  [[nodiscard]] double spacing() const { return dimension == 1 ? segments.front().h : std::max(hx, hy); }

  /// Position of the first node of piece `p` inside the boundary vector.
  [[nodiscard]] int piece_offset(int p) const {
    int off = 0;
    for (int q = 0; q < p; ++q) off += static_cast<int>(pieces[q].nodes.size());
    return off;
  }

  [[nodiscard]] std::vector<int> boundary_nodes() const {
    std::vector<int> out;
    for (const auto& piece : pieces) out.insert(out.end(), piece.nodes.begin(), piece.nodes.end());
    return out;
  }

  [[nodiscard]] int grid_node(int i, int j) const { return grid[static_cast<size_t>(j) * (nx + 1) + i]; }

  [[nodiscard]] RVec coordinate(int axis) const {
    RVec c(node_count());
    for (int k = 0; k < node_count(); ++k) c(k) = coords[k][axis];
    return c;
  }

  [[nodiscard]] bool is_single_interval(double a, double b, double tol = 1e-9) const {
    return dimension == 1 && segments.size() == 1 && std::abs(segments[0].a - a) < tol &&
           std::abs(segments[0].b - b) < tol;
  }
};

using MeshPtr = std::shared_ptr<const Mesh>;

struct BoundaryOps {
  SpMat trace;              // n_b × N, unit selectors
  SpMat normal_derivative;  // n_b × N, outward, second-order one-sided
  RVec weights;             // boundary quadrature, defines <.,.>_∂Ω

  [[nodiscard]] int size() const { return static_cast<int>(weights.size()); }
};

namespace detail {

inline MeshPtr make_interval_mesh(const IntervalUnion& iu, double n) {
  if (iu.intervals.empty()) throw ConfigError("domain.intervals: at least one interval required");
  auto mesh = std::make_shared<Mesh>();
  mesh->dimension = 1;
  mesh->spec = iu;
  mesh->resolution = n;

  // Count nodes first so that interior nodes come first and boundary nodes
  // last, grouped per piece in the order a1, b1, a2, b2, ...
  std::vector<int> cells;
  for (size_t s = 0; s < iu.intervals.size(); ++s) {
    const double len = iu.intervals[s][1] - iu.intervals[s][0];
    if (!(len > 0.0) || !std::isfinite(len))
      throw ConfigError("domain.intervals[" + std::to_string(s) + "]: non-positive length");
    cells.push_back(std::max(1, static_cast<int>(std::lround(n * len))));
  }
  int interior = 0;
  for (int c : cells) interior += c - 1;
  const int total = interior + 2 * static_cast<int>(cells.size());
  mesh->coords.resize(total);
  mesh->weights.resize(total);
  mesh->interior_count = interior;

  int next_interior = 0;
  int next_boundary = interior;
  for (size_t s = 0; s < iu.intervals.size(); ++s) {
    Segment seg;
    seg.a = iu.intervals[s][0];
    seg.b = iu.intervals[s][1];
    seg.cells = cells[s];
    seg.h = (seg.b - seg.a) / seg.cells;
    seg.nodes.resize(seg.cells + 1);
    const int left = next_boundary++;
    const int right = next_boundary++;
    seg.nodes.front() = left;
    seg.nodes.back() = right;
    for (int j = 1; j < seg.cells; ++j) seg.nodes[j] = next_interior++;
    for (int j = 0; j <= seg.cells; ++j) {
      const int id = seg.nodes[j];
      mesh->coords[id] = {seg.a + j * seg.h, 0.0};
      mesh->weights(id) = (j == 0 || j == seg.cells) ? 0.5 * seg.h : seg.h;
    }
    const std::string idx = std::to_string(s + 1);
    mesh->pieces.push_back({"a" + idx, {left}, 0, -1.0});
    mesh->pieces.push_back({"b" + idx, {right}, 0, +1.0});
    mesh->segments.push_back(std::move(seg));
  }
  return mesh;
}

inline MeshPtr make_rectangle_mesh(const Rectangle& r, double n) {
  if (!(r.L > 0.0) || !std::isfinite(r.L)) throw ConfigError("domain.rectangle.L: non-positive length");
  if (!(r.H > 0.0) || !std::isfinite(r.H)) throw ConfigError("domain.rectangle.H: non-positive length");
  auto mesh = std::make_shared<Mesh>();
  mesh->dimension = 2;
  mesh->spec = r;
  mesh->resolution = n;
  mesh->length_x = r.L;
  mesh->length_y = r.H;
  mesh->nx = std::max(1, static_cast<int>(std::lround(n * r.L)));
  mesh->ny = std::max(1, static_cast<int>(std::lround(n * r.H)));
  const int nx = mesh->nx, ny = mesh->ny;
  mesh->hx = r.L / nx;
  mesh->hy = r.H / ny;
  const int total = (nx + 1) * (ny + 1);
  mesh->grid.assign(total, -1);
  mesh->coords.resize(total);
  mesh->weights.resize(total);

  int next = 0;
  for (int j = 1; j < ny; ++j)
    for (int i = 1; i < nx; ++i) mesh->grid[j * (nx + 1) + i] = next++;
  mesh->interior_count = next;

  // Corners belong to the horizontal edges.
  BoundaryPiece bottom{"bottom", {}, 1, -1.0};
  BoundaryPiece right{"right", {}, 0, +1.0};
  BoundaryPiece top{"top", {}, 1, +1.0};
  BoundaryPiece left{"left", {}, 0, -1.0};
  for (int i = 0; i <= nx; ++i) {
    mesh->grid[i] = next;
    bottom.nodes.push_back(next++);
  }
  for (int j = 1; j < ny; ++j) {
    mesh->grid[j * (nx + 1) + nx] = next;
    right.nodes.push_back(next++);
  }
  for (int i = 0; i <= nx; ++i) {
    mesh->grid[ny * (nx + 1) + i] = next;
    top.nodes.push_back(next++);
  }
  for (int j = 1; j < ny; ++j) {
    mesh->grid[j * (nx + 1)] = next;
    left.nodes.push_back(next++);
  }
  mesh->pieces = {std::move(bottom), std::move(right), std::move(top), std::move(left)};

  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const int id = mesh->grid[j * (nx + 1) + i];
      mesh->coords[id] = {i * mesh->hx, j * mesh->hy};
      const double wx = (i == 0 || i == nx) ? 0.5 * mesh->hx : mesh->hx;
      const double wy = (j == 0 || j == ny) ? 0.5 * mesh->hy : mesh->hy;
      mesh->weights(id) = wx * wy;
    }
  }
  return mesh;
}

}  // namespace detail

/// Uniform mesh with `n` nodes per unit length (cells per segment are
/// round(n · length)).
inline MeshPtr make_mesh(const DomainSpec& spec, double n) {
  if (!(n >= 8.0) || !std::isfinite(n)) throw ConfigError("n: must be at least 8 nodes per unit length");
  return std::visit(
      [n](const auto& s) -> MeshPtr {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IntervalUnion>)
          return detail::make_interval_mesh(s, n);
        else
          return detail::make_rectangle_mesh(s, n);
      },
      spec);
}

/// Neighbour bonds of the Dirichlet form sum_b w_b |Φ_b − Φ_a|².
inline std::vector<Bond> mesh_bonds(const Mesh& mesh) {
  std::vector<Bond> out;
  if (mesh.dimension == 1) {
    for (const auto& seg : mesh.segments)
      for (int j = 0; j < seg.cells; ++j)
        out.push_back({seg.nodes[j], seg.nodes[j + 1], 0, seg.h, 1.0 / seg.h, 1.0});
    return out;
  }
  const int nx = mesh.nx, ny = mesh.ny;
  for (int j = 0; j <= ny; ++j) {
    const double wy = (j == 0 || j == ny) ? 0.5 * mesh.hy : mesh.hy;
    for (int i = 0; i < nx; ++i)
      out.push_back({mesh.grid_node(i, j), mesh.grid_node(i + 1, j), 0, mesh.hx, wy / mesh.hx, wy});
  }
  for (int i = 0; i <= nx; ++i) {
    const double wx = (i == 0 || i == nx) ? 0.5 * mesh.hx : mesh.hx;
    for (int j = 0; j < ny; ++j)
      out.push_back({mesh.grid_node(i, j), mesh.grid_node(i, j + 1), 1, mesh.hy, wx / mesh.hy, wx});
  }
  return out;
}

inline BoundaryOps boundary_operators(const Mesh& mesh) {
  const int N = mesh.node_count();
  const int nb = mesh.boundary_count();
  BoundaryOps ops;
  ops.weights.resize(nb);
  std::vector<Triplet> tr, nd;

  if (mesh.dimension == 1) {
    for (size_t s = 0; s < mesh.segments.size(); ++s) {
      const auto& seg = mesh.segments[s];
      if (seg.cells < 2)
        throw DomainError("boundary stencil: segment " + std::to_string(s + 1) + " has fewer than 3 nodes");
      const double c = 1.0 / (2.0 * seg.h);
      const int row_a = 2 * static_cast<int>(s);
      const int row_b = row_a + 1;
      const auto& v = seg.nodes;
      // φ̇(a) = −Φ'(a), φ̇(b) = +Φ'(b)
      nd.emplace_back(row_a, v[0], 3.0 * c);
      nd.emplace_back(row_a, v[1], -4.0 * c);
      nd.emplace_back(row_a, v[2], 1.0 * c);
      const int m = seg.cells;
      nd.emplace_back(row_b, v[m], 3.0 * c);
      nd.emplace_back(row_b, v[m - 1], -4.0 * c);
      nd.emplace_back(row_b, v[m - 2], 1.0 * c);
      ops.weights(row_a) = 1.0;
      ops.weights(row_b) = 1.0;
    }
  } else {
    if (mesh.nx < 2 || mesh.ny < 2) throw DomainError("boundary stencil: rectangle needs at least 3 nodes per side");
    const int nx = mesh.nx, ny = mesh.ny;
    const double cx = 1.0 / (2.0 * mesh.hx), cy = 1.0 / (2.0 * mesh.hy);
    int row = 0;
    for (const auto& piece : mesh.pieces) {
      for (size_t q = 0; q < piece.nodes.size(); ++q, ++row) {
        const auto& xy = mesh.coords[piece.nodes[q]];
        const int i = static_cast<int>(std::lround(xy[0] / mesh.hx));
        const int j = static_cast<int>(std::lround(xy[1] / mesh.hy));
        auto stencil = [&](int axis, int sign, double scale) {
          const double c = scale * (axis == 0 ? cx : cy);
          const int dir = sign < 0 ? 1 : -1;
          for (int q3 = 0; q3 < 3; ++q3) {
            const double coef = q3 == 0 ? 3.0 : (q3 == 1 ? -4.0 : 1.0);
            const int node = axis == 0 ? mesh.grid_node((sign < 0 ? 0 : nx) + q3 * dir, j)
                                       : mesh.grid_node(i, (sign < 0 ? 0 : ny) + q3 * dir);
            nd.emplace_back(row, node, coef * c);
          }
        };
        const bool corner = piece.normal_axis == 1 && (i == 0 || i == nx);
        if (corner) {
          // corner row: both outward derivatives, each carrying its own edge's half weight
          const double w = 0.5 * (mesh.hx + mesh.hy);
          stencil(1, piece.normal_sign, 0.5 * mesh.hx / w);
          stencil(0, i == 0 ? -1 : 1, 0.5 * mesh.hy / w);
          ops.weights(row) = w;
        } else {
          stencil(piece.normal_axis, piece.normal_sign, 1.0);
          ops.weights(row) = piece.normal_axis == 1 ? mesh.hx : mesh.hy;
        }
      }
    }
  }

  const auto bnodes = mesh.boundary_nodes();
  for (int r = 0; r < nb; ++r) tr.emplace_back(r, bnodes[r], 1.0);
  ops.trace.resize(nb, N);
  ops.trace.setFromTriplets(tr.begin(), tr.end());
  ops.normal_derivative.resize(nb, N);
  ops.normal_derivative.setFromTriplets(nd.begin(), nd.end());
  return ops;
}

namespace detail {

// Second derivative along a line of equally spaced node values, second order
// everywhere (one-sided four-point stencils at the ends).
inline void second_derivative_line(const std::vector<int>& line, double h, const CVec& f, CVec& out) {
  const int m = static_cast<int>(line.size()) - 1;
  const double ih2 = 1.0 / (h * h);
  for (int j = 1; j < m; ++j) out(line[j]) += (f(line[j - 1]) - 2.0 * f(line[j]) + f(line[j + 1])) * ih2;
  out(line[0]) += (2.0 * f(line[0]) - 5.0 * f(line[1]) + 4.0 * f(line[2]) - f(line[3])) * ih2;
  out(line[m]) += (2.0 * f(line[m]) - 5.0 * f(line[m - 1]) + 4.0 * f(line[m - 2]) - f(line[m - 3])) * ih2;
}

}  // namespace detail

/// Pointwise second-order Laplacian at every node (used for the strong-form
/// side of Green's identity).
inline CVec pointwise_laplacian(const Mesh& mesh, const CVec& f) {
  CVec out = CVec::Zero(mesh.node_count());
  if (mesh.dimension == 1) {
    for (const auto& seg : mesh.segments) {
      if (seg.cells < 3) throw DomainError("laplacian stencil: segment needs at least 4 nodes");
      detail::second_derivative_line(seg.nodes, seg.h, f, out);
    }
    return out;
  }
  if (mesh.nx < 3 || mesh.ny < 3) throw DomainError("laplacian stencil: rectangle needs at least 4 nodes per side");
  std::vector<int> line;
  for (int j = 0; j <= mesh.ny; ++j) {
    line.clear();
    for (int i = 0; i <= mesh.nx; ++i) line.push_back(mesh.grid_node(i, j));
    detail::second_derivative_line(line, mesh.hx, f, out);
  }
  for (int i = 0; i <= mesh.nx; ++i) {
    line.clear();
    for (int j = 0; j <= mesh.ny; ++j) line.push_back(mesh.grid_node(i, j));
    detail::second_derivative_line(line, mesh.hy, f, out);
  }
  return out;
}

/// Volume side minus boundary side of Green's identity
///   <Φ,−ΔΨ> − <−ΔΦ,Ψ> = <φ̇,ψ>_∂Ω − <φ,ψ̇>_∂Ω.
inline cplx greens_residual(const Mesh& mesh, const BoundaryOps& bops, const CVec& phi, const CVec& psi) {
  const int N = mesh.node_count();
  if (phi.size() != N || psi.size() != N)
    throw DimensionError("greens_residual: node vectors must have length " + std::to_string(N));
  const CVec lap_phi = -pointwise_laplacian(mesh, phi);
  const CVec lap_psi = -pointwise_laplacian(mesh, psi);
  const cplx volume = linalg::weighted_dot(phi, mesh.weights, lap_psi) - linalg::weighted_dot(lap_phi, mesh.weights, psi);
  const CVec tphi = bops.trace * phi, tpsi = bops.trace * psi;
  const CVec dphi = bops.normal_derivative * phi, dpsi = bops.normal_derivative * psi;
  const cplx boundary = linalg::weighted_dot(dphi, bops.weights, tpsi) - linalg::weighted_dot(tphi, bops.weights, dpsi);
  return volume - boundary;
}

/// Samples f at every node.
template <class F>
CVec sample(const Mesh& mesh, F&& f) {
  CVec v(mesh.node_count());
  for (int k = 0; k < mesh.node_count(); ++k) {
    if constexpr (std::is_invocable_v<F, double>)
      v(k) = f(mesh.coords[k][0]);
    else
      v(k) = f(mesh.coords[k][0], mesh.coords[k][1]);
  }
  return v;
}

}  // namespace qbound
