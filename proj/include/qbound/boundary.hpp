#pragma once

// Boundary unitaries U, their Cayley decomposition into Dirichlet constraints
// plus a Hermitian Robin operator, spectral gaps, edge transfer maps, pasting
// unitaries and paths of unitaries.

#include <algorithm>
#include <cmath>
#include <array>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qbound/geometry.hpp"
#include "qbound/linalg.hpp"
#include "qbound/types.hpp"

namespace qbound {

inline constexpr double kUnitaryTol = 1e-12;
inline constexpr double kPhaseSnapTol = 1e-8;

/// Principal eigenphase in (−π, π], with phases within `tol` of ±π snapped to
/// exactly +π.
inline double snap_phase(double theta, double tol = kPhaseSnapTol) {
  if (std::abs(theta - pi) < tol || std::abs(theta + pi) < tol) return pi;
  return theta;
}

class BoundaryUnitary {
 public:
  BoundaryUnitary() = default;

  /// Validates ‖U†U − I‖_max < tol and caches the eigendecomposition.
  static BoundaryUnitary from_matrix(CMat m, double tol = kUnitaryTol) {
    if (m.rows() != m.cols() || m.rows() == 0)
      throw DimensionError("boundary unitary must be a non-empty square matrix");
    const double defect = linalg::unitarity_defect(m);
    if (!(defect < tol))
      throw ValidationError("matrix is not unitary: ||U^H U - I||_max = " + std::to_string(defect));
    BoundaryUnitary u;
    u.matrix_ = std::move(m);
    auto eig = linalg::normal_eigen(u.matrix_);
    u.vectors_ = std::move(eig.vectors);
    u.phases_.resize(eig.values.size());
    for (int k = 0; k < eig.values.size(); ++k) u.phases_(k) = snap_phase(std::arg(eig.values(k)));
    return u;
  }

  [[nodiscard]] const CMat& matrix() const { return matrix_; }
  [[nodiscard]] int dim() const { return static_cast<int>(matrix_.rows()); }
  /// Eigenphases in (−π, π]; the eigenvalue −1 is represented as +π.
  [[nodiscard]] const RVec& phases() const { return phases_; }
  [[nodiscard]] const CMat& eigenvectors() const { return vectors_; }

 private:
  CMat matrix_;
  CMat vectors_;
  RVec phases_;
};

/// Cayley decomposition of U: the −1 eigenspace W carries Dirichlet
/// constraints P_W φ = 0; on W^⊥ the boundary condition is the Robin law
/// φ̇_⊥ = A φ_⊥ with A = i(I+U)^{-1}(U−I), i.e. eigenvalues −tan(θ/2).
struct SelfAdjointBC {
  CMat dirichlet_basis;   // n_b × k_D
  CMat complement_basis;  // n_b × (n_b − k_D)
  CMat robin;             // Hermitian, complement coordinates
  RVec complement_phases;

  [[nodiscard]] int dim() const { return static_cast<int>(dirichlet_basis.rows()); }
  [[nodiscard]] int dirichlet_rank() const { return static_cast<int>(dirichlet_basis.cols()); }

  /// max(‖P_W φ‖, ‖φ̇_⊥ − A φ_⊥‖) for boundary data in unitary coordinates.
  [[nodiscard]] double constraint_residual(const CVec& phi, const CVec& dphi) const {
    double r = 0.0;
    if (dirichlet_rank() > 0) r = (dirichlet_basis.adjoint() * phi).norm();
    if (complement_basis.cols() > 0) {
      const CVec perp = complement_basis.adjoint() * phi;
      const CVec dperp = complement_basis.adjoint() * dphi;
      r = std::max(r, (dperp - robin * perp).norm());
    }
    return r;
  }
};

/// ‖(φ − iφ̇) − U(φ + iφ̇)‖.
inline double boundary_condition_residual(const BoundaryUnitary& u, const CVec& phi, const CVec& dphi) {
  if (phi.size() != u.dim() || dphi.size() != u.dim()) throw DimensionError("boundary data dimension mismatch");
  return ((phi - I_unit * dphi) - u.matrix() * (phi + I_unit * dphi)).norm();
}

inline SelfAdjointBC cayley_decompose(const BoundaryUnitary& u, double tol = kPhaseSnapTol) {
  if (!(tol > 0.0 && tol <= 1e-6)) throw ValidationError("cayley_decompose: tol must lie in (0, 1e-6]");
  const int n = u.dim();
  std::vector<int> minus_one, rest;
  RVec phases(n);
  for (int k = 0; k < n; ++k) {
    phases(k) = snap_phase(u.phases()(k), tol);
    (phases(k) == pi ? minus_one : rest).push_back(k);
  }
  SelfAdjointBC bc;
  bc.dirichlet_basis.resize(n, static_cast<Eigen::Index>(minus_one.size()));
  bc.complement_basis.resize(n, static_cast<Eigen::Index>(rest.size()));
  bc.complement_phases.resize(static_cast<Eigen::Index>(rest.size()));
  for (size_t c = 0; c < minus_one.size(); ++c) bc.dirichlet_basis.col(c) = u.eigenvectors().col(minus_one[c]);
  bc.robin = CMat::Zero(static_cast<Eigen::Index>(rest.size()), static_cast<Eigen::Index>(rest.size()));
  for (size_t c = 0; c < rest.size(); ++c) {
    bc.complement_basis.col(c) = u.eigenvectors().col(rest[c]);
    bc.complement_phases(c) = phases(rest[c]);
    bc.robin(c, c) = -std::tan(0.5 * phases(rest[c]));
  }
  return bc;
}

enum class GapClass { invertible_I_plus_U, isolated_minus_one, no_gap };

inline std::string_view to_string(GapClass c) {
  switch (c) {
    case GapClass::invertible_I_plus_U: return "invertible_I_plus_U";
    case GapClass::isolated_minus_one: return "isolated_minus_one";
    case GapClass::no_gap: return "no_gap";
  }
  return "?";
}

struct SpectralGap {
  double gap = 2.0;
  GapClass classification = GapClass::invertible_I_plus_U;
};

/// Chordal distance from −1 to the rest of σ(U). A spectrum consisting of −1
/// alone has no Robin part and reports gap 2. In finite dimension −1 is never
/// an accumulation point; `no_gap` is reported when the nearest eigenvalue
/// sits within `floor` of −1 without being snapped onto it.
inline SpectralGap spectral_gap(const BoundaryUnitary& u, double tol = kPhaseSnapTol, double floor = 1e-6) {
  bool has_minus_one = false;
  double gap = 2.0;
  for (int k = 0; k < u.dim(); ++k) {
    const double th = snap_phase(u.phases()(k), tol);
    if (th == pi) {
      has_minus_one = true;
      continue;
    }
    gap = std::min(gap, std::abs(std::polar(1.0, th) + 1.0));
  }
  SpectralGap out;
  out.gap = gap;
  if (gap < floor)
    out.classification = GapClass::no_gap;
  else
    out.classification = has_minus_one ? GapClass::isolated_minus_one : GapClass::invertible_I_plus_U;
  return out;
}

// ---- presets -------------------------------------------------------------

namespace presets {

inline BoundaryUnitary dirichlet(int nb) { return BoundaryUnitary::from_matrix(-CMat::Identity(nb, nb)); }
inline BoundaryUnitary neumann(int nb) { return BoundaryUnitary::from_matrix(CMat::Identity(nb, nb)); }

inline BoundaryUnitary quasi_periodic(double alpha) {
  CMat m = CMat::Zero(2, 2);
  m(0, 1) = std::polar(1.0, alpha);
  m(1, 0) = std::polar(1.0, -alpha);
  return BoundaryUnitary::from_matrix(std::move(m));
}

inline BoundaryUnitary periodic() { return quasi_periodic(0.0); }

/// Endpoint order (a1, b1, a2, b2): a1↔b1 and a2↔b2, two circles.
inline BoundaryUnitary two_interval_U1() {
  CMat m = CMat::Zero(4, 4);
  m(0, 1) = m(1, 0) = m(2, 3) = m(3, 2) = 1.0;
  return BoundaryUnitary::from_matrix(std::move(m));
}

/// Anti-diagonal permutation: a1↔b2 and b1↔a2, one circle.
inline BoundaryUnitary two_interval_U2() {
  CMat m = CMat::Zero(4, 4);
  for (int i = 0; i < 4; ++i) m(i, 3 - i) = 1.0;
  return BoundaryUnitary::from_matrix(std::move(m));
}

}  // namespace presets

/// Flux ε of the quasi-periodic family expressed as the twist α = −2πε
/// reduced to (−π, π].
inline double alpha_from_flux(double epsilon) {
  double a = std::remainder(-2.0 * pi * epsilon, 2.0 * pi);
  if (a <= -pi) a += 2.0 * pi;
  return a;
}

// ---- edge transfer maps and pasting --------------------------------------

/// A boundary piece seen as a 1D curve: parameter value and quadrature
/// weight per node.
struct EdgeSamples {
  RVec params;
  RVec weights;
};

inline EdgeSamples piece_samples(const Mesh& mesh, const BoundaryOps& bops, int piece) {
  if (piece < 0 || piece >= static_cast<int>(mesh.pieces.size())) throw DimensionError("unknown boundary piece");
  const auto& p = mesh.pieces[piece];
  const int off = mesh.piece_offset(piece);
  EdgeSamples e;
  e.params.resize(static_cast<Eigen::Index>(p.nodes.size()));
  e.weights = bops.weights.segment(off, static_cast<Eigen::Index>(p.nodes.size()));
  const int tangential = mesh.dimension == 1 ? 0 : 1 - p.normal_axis;
  for (size_t q = 0; q < p.nodes.size(); ++q)
    e.params(q) = mesh.dimension == 1 ? 0.0 : mesh.coords[p.nodes[q]][tangential];
  return e;
}

struct TransferMap {
  CMat raw;      // √J (Φ∘g) on node values, before re-unitarization
  CMat unitary;  // weight-scaled and polar-corrected; acts on unitary boundary coordinates
  RVec jacobian;
};

namespace detail {

// Second-order derivative of samples y(x) on a possibly non-uniform grid.
inline RVec sample_derivative(const RVec& x, const RVec& y) {
  const int n = static_cast<int>(x.size());
  RVec d(n);
  if (n == 1) {
    d(0) = 1.0;
    return d;
  }
  if (n == 2) {
    d.setConstant((y(1) - y(0)) / (x(1) - x(0)));
    return d;
  }
  auto three_point = [&](int i0, int i1, int i2, int at) {
    const double x0 = x(i0), x1 = x(i1), x2 = x(i2), xa = x(at);
    const double l0 = ((xa - x1) + (xa - x2)) / ((x0 - x1) * (x0 - x2));
    const double l1 = ((xa - x0) + (xa - x2)) / ((x1 - x0) * (x1 - x2));
    const double l2 = ((xa - x0) + (xa - x1)) / ((x2 - x0) * (x2 - x1));
    return l0 * y(i0) + l1 * y(i1) + l2 * y(i2);
  };
  d(0) = three_point(0, 1, 2, 0);
  for (int i = 1; i < n - 1; ++i) d(i) = three_point(i - 1, i, i + 1, i);
  d(n - 1) = three_point(n - 3, n - 2, n - 1, n - 1);
  return d;
}

}  // namespace detail

/// Discrete T Φ = √|J| (Φ∘g) from `edge` into the reference parametrization.
/// `g` holds g(r_k) at the reference nodes: positions on the edge, strictly
/// monotone. The weight-scaled matrix is re-unitarized by its polar factor.
inline TransferMap edge_transfer_map(const EdgeSamples& edge, const EdgeSamples& reference, const RVec& g,
                                     std::optional<RVec> jacobian = std::nullopt) {
  const int ne = static_cast<int>(edge.params.size());
  const int nr = static_cast<int>(reference.params.size());
  if (g.size() != nr) throw DimensionError("edge_transfer_map: one g sample per reference node required");
  if (nr < ne) throw DimensionError("edge_transfer_map: reference needs at least as many nodes as the edge");
  if (nr > 1) {
    const double sgn = g(1) > g(0) ? 1.0 : -1.0;
    for (int k = 1; k < nr; ++k)
      if (!(sgn * (g(k) - g(k - 1)) > 0.0)) throw ValidationError("edge_transfer_map: g samples are not strictly monotone");
  }
  RVec jac = jacobian ? *jacobian : detail::sample_derivative(reference.params, g).cwiseAbs().eval();
  if (ne == 1) jac.setOnes();
  if (jac.size() != nr) throw DimensionError("edge_transfer_map: jacobian sample count mismatch");

  TransferMap t;
  t.jacobian = jac;
  t.raw = CMat::Zero(nr, ne);
  const double lo = edge.params.minCoeff(), hi = edge.params.maxCoeff();
  const double slack = 1e-12 * std::max(1.0, hi - lo);
  for (int k = 0; k < nr; ++k) {
    const double y = g(k);
    if (y < lo - slack || y > hi + slack) throw ValidationError("edge_transfer_map: g maps outside the edge");
    if (ne == 1) {
      t.raw(k, 0) = std::sqrt(jac(k));
      continue;
    }
    // edge params are increasing along the piece
    int a = 0;
    while (a < ne - 2 && edge.params(a + 1) < y) ++a;
    const double w = std::clamp((y - edge.params(a)) / (edge.params(a + 1) - edge.params(a)), 0.0, 1.0);
    t.raw(k, a) += std::sqrt(jac(k)) * (1.0 - w);
    t.raw(k, a + 1) += std::sqrt(jac(k)) * w;
  }
  const CMat scaled = reference.weights.cwiseSqrt().asDiagonal() * t.raw *
                      edge.weights.cwiseSqrt().cwiseInverse().asDiagonal();
  t.unitary = linalg::polar_unitary(scaled);
  return t;
}

/// Block unitary [[0, T1†T2], [T2†T1, 0]] gluing Γ1 to Γ2.
inline BoundaryUnitary pasting_unitary(const CMat& t1, const CMat& t2) {
  if (t1.rows() != t2.rows()) throw DimensionError("pasting_unitary: transfer maps target different reference spaces");
  const Eigen::Index n1 = t1.cols(), n2 = t2.cols();
  CMat u = CMat::Zero(n1 + n2, n1 + n2);
  u.topRightCorner(n1, n2) = t1.adjoint() * t2;
  u.bottomLeftCorner(n2, n1) = t2.adjoint() * t1;
  return BoundaryUnitary::from_matrix(std::move(u), 1e-10);
}

/// A unitary acting on the concatenated boundary coordinates of `pieces`.
struct PieceBlock {
  std::vector<int> pieces;
  CMat unitary;
};

/// Assembles the full boundary unitary from blocks that cover every boundary
/// piece exactly once.
inline BoundaryUnitary boundary_unitary_from_blocks(const Mesh& mesh, const std::vector<PieceBlock>& blocks) {
  const int nb = mesh.boundary_count();
  std::vector<int> used(mesh.pieces.size(), 0);
  CMat u = CMat::Zero(nb, nb);
  for (const auto& blk : blocks) {
    std::vector<int> idx;
    for (int p : blk.pieces) {
      if (p < 0 || p >= static_cast<int>(mesh.pieces.size())) throw DimensionError("block references unknown piece");
      ++used[p];
      const int off = mesh.piece_offset(p);
      for (size_t q = 0; q < mesh.pieces[p].nodes.size(); ++q) idx.push_back(off + static_cast<int>(q));
    }
    if (static_cast<int>(idx.size()) != blk.unitary.rows() || blk.unitary.rows() != blk.unitary.cols())
      throw DimensionError("block unitary dimension does not match its pieces");
    for (size_t i = 0; i < idx.size(); ++i)
      for (size_t j = 0; j < idx.size(); ++j) u(idx[i], idx[j]) = blk.unitary(i, j);
  }
  for (size_t p = 0; p < used.size(); ++p)
    if (used[p] != 1) throw DimensionError("boundary piece " + mesh.pieces[p].name + " must be covered exactly once");
  return BoundaryUnitary::from_matrix(std::move(u), 1e-10);
}

// ---- paths ---------------------------------------------------------------

enum class PathRule { eigenphase, great_circle };

inline std::string_view to_string(PathRule r) { return r == PathRule::eigenphase ? "eigenphase" : "great_circle"; }

/// eigenphase: U(s) = U_a V diag(e^{isθ_k}) V† with U_a†U_b = V diag(e^{iθ_k}) V†,
/// principal phases and −1 taken as +π.
/// great_circle: polar factor of the chord (1−s)U_a + sU_b.
inline BoundaryUnitary interpolate_path(const BoundaryUnitary& ua, const BoundaryUnitary& ub, PathRule rule, double s) {
  if (ua.dim() != ub.dim()) throw DimensionError("interpolate_path: endpoint dimensions differ");
  if (s == 0.0) return ua;
  if (s == 1.0) return ub;
  if (rule == PathRule::eigenphase) {
    const CMat w = ua.matrix().adjoint() * ub.matrix();
    const auto eig = linalg::normal_eigen(w);
    CVec d(eig.values.size());
    for (int k = 0; k < d.size(); ++k) d(k) = std::polar(1.0, s * snap_phase(std::arg(eig.values(k))));
    CMat u = ua.matrix() * eig.vectors * d.asDiagonal() * eig.vectors.adjoint();
    return BoundaryUnitary::from_matrix(std::move(u));
  }
  CMat chord = (1.0 - s) * ua.matrix() + s * ub.matrix();
  return BoundaryUnitary::from_matrix(linalg::polar_unitary(chord));
}

struct BCPath {
  BoundaryUnitary start;
  BoundaryUnitary end;
  PathRule rule = PathRule::eigenphase;
  int samples = 0;
  std::vector<double> s;
  std::vector<double> gap_profile;
  double min_gap = 2.0;
  // Explicit one-parameter family; takes precedence over interpolation.
  std::function<BoundaryUnitary(double)> family;

  [[nodiscard]] BoundaryUnitary at(double t) const {
    return family ? family(t) : interpolate_path(start, end, rule, t);
  }
};

namespace detail {

inline void fill_gap_profile(BCPath& p) {
  for (int j = 0; j < p.samples; ++j) {
    const double s = j == p.samples - 1 ? 1.0 : static_cast<double>(j) / (p.samples - 1);
    p.s.push_back(s);
    p.gap_profile.push_back(spectral_gap(p.at(s)).gap);
    p.min_gap = std::min(p.min_gap, p.gap_profile.back());
  }
}

}  // namespace detail

inline BCPath make_bc_path(const BoundaryUnitary& ua, const BoundaryUnitary& ub, PathRule rule, int samples) {
  if (samples < 2) throw ValidationError("path needs at least 2 samples");
  if (ua.dim() != ub.dim()) throw DimensionError("path endpoints have different dimensions");
  BCPath p{ua, ub, rule, samples, {}, {}, 2.0, {}};
  detail::fill_gap_profile(p);
  return p;
}

/// Path given by an explicit family s ↦ U(s), s ∈ [0, 1].
inline BCPath make_family_path(std::function<BoundaryUnitary(double)> family, int samples) {
  if (samples < 2) throw ValidationError("path needs at least 2 samples");
  BCPath p{family(0.0), family(1.0), PathRule::eigenphase, samples, {}, {}, 2.0, std::move(family)};
  if (p.start.dim() != p.end.dim()) throw DimensionError("path endpoints have different dimensions");
  detail::fill_gap_profile(p);
  return p;
}

/// Quasi-periodic family with flux ε(s) = eps_from + s (eps_to − eps_from).
inline BCPath quasi_periodic_flux_path(double eps_from, double eps_to, int samples) {
  return make_family_path(
      [eps_from, eps_to](double s) { return presets::quasi_periodic(-2.0 * pi * (eps_from + s * (eps_to - eps_from))); },
      samples);
}

/// Identifies boundary node values within each class (indices into the
/// boundary vector): U = 2 e eᵀ/|e|² − I on a class with e_i = √w_i, which
/// imposes equal values plus a Kirchhoff condition on the summed outward
/// derivatives. Unlisted nodes get U = `free_sign` (+1 Neumann, −1 Dirichlet).
inline BoundaryUnitary identification_unitary(const BoundaryOps& bops, const std::vector<std::vector<int>>& classes,
                                              double free_sign = 1.0) {
  const int nb = bops.size();
  CMat u = CMat::Zero(nb, nb);
  std::vector<int> seen(nb, 0);
  for (const auto& cl : classes) {
    double e2 = 0.0;
    for (int i : cl) {
      if (i < 0 || i >= nb) throw DimensionError("identification class references an unknown boundary node");
      if (seen[i]++) throw ValidationError("boundary node listed in more than one identification class");
      e2 += bops.weights(i);
    }
    for (int i : cl)
      for (int j : cl) u(i, j) = 2.0 * std::sqrt(bops.weights(i) * bops.weights(j)) / e2;
    for (int i : cl) u(i, i) -= 1.0;
  }
  for (int i = 0; i < nb; ++i)
    if (!seen[i]) u(i, i) = free_sign;
  return BoundaryUnitary::from_matrix(std::move(u), 1e-10);
}

namespace detail {

inline std::vector<int> piece_indices(const Mesh& mesh, std::string_view name) {
  for (size_t p = 0; p < mesh.pieces.size(); ++p) {
    if (mesh.pieces[p].name != name) continue;
    std::vector<int> idx(mesh.pieces[p].nodes.size());
    std::iota(idx.begin(), idx.end(), mesh.piece_offset(static_cast<int>(p)));
    return idx;
  }
  throw DimensionError("mesh has no boundary piece '" + std::string(name) + "'");
}

}  // namespace detail

/// Rectangle with opposite edges glued (bottom↔top, left↔right); the four
/// corners form one class.
inline BoundaryUnitary torus_unitary(const Mesh& mesh, const BoundaryOps& bops) {
  if (mesh.dimension != 2) throw DomainError("torus_unitary: rectangle mesh required");
  const auto b = detail::piece_indices(mesh, "bottom"), t = detail::piece_indices(mesh, "top");
  const auto r = detail::piece_indices(mesh, "right"), l = detail::piece_indices(mesh, "left");
  std::vector<std::vector<int>> classes{{b.front(), b.back(), t.front(), t.back()}};
  for (size_t i = 1; i + 1 < b.size(); ++i) classes.push_back({b[i], t[i]});
  for (size_t j = 0; j < r.size(); ++j) classes.push_back({r[j], l[j]});
  return identification_unitary(bops, classes);
}

/// Rectangle with left↔right glued and Neumann conditions on top and bottom.
inline BoundaryUnitary cylinder_unitary(const Mesh& mesh, const BoundaryOps& bops) {
  if (mesh.dimension != 2) throw DomainError("cylinder_unitary: rectangle mesh required");
  const auto b = detail::piece_indices(mesh, "bottom"), t = detail::piece_indices(mesh, "top");
  const auto r = detail::piece_indices(mesh, "right"), l = detail::piece_indices(mesh, "left");
  std::vector<std::vector<int>> classes{{b.front(), b.back()}, {t.front(), t.back()}};
  for (size_t j = 0; j < r.size(); ++j) classes.push_back({r[j], l[j]});
  return identification_unitary(bops, classes);
}

/// Glues pairs of parallel boundary pieces through transfer maps with
/// identity parametrization; remaining pieces get `others` (+1 Neumann, −1
/// Dirichlet). Shared corner nodes are not identified with each other.
inline BoundaryUnitary block_pasting_unitary(const Mesh& mesh, const BoundaryOps& bops,
                                             const std::vector<std::array<std::string, 2>>& pairs,
                                             double others = 1.0) {
  auto index_of = [&](const std::string& name) {
    for (size_t p = 0; p < mesh.pieces.size(); ++p)
      if (mesh.pieces[p].name == name) return static_cast<int>(p);
    throw ConfigError("bc.pairs: unknown boundary piece '" + name + "'");
  };
  std::vector<PieceBlock> blocks;
  std::vector<bool> used(mesh.pieces.size(), false);
  for (const auto& pr : pairs) {
    const int p = index_of(pr[0]), q = index_of(pr[1]);
    if (p == q || used[p] || used[q]) throw ConfigError("bc.pairs: each piece may be glued once");
    used[p] = used[q] = true;
    const EdgeSamples ep = piece_samples(mesh, bops, p), eq = piece_samples(mesh, bops, q);
    if (ep.params.size() != eq.params.size())
      throw ConfigError("bc.pairs: pieces " + pr[0] + " and " + pr[1] + " have different node counts");
    const TransferMap t1 = edge_transfer_map(ep, ep, ep.params);
    const TransferMap t2 = edge_transfer_map(eq, ep, ep.params);
    blocks.push_back({{p, q}, pasting_unitary(t1.unitary, t2.unitary).matrix()});
  }
  for (size_t p = 0; p < mesh.pieces.size(); ++p) {
    if (used[p]) continue;
    const auto n = static_cast<Eigen::Index>(mesh.pieces[p].nodes.size());
    blocks.push_back({{static_cast<int>(p)}, others * CMat::Identity(n, n)});
  }
  return boundary_unitary_from_blocks(mesh, blocks);
}

// ---- preset registry -----------------------------------------------------

struct PresetInfo {
  std::string_view name;
  std::string_view parameters;
  std::string_view description;
};

inline const std::vector<PresetInfo>& preset_catalog() {
  static const std::vector<PresetInfo> catalog = {
      {"dirichlet", "dim (defaults to the mesh boundary size)", "U = -I: phi = 0 on the boundary"},
      {"neumann", "dim (defaults to the mesh boundary size)", "U = I: outward normal derivative vanishes"},
      {"periodic", "-", "U = [[0,1],[1,0]] on the two endpoints of one interval"},
      {"quasi_periodic", "alpha | epsilon (alpha = -2 pi epsilon)", "U = [[0,e^{i alpha}],[e^{-i alpha},0]]"},
      {"two_interval_U1", "-", "endpoints (a1,b1,a2,b2) glued a1-b1, a2-b2: two circles"},
      {"two_interval_U2", "-", "anti-diagonal permutation: a1-b2, b1-a2: one circle"},
      {"block_pasting", "pairs [[p,q],...], others dirichlet|neumann",
       "generalised periodic gluing of rectangle edges through transfer maps"},
      {"torus", "-", "rectangle with both pairs of opposite edges glued, corners identified"},
      {"cylinder", "-", "rectangle with left and right glued, Neumann top and bottom"},
      {"custom", "matrix [[[re,im],...],...]", "any unitary matrix on the boundary coordinates"},
  };
  return catalog;
}

struct PresetParams {
  std::optional<int> dim;
  std::optional<double> alpha;
  std::optional<CMat> matrix;
  std::optional<CMat> t1;
  std::optional<CMat> t2;
};

inline BoundaryUnitary unitary_from_preset(std::string_view name, const PresetParams& p = {}) {
  auto need_dim = [&]() {
    if (!p.dim || *p.dim <= 0) throw ConfigError("preset " + std::string(name) + ": positive dim required");
    return *p.dim;
  };
  if (name == "dirichlet") return presets::dirichlet(need_dim());
  if (name == "neumann") return presets::neumann(need_dim());
  if (name == "periodic") return presets::periodic();
  if (name == "quasi_periodic") return presets::quasi_periodic(p.alpha.value_or(0.0));
  if (name == "two_interval_U1") return presets::two_interval_U1();
  if (name == "two_interval_U2") return presets::two_interval_U2();
  if (name == "block_pasting") {
    if (!p.t1 || !p.t2) throw ConfigError("preset block_pasting: transfer maps t1 and t2 required");
    return pasting_unitary(*p.t1, *p.t2);
  }
  if (name == "custom") {
    if (!p.matrix) throw ConfigError("preset custom: matrix required");
    return BoundaryUnitary::from_matrix(*p.matrix);
  }
  throw ConfigError("preset: unknown boundary preset '" + std::string(name) + "'");
}

}  // namespace qbound
