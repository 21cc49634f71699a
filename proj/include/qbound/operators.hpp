#pragma once

// Discrete Hermitian realizations: the Laplacian under a boundary unitary
// (quadratic-form assembly with Dirichlet constraints eliminated), the
// twisted momentum operator and the Faraday effective Hamiltonian.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "qbound/boundary.hpp"
#include "qbound/geometry.hpp"
#include "qbound/linalg.hpp"
#include "qbound/types.hpp"

namespace qbound {

inline constexpr double kConstraintRankTol = 1e-10;

/// Generalized problem K x = λ M x on reduced degrees of freedom. Reduced
/// vectors embed into node space through `lift` (Z), whose columns are
/// orthonormal in the trapezoidal inner product, so M is the identity unless
/// an operator is built by hand.
struct HermitianOperator {
  SpMat stiffness;
  RVec mass;
  SpMat lift;         // N × n
  SpMat constraints;  // k × N, C (Z x) = 0
  MeshPtr mesh;
  std::string descriptor;

  [[nodiscard]] int dim() const { return static_cast<int>(stiffness.rows()); }
  [[nodiscard]] const RVec& node_weights() const { return mesh->weights; }

  [[nodiscard]] CVec lift_vector(const CVec& x) const { return lift * x; }

  /// M-orthogonal projection of node values onto the reduced space.
  [[nodiscard]] CVec project(const CVec& nodes) const {
    CVec wx = nodes.cwiseProduct(mesh->weights.cast<cplx>());
    CVec y = lift.adjoint() * wx;
    return y.cwiseQuotient(mass.cast<cplx>());
  }

  [[nodiscard]] cplx inner(const CVec& x, const CVec& y) const { return linalg::weighted_dot(x, mass, y); }
  [[nodiscard]] double norm(const CVec& x) const { return linalg::weighted_norm(x, mass); }
  [[nodiscard]] double energy(const CVec& x) const {
    const double n2 = norm(x);
    return n2 > 0.0 ? (x.adjoint() * (stiffness * x))(0).real() / (n2 * n2) : 0.0;
  }
  [[nodiscard]] double hermitian_defect() const { return linalg::hermitian_defect(stiffness); }
};

using OperatorPtr = std::shared_ptr<const HermitianOperator>;

struct Wavefunction {
  CVec amplitudes;
  OperatorPtr op;

  [[nodiscard]] double norm() const { return op->norm(amplitudes); }
  [[nodiscard]] CVec nodes() const { return op->lift_vector(amplitudes); }
};

namespace detail {

inline SpMat dirichlet_form(const Mesh& mesh) {
  std::vector<Triplet> t;
  for (const auto& b : mesh_bonds(mesh)) {
    t.emplace_back(b.a, b.a, b.weight);
    t.emplace_back(b.b, b.b, b.weight);
    t.emplace_back(b.a, b.b, -b.weight);
    t.emplace_back(b.b, b.a, -b.weight);
  }
  SpMat k(mesh.node_count(), mesh.node_count());
  k.setFromTriplets(t.begin(), t.end());
  return k;
}

/// Eliminates linear constraints C_B φ_B = 0 on boundary node values. The
/// null space is taken in mass-scaled coordinates so that the lift is
/// M-orthonormal.
inline std::shared_ptr<HermitianOperator> reduce(const MeshPtr& mesh, const SpMat& k_full, const CMat& c_boundary,
                                                 std::string descriptor) {
  const int N = mesh->node_count();
  const int ni = mesh->interior_count;
  const int nb = mesh->boundary_count();
  if (c_boundary.cols() != nb) throw DimensionError("constraint rows must act on the boundary nodes");
  const RVec mb = mesh->weights.tail(nb);
  const RVec inv_sqrt_mb = mb.cwiseSqrt().cwiseInverse();

  CMat basis;
  if (c_boundary.rows() == 0) {
    basis = CMat::Identity(nb, nb);
  } else {
    const CMat cy = c_boundary * inv_sqrt_mb.asDiagonal();
    int rank = 0;
    basis = linalg::null_space(cy, kConstraintRankTol, &rank);
    if (rank < c_boundary.rows())
      throw AssemblyError("constraint elimination is rank deficient (" + std::to_string(rank) + " of " +
                          std::to_string(c_boundary.rows()) + " constraints independent)");
  }
  const int nred = ni + static_cast<int>(basis.cols());

  std::vector<Triplet> zt;
  zt.reserve(static_cast<size_t>(ni + nb * basis.cols()));
  for (int i = 0; i < ni; ++i) zt.emplace_back(i, i, 1.0 / std::sqrt(mesh->weights(i)));
  for (int c = 0; c < basis.cols(); ++c)
    for (int r = 0; r < nb; ++r)
      if (std::abs(basis(r, c)) > 1e-15) zt.emplace_back(ni + r, ni + c, basis(r, c) * inv_sqrt_mb(r));

  auto op = std::make_shared<HermitianOperator>();
  op->mesh = mesh;
  op->descriptor = std::move(descriptor);
  op->lift.resize(N, nred);
  op->lift.setFromTriplets(zt.begin(), zt.end());
  SpMat zh = op->lift.adjoint();
  op->stiffness = zh * k_full * op->lift;
  // symmetrize away roundoff
  op->stiffness = 0.5 * (op->stiffness + SpMat(op->stiffness.adjoint()));
  op->stiffness.prune(cplx(0.0), 0.0);
  op->mass = RVec::Ones(nred);

  std::vector<Triplet> ct;
  for (int r = 0; r < c_boundary.rows(); ++r)
    for (int c = 0; c < nb; ++c)
      if (c_boundary(r, c) != cplx(0.0)) ct.emplace_back(r, ni + c, c_boundary(r, c));
  op->constraints.resize(c_boundary.rows(), N);
  op->constraints.setFromTriplets(ct.begin(), ct.end());
  return op;
}

inline void add_boundary_block(const Mesh& mesh, SpMat& k_full, const CMat& block) {
  const int ni = mesh.interior_count;
  std::vector<Triplet> t;
  for (int j = 0; j < block.cols(); ++j)
    for (int i = 0; i < block.rows(); ++i)
      if (block(i, j) != cplx(0.0)) t.emplace_back(ni + i, ni + j, block(i, j));
  SpMat b(k_full.rows(), k_full.cols());
  b.setFromTriplets(t.begin(), t.end());
  k_full += b;
}

}  // namespace detail

/// −Δ under the self-adjoint boundary condition `bc`: form ⟨dΦ,dΨ⟩ −
/// ⟨φ_⊥, A ψ_⊥⟩_∂Ω on the subspace P_W φ = 0. Boundary data are taken in
/// unitary coordinates φ̃ = W_∂^{1/2} φ.
inline OperatorPtr assemble_laplacian(const MeshPtr& mesh, const BoundaryOps& bops, const SelfAdjointBC& bc,
                                      std::string descriptor = "laplacian") {
  const int nb = mesh->boundary_count();
  if (bc.dim() != nb)
    throw DimensionError("assemble_laplacian: boundary condition has dimension " + std::to_string(bc.dim()) +
                         ", mesh boundary has " + std::to_string(nb) + " nodes");
  const RVec sw = bops.weights.cwiseSqrt();
  SpMat k = detail::dirichlet_form(*mesh);
  if (bc.complement_basis.cols() > 0 && linalg::max_abs(bc.robin) > 0.0) {
    const CMat q = sw.asDiagonal() * bc.complement_basis;
    detail::add_boundary_block(*mesh, k, -(q * bc.robin * q.adjoint()));
  }
  const CMat c = bc.dirichlet_basis.adjoint() * sw.asDiagonal();
  return detail::reduce(mesh, k, c, std::move(descriptor));
}

inline OperatorPtr assemble_laplacian(const MeshPtr& mesh, const BoundaryOps& bops, const BoundaryUnitary& u,
                                      std::string descriptor = "laplacian") {
  return assemble_laplacian(mesh, bops, cayley_decompose(u), std::move(descriptor));
}

/// Hermitian part of the Galerkin momentum form i∫ Φ̄ ∂_axis Ψ on node space.
inline SpMat momentum_form(const Mesh& mesh, int axis) {
  std::vector<Triplet> t;
  for (const auto& b : mesh_bonds(mesh)) {
    if (b.axis != axis) continue;
    t.emplace_back(b.a, b.b, cplx(0.0, 0.5 * b.cross_section));
    t.emplace_back(b.b, b.a, cplx(0.0, -0.5 * b.cross_section));
  }
  SpMat p(mesh.node_count(), mesh.node_count());
  p.setFromTriplets(t.begin(), t.end());
  return p;
}

/// P = i d/dx on one interval with Φ(a) = e^{iα} Φ(b); central differences.
inline OperatorPtr assemble_momentum(const MeshPtr& mesh, double alpha) {
  if (mesh->dimension != 1 || mesh->segments.size() != 1)
    throw DomainError("assemble_momentum: unsupported domain (single interval required)");
  CMat c(1, 2);
  c(0, 0) = 1.0;
  c(0, 1) = -std::polar(1.0, alpha);
  return detail::reduce(mesh, momentum_form(*mesh, 0), c, "momentum alpha=" + std::to_string(alpha));
}

/// Nearest-neighbour correlation Re Σ conj(v_a) v_b / Σ (|v_a|²+|v_b|²)/2 over
/// mesh bonds; ≈ cos(k h) for a plane wave, negative for grid-scale modes.
inline double nearest_neighbour_correlation(const Mesh& mesh, const CVec& nodes) {
  double num = 0.0, den = 0.0;
  for (const auto& b : mesh_bonds(mesh)) {
    num += (std::conj(nodes(b.a)) * nodes(b.b)).real();
    den += 0.5 * (std::norm(nodes(b.a)) + std::norm(nodes(b.b)));
  }
  return den > 0.0 ? num / den : 0.0;
}

/// Faraday effective Hamiltonian (i d/dθ − ε)² + θ ε̇ on the periodic
/// reference domain over [0, 2π]. The magnetic term enters through link
/// phases e^{iεh}; θ takes grid values in [0, 2π).
inline OperatorPtr assemble_faraday(const MeshPtr& mesh, double epsilon, double epsilon_dot) {
  if (!mesh->is_single_interval(0.0, 2.0 * pi)) throw DomainError("assemble_faraday: mesh must be the interval [0, 2pi]");
  const auto& seg = mesh->segments.front();
  const cplx link = std::polar(1.0, epsilon * seg.h);
  std::vector<Triplet> t;
  for (int j = 0; j < seg.cells; ++j) {
    const int a = seg.nodes[j], b = seg.nodes[j + 1];
    const double w = 1.0 / seg.h;
    t.emplace_back(a, a, w);
    t.emplace_back(b, b, w);
    t.emplace_back(a, b, -w * link);
    t.emplace_back(b, a, -w * std::conj(link));
  }
  if (epsilon_dot != 0.0) {
    for (int j = 0; j <= seg.cells; ++j) {
      const int id = seg.nodes[j];
      double theta = mesh->coords[id][0];
      if (theta >= 2.0 * pi - 1e-12) theta = 0.0;
      t.emplace_back(id, id, epsilon_dot * mesh->weights(id) * theta);
    }
  }
  SpMat k(mesh->node_count(), mesh->node_count());
  k.setFromTriplets(t.begin(), t.end());
  const auto bc = cayley_decompose(presets::periodic());
  const CMat c = bc.dirichlet_basis.adjoint();
  return detail::reduce(mesh, k, c,
                        "faraday eps=" + std::to_string(epsilon) + " eps_dot=" + std::to_string(epsilon_dot));
}

}  // namespace qbound
