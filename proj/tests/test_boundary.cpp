#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "qbound/boundary.hpp"

using namespace qbound;

namespace {

double mat_err(const CMat& a, const CMat& b) { return (a - b).cwiseAbs().maxCoeff(); }

CMat swap2() {
  CMat m = CMat::Zero(2, 2);
  m(0, 1) = m(1, 0) = 1.0;
  return m;
}

}  // namespace

TEST_CASE("presets", "[boundary]") {
  CHECK(mat_err(unitary_from_preset("dirichlet", PresetParams{2, {}, {}, {}, {}}).matrix(), -CMat::Identity(2, 2)) == 0.0);
  CMat anti = CMat::Zero(4, 4);
  for (int i = 0; i < 4; ++i) anti(i, 3 - i) = 1.0;
  CHECK(mat_err(unitary_from_preset("two_interval_U2").matrix(), anti) == 0.0);
  CHECK(mat_err(presets::quasi_periodic(0.0).matrix(), swap2()) == 0.0);
  CHECK(mat_err(presets::periodic().matrix(), swap2()) == 0.0);
  CHECK_THROWS_WITH(unitary_from_preset("nonsense"), Catch::Matchers::ContainsSubstring("preset"));
}

TEST_CASE("non-unitary matrices are rejected", "[boundary]") {
  CMat m = CMat::Identity(2, 2);
  m(0, 1) = 1e-6;
  CHECK_THROWS_AS(BoundaryUnitary::from_matrix(m), ValidationError);
  CHECK_THROWS_AS(BoundaryUnitary::from_matrix(CMat(2, 3)), DimensionError);
}

TEST_CASE("minus one eigenphase is snapped to +pi", "[boundary]") {
  const auto u = presets::dirichlet(3);
  for (int k = 0; k < 3; ++k) CHECK(u.phases()(k) == pi);
  CMat m = CMat::Identity(2, 2);
  m(0, 0) = std::polar(1.0, -pi + 1e-10);
  const auto v = BoundaryUnitary::from_matrix(m);
  CHECK((v.phases()(0) == pi || v.phases()(1) == pi));
}

TEST_CASE("Cayley decomposition of the basic conditions", "[boundary]") {
  const auto n = cayley_decompose(presets::neumann(2));
  CHECK(n.dirichlet_rank() == 0);
  CHECK(n.robin.cwiseAbs().maxCoeff() == 0.0);

  const auto d = cayley_decompose(presets::dirichlet(2));
  CHECK(d.dirichlet_rank() == 2);
  CHECK(d.complement_basis.cols() == 0);

  const auto p = cayley_decompose(presets::periodic());
  REQUIRE(p.dirichlet_rank() == 1);
  // W = span{(1,−1)/√2}
  const CVec w = p.dirichlet_basis.col(0);
  CHECK(std::abs(std::abs(w(0)) - 1.0 / std::sqrt(2.0)) < 1e-12);
  CHECK(std::abs(w(0) + w(1)) < 1e-12);
  CHECK(p.robin.cwiseAbs().maxCoeff() < 1e-12);
  // complement (1,1)/√2: φ̇(0) + φ̇(1) = 0
  const CVec c = p.complement_basis.col(0);
  CHECK(std::abs(c(0) - c(1)) < 1e-12);
}

TEST_CASE("Robin part equals the partial Cayley transform", "[boundary]") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto u = BoundaryUnitary::from_matrix(linalg::haar_unitary(3, rng), 1e-10);
    const auto bc = cayley_decompose(u);
    CHECK(linalg::hermitian_defect(bc.robin) < 1e-12);
    CMat q(3, 3);
    q << bc.dirichlet_basis, bc.complement_basis;
    CHECK(linalg::unitarity_defect(q) < 1e-12);
    // A = i(I+U)^{-1}(U−I) restricted to W^⊥, eigenvalues −tan(θ/2)
    const CMat id = CMat::Identity(3, 3);
    const CMat a_full = I_unit * (id + u.matrix()).inverse() * (u.matrix() - id);
    const CMat a = bc.complement_basis.adjoint() * a_full * bc.complement_basis;
    CHECK(mat_err(a, bc.robin) < 1e-10 * std::max(1.0, bc.robin.cwiseAbs().maxCoeff()));
    for (int k = 0; k < bc.complement_phases.size(); ++k)
      CHECK(std::abs(bc.robin(k, k).real() + std::tan(0.5 * bc.complement_phases(k))) <
            1e-10 * std::max(1.0, std::abs(bc.robin(k, k))));
  }
}

TEST_CASE("Cayley tolerance is validated", "[boundary]") {
  CHECK_THROWS_AS(cayley_decompose(presets::periodic(), 0.0), ValidationError);
  CHECK_THROWS_AS(cayley_decompose(presets::periodic(), 1e-3), ValidationError);
}

TEST_CASE("spectral gap examples", "[boundary]") {
  const auto i2 = spectral_gap(presets::neumann(2));
  CHECK(i2.gap == 2.0);
  CHECK(i2.classification == GapClass::invertible_I_plus_U);

  CMat m = CMat::Zero(2, 2);
  m(0, 0) = -1.0;
  m(1, 1) = I_unit;
  const auto g = spectral_gap(BoundaryUnitary::from_matrix(m));
  CHECK(std::abs(g.gap - std::sqrt(2.0)) < 1e-12);
  CHECK(g.classification == GapClass::isolated_minus_one);

  const auto q = spectral_gap(presets::quasi_periodic(0.7));
  CHECK(std::abs(q.gap - 2.0) < 1e-12);
  CHECK(spectral_gap(presets::dirichlet(2)).gap == 2.0);

  CMat near = CMat::Identity(2, 2);
  near(1, 1) = std::polar(1.0, pi - 1e-7);
  CHECK(spectral_gap(BoundaryUnitary::from_matrix(near)).classification == GapClass::no_gap);
}

TEST_CASE("spectral gap is invariant under conjugation", "[boundary]") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const CMat u = linalg::haar_unitary(4, rng);
    const CMat v = linalg::haar_unitary(4, rng);
    const double g1 = spectral_gap(BoundaryUnitary::from_matrix(u, 1e-10)).gap;
    const double g2 = spectral_gap(BoundaryUnitary::from_matrix(v * u * v.adjoint(), 1e-10)).gap;
    CHECK(std::abs(g1 - g2) < 1e-12);
  }
}

TEST_CASE("alpha from flux", "[boundary]") {
  CHECK(std::abs(alpha_from_flux(0.25) + pi / 2) < 1e-15);
  CHECK(std::abs(alpha_from_flux(0.5) - pi) < 1e-15);
  CHECK(std::abs(alpha_from_flux(1.0)) < 1e-15);
}

TEST_CASE("edge transfer maps", "[boundary]") {
  SECTION("identity") {
    EdgeSamples e{RVec::LinSpaced(6, 0.0, 1.0), RVec::Constant(6, 0.2)};
    const auto t = edge_transfer_map(e, e, e.params);
    CHECK(mat_err(t.unitary, CMat::Identity(6, 6)) < 1e-12);
  }
  SECTION("affine, lengths 1 and 2") {
    const int n = 9;
    EdgeSamples ref{RVec::LinSpaced(n, 0.0, 1.0), RVec::Constant(n, 1.0 / (n - 1))};
    EdgeSamples edge{RVec::LinSpaced(n, 0.0, 2.0), RVec::Constant(n, 2.0 / (n - 1))};
    const RVec g = 2.0 * ref.params;
    const auto t = edge_transfer_map(edge, ref, g);
    CHECK((t.jacobian.array() - 2.0).abs().maxCoeff() < 1e-12);
    const CVec ones = CVec::Ones(n);
    CHECK(((t.raw * ones).array() - std::sqrt(2.0)).abs().maxCoeff() < 1e-12);
    CHECK(linalg::unitarity_defect(t.unitary) < 1e-12);
  }
  SECTION("quadratic reparametrization") {
    const int n = 12;
    EdgeSamples ref{RVec::LinSpaced(n, 0.05, 1.0), RVec::Constant(n, 0.95 / (n - 1))};
    EdgeSamples edge{ref.params.array().square(), RVec::Constant(n, 0.95 / (n - 1))};
    const RVec g = ref.params.array().square();
    const auto t = edge_transfer_map(edge, ref, g);
    CHECK(linalg::unitarity_defect(t.unitary) < 1e-12);
  }
  SECTION("non-monotone g is rejected") {
    EdgeSamples e{RVec::LinSpaced(4, 0.0, 1.0), RVec::Constant(4, 0.25)};
    RVec g(4);
    g << 0.0, 0.5, 0.4, 1.0;
    CHECK_THROWS_AS(edge_transfer_map(e, e, g), ValidationError);
  }
}

TEST_CASE("pasting unitaries", "[boundary]") {
  const CMat one = CMat::Identity(1, 1);
  CHECK(mat_err(pasting_unitary(one, one).matrix(), swap2()) == 0.0);

  // pieces (a1,b1,a2,b2): glue b1↔a2 and b2↔a1 with identity transfers
  const auto mesh = make_mesh(IntervalUnion{{{0.0, 1.0}, {0.0, 1.0}}}, 10);
  const CMat p = pasting_unitary(one, one).matrix();
  const auto u = boundary_unitary_from_blocks(*mesh, {{{1, 2}, p}, {{3, 0}, p}});
  CHECK(mat_err(u.matrix(), presets::two_interval_U2().matrix()) == 0.0);

  CHECK_THROWS_AS(boundary_unitary_from_blocks(*mesh, {{{1, 2}, p}}), DimensionError);
}

TEST_CASE("torus and cylinder identifications", "[boundary]") {
  const auto mesh = make_mesh(Rectangle{1.0, 1.0}, 8);
  const auto b = boundary_operators(*mesh);
  const auto t = torus_unitary(*mesh, b);
  CHECK(linalg::unitarity_defect(t.matrix()) < 1e-12);
  const auto c = cylinder_unitary(*mesh, b);
  CHECK(linalg::unitarity_defect(c.matrix()) < 1e-12);
  const auto bp = block_pasting_unitary(*mesh, b, {{"left", "right"}, {"bottom", "top"}});
  CHECK(linalg::unitarity_defect(bp.matrix()) < 1e-12);
  // block pasting and identification agree away from the corners
  const int nb = mesh->boundary_count();
  const auto corners = std::vector<int>{0, 8, 16, 24};
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < nb; ++j) {
      const bool corner = std::find(corners.begin(), corners.end(), i) != corners.end() ||
                          std::find(corners.begin(), corners.end(), j) != corners.end();
      if (!corner) CHECK(std::abs(t.matrix()(i, j) - bp.matrix()(i, j)) < 1e-12);
    }
}

TEST_CASE("path interpolation", "[boundary]") {
  std::mt19937_64 rng(3);
  const auto ua = BoundaryUnitary::from_matrix(linalg::haar_unitary(4, rng), 1e-10);
  const auto ub = BoundaryUnitary::from_matrix(linalg::haar_unitary(4, rng), 1e-10);
  for (auto rule : {PathRule::eigenphase, PathRule::great_circle}) {
    CHECK(mat_err(interpolate_path(ua, ub, rule, 0.0).matrix(), ua.matrix()) == 0.0);
    CHECK(mat_err(interpolate_path(ua, ub, rule, 1.0).matrix(), ub.matrix()) == 0.0);
    for (int j = 0; j <= 20; ++j)
      CHECK(linalg::unitarity_defect(interpolate_path(ua, ub, rule, j / 20.0).matrix()) < 1e-12);
    for (double s : {0.3, 0.8}) CHECK(mat_err(interpolate_path(ua, ua, rule, s).matrix(), ua.matrix()) < 1e-12);
  }
  const auto half = interpolate_path(presets::neumann(2), presets::periodic(), PathRule::eigenphase, 0.5);
  CMat expect(2, 2);
  expect << cplx(1, 1), cplx(1, -1), cplx(1, -1), cplx(1, 1);
  CHECK(mat_err(half.matrix(), 0.5 * expect) < 1e-12);
}

TEST_CASE("U1 to U2 gap profile", "[boundary]") {
  const auto p = make_bc_path(presets::two_interval_U1(), presets::two_interval_U2(), PathRule::eigenphase, 101);
  REQUIRE(p.gap_profile.size() == 101);
  CHECK(p.min_gap >= 0.0);
  CHECK(p.min_gap < 0.1);
  for (double g : p.gap_profile) CHECK(std::isfinite(g));
  // interior samples keep one exact −1 eigenvalue
  CHECK(spectral_gap(p.at(0.5)).classification == GapClass::isolated_minus_one);
}

TEST_CASE("Cayley round trip on random unitaries", "[boundary]") {
  std::mt19937_64 rng(2024);
  for (int dim : {2, 4}) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto u = BoundaryUnitary::from_matrix(linalg::haar_unitary(dim, rng), 1e-10);
      const auto bc = cayley_decompose(u);
      // constraints → boundary law
      const CVec x = linalg::random_complex(static_cast<int>(bc.complement_basis.cols()), rng);
      const CVec y = linalg::random_complex(bc.dirichlet_rank(), rng);
      const CVec phi = bc.complement_basis * x;
      const CVec dphi = bc.complement_basis * (bc.robin * x) + bc.dirichlet_basis * y;
      const double scale = phi.norm() + dphi.norm();
      CHECK(boundary_condition_residual(u, phi, dphi) < 1e-10 * scale);
      // boundary law → constraints
      const CVec v = linalg::random_complex(dim, rng);
      const CVec phi2 = 0.5 * (v + u.matrix() * v);
      const CVec dphi2 = (v - u.matrix() * v) / (2.0 * I_unit);
      CHECK(bc.constraint_residual(phi2, dphi2) < 1e-10 * (phi2.norm() + dphi2.norm()) *
                                                      std::max(1.0, bc.robin.cwiseAbs().maxCoeff()));
    }
  }
}
