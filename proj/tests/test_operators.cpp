#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qbound/operators.hpp"
#include "qbound/spectra.hpp"

using namespace qbound;

namespace {

struct Setup {
  MeshPtr mesh;
  BoundaryOps bops;
};

Setup interval(double a, double b, double n) {
  auto m = make_mesh(IntervalUnion{{{a, b}}}, n);
  return {m, boundary_operators(*m)};
}

Setup two_intervals(double n) {
  auto m = make_mesh(IntervalUnion{{{0.0, 1.0}, {0.0, 1.0}}}, n);
  return {m, boundary_operators(*m)};
}

std::vector<double> lowest(const OperatorPtr& op, int k) {
  const auto r = eigensolve(op, k);
  return {r.values.data(), r.values.data() + r.size()};
}

double max_rel(const std::vector<double>& got, const std::vector<double>& ref) {
  double e = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) e = std::max(e, oracle::rel_err(got[i], ref[i]));
  return e;
}

std::vector<int> cluster_sizes(const SpectralResult& r) {
  std::vector<int> out;
  for (const auto& c : r.clusters) out.push_back(static_cast<int>(c.size()));
  return out;
}

// Dense spectrum of a small operator with its lifted eigenvectors.
struct Dense {
  RVec values;
  CMat nodes;
};

Dense dense_spectrum(const HermitianOperator& op) {
  const RVec is = op.mass.cwiseSqrt().cwiseInverse();
  const CMat a = is.asDiagonal() * CMat(op.stiffness) * is.asDiagonal();
  Eigen::SelfAdjointEigenSolver<CMat> es(a);
  return {es.eigenvalues(), op.lift * (is.asDiagonal() * es.eigenvectors())};
}

// Physical (smooth) eigenvalue of P closest to `target`.
double nearest_physical(const Dense& d, const Mesh& mesh, double target) {
  double best = 1e300;
  for (int c = 0; c < d.values.size(); ++c) {
    if (nearest_neighbour_correlation(mesh, d.nodes.col(c)) <= 0.0) continue;
    if (std::abs(d.values(c) - target) < std::abs(best - target)) best = d.values(c);
  }
  return best;
}

}  // namespace

TEST_CASE("Dirichlet ground state on the unit interval", "[operators]") {
  auto s = interval(0.0, 1.0, 1000);
  const auto op = assemble_laplacian(s.mesh, s.bops, presets::dirichlet(2));
  CHECK(op->hermitian_defect() < 1e-12);
  CHECK(oracle::rel_err(lowest(op, 1)[0], oracle::pi * oracle::pi) < 1e-3);
}

TEST_CASE("quasi-periodic ring spectrum", "[operators]") {
  auto s = interval(0.0, 2.0 * pi, 2000.0 / (2.0 * pi));
  const auto op = assemble_laplacian(s.mesh, s.bops, presets::quasi_periodic(alpha_from_flux(0.25)));
  const auto got = lowest(op, 3);
  CHECK(std::abs(got[0] - 0.0625) < 1e-3 * 0.0625);
  CHECK(std::abs(got[1] - 0.5625) < 1e-3 * 0.5625);
  CHECK(std::abs(got[2] - 1.5625) < 1e-3 * 1.5625);
}

TEST_CASE("two intervals glued into circles", "[operators]") {
  auto s = two_intervals(1000);
  const auto r1 = eigensolve(assemble_laplacian(s.mesh, s.bops, presets::two_interval_U1()), 6);
  const auto r2 = eigensolve(assemble_laplacian(s.mesh, s.bops, presets::two_interval_U2()), 5);
  const auto ref1 = oracle::two_circles(1.0, 1.0, 6);
  const auto ref2 = oracle::circle(2.0, 5);
  CHECK(max_rel({r1.values.data(), r1.values.data() + 6}, ref1) < 1e-3);
  CHECK(max_rel({r2.values.data(), r2.values.data() + 5}, ref2) < 1e-3);
  CHECK(cluster_sizes(r1) == std::vector<int>{2, 4});
  CHECK(cluster_sizes(r2) == std::vector<int>{1, 2, 2});
}

TEST_CASE("momentum operator", "[operators]") {
  auto s = interval(0.0, 1.0, 200);
  const auto p0 = assemble_momentum(s.mesh, 0.0);
  const auto p1 = assemble_momentum(s.mesh, pi / 2);
  CHECK(p0->hermitian_defect() < 1e-12);
  CHECK(p1->hermitian_defect() < 1e-12);
  const auto d0 = dense_spectrum(*p0);
  const auto d1 = dense_spectrum(*p1);
  CHECK(std::abs(nearest_physical(d0, *s.mesh, 0.0)) < 1e-10);
  CHECK(std::abs(nearest_physical(d0, *s.mesh, 2 * pi) - 2 * pi) < 2e-3 * 2 * pi);
  CHECK(std::abs(nearest_physical(d0, *s.mesh, -2 * pi) + 2 * pi) < 2e-3 * 2 * pi);
  CHECK(std::abs(nearest_physical(d1, *s.mesh, pi / 2) - pi / 2) < 1e-4);
  CHECK(std::abs(nearest_physical(d1, *s.mesh, pi / 2 - 2 * pi) - (pi / 2 - 2 * pi)) < 2e-3 * 2 * pi);
  // shift property: P_α ≈ P_0 + α on low modes, O(h²)
  for (int m = -2; m <= 2; ++m) {
    const double a = nearest_physical(d1, *s.mesh, 2 * pi * m + pi / 2);
    const double b = nearest_physical(d0, *s.mesh, 2 * pi * m);
    CHECK(std::abs(a - b - pi / 2) < 5e-3);
  }
  auto two = two_intervals(50);
  CHECK_THROWS_AS(assemble_momentum(two.mesh, 0.0), DomainError);
}

TEST_CASE("Faraday operator", "[operators]") {
  auto s = interval(0.0, 2.0 * pi, 100);
  const auto f0 = assemble_faraday(s.mesh, 0.0, 0.0);
  const auto r0 = eigensolve(f0, 5);
  const std::vector<double> ref0{0, 1, 1, 4, 4};
  CHECK(max_rel({r0.values.data(), r0.values.data() + 5}, ref0) < 1e-3);
  CHECK(cluster_sizes(r0) == std::vector<int>{1, 2, 2});

  const auto r1 = eigensolve(assemble_faraday(s.mesh, 0.25, 0.0), 5);
  CHECK(max_rel({r1.values.data(), r1.values.data() + 5}, oracle::flux_ring(0.25, 5)) < 1e-3);

  const auto f2 = assemble_faraday(s.mesh, 0.3, 0.7);
  CHECK(f2->hermitian_defect() < 1e-12);
  CHECK_THROWS_AS(assemble_faraday(interval(0.0, 1.0, 50).mesh, 0.0, 0.0), DomainError);
}

TEST_CASE("gauge equivalence of quasi-periodic and magnetic Laplacians", "[operators]") {
  auto s = interval(0.0, 2.0 * pi, 2000.0 / (2.0 * pi));
  for (double eps : {0.1, 0.25, 0.4}) {
    const auto q = lowest(assemble_laplacian(s.mesh, s.bops, presets::quasi_periodic(alpha_from_flux(eps))), 6);
    const auto f = lowest(assemble_faraday(s.mesh, eps, 0.0), 6);
    for (int j = 0; j < 6; ++j) CHECK(oracle::rel_err(q[j], f[j]) < 1e-6);
  }
}

TEST_CASE("eigenvalue convergence order", "[operators]") {
  struct Case {
    const char* name;
    BoundaryUnitary u;
    std::vector<double> ref;
  };
  std::vector<double> qp;
  for (int m = -4; m <= 4; ++m) qp.push_back(std::pow(2 * pi * (m + 0.25), 2));
  std::vector<Case> cases{{"dirichlet", presets::dirichlet(2), oracle::dirichlet_interval(1.0, 5)},
                          {"neumann", presets::neumann(2), oracle::neumann_interval(1.0, 5)},
                          {"periodic", presets::periodic(), oracle::circle(1.0, 5)},
                          {"quasi_periodic", presets::quasi_periodic(alpha_from_flux(0.25)), oracle::take(qp, 5)}};
  for (const auto& c : cases) {
    std::vector<std::vector<double>> errs;
    for (double n : {250.0, 500.0, 1000.0}) {
      auto s = interval(0.0, 1.0, n);
      const auto got = lowest(assemble_laplacian(s.mesh, s.bops, c.u), 5);
      std::vector<double> e;
      for (int j = 0; j < 5; ++j) e.push_back(std::abs(got[j] - c.ref[j]));
      errs.push_back(e);
    }
    for (int j = 0; j < 5; ++j) {
      if (c.ref[j] == 0.0) {
        CHECK(errs[2][j] < 1e-8);
        continue;
      }
      for (int r = 0; r < 2; ++r) {
        const double order = std::log2(errs[r][j] / errs[r + 1][j]);
        INFO(c.name << " eigenvalue " << j << " refinement " << r << " order " << order);
        CHECK(order >= 1.9);
      }
    }
  }
}

TEST_CASE("lift is orthonormal and respects the constraints", "[operators]") {
  std::mt19937_64 rng(17);
  auto s = two_intervals(40);
  for (int t = 0; t < 10; ++t) {
    CMat m = linalg::haar_unitary(4, rng);
    // force a nontrivial −1 eigenspace on half the draws
    if (t % 2 == 0) {
      Eigen::ComplexEigenSolver<CMat> es(m);
      CVec d = CVec::Ones(4);
      d(0) = -1.0;
      d(1) = std::polar(1.0, 0.3);
      d(2) = std::polar(1.0, -1.2);
      m = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().inverse();
      m = linalg::polar_unitary(m);
    }
    const auto u = BoundaryUnitary::from_matrix(m, 1e-10);
    const auto op = assemble_laplacian(s.mesh, s.bops, u);
    const CMat z = CMat(op->lift);
    const CMat g = z.adjoint() * s.mesh->weights.cast<cplx>().asDiagonal() * z;
    CHECK(linalg::max_abs(g - CMat::Identity(g.rows(), g.cols())) < 1e-12);
    CHECK((op->mass.array() > 0.0).all());
    CHECK(op->hermitian_defect() < 1e-12);
    const CVec x = linalg::random_complex(op->dim(), rng);
    const CVec lifted = op->lift * x;
    const auto bc = cayley_decompose(u);
    const CVec phi = s.bops.weights.cwiseSqrt().cast<cplx>().cwiseProduct(s.bops.trace * lifted);
    if (bc.dirichlet_rank() > 0) CHECK((bc.dirichlet_basis.adjoint() * phi).norm() < 1e-12 * lifted.norm());
  }
}

TEST_CASE("dimension mismatch is rejected", "[operators]") {
  auto s = interval(0.0, 1.0, 20);
  CHECK_THROWS_AS(assemble_laplacian(s.mesh, s.bops, presets::dirichlet(4)), DimensionError);
}

TEST_CASE("semiboundedness witness", "[operators]") {
  std::mt19937_64 rng(99);
  auto s = interval(0.0, 1.0, 200);
  double c = 0.0;
  int drawn = 0;
  while (drawn < 50) {
    const auto u = BoundaryUnitary::from_matrix(linalg::haar_unitary(2, rng), 1e-10);
    if (spectral_gap(u).gap <= 0.5) continue;
    ++drawn;
    const double lmin = eigensolve(assemble_laplacian(s.mesh, s.bops, u), 1).values(0);
    REQUIRE(std::isfinite(lmin));
    c = std::max(c, -lmin);
  }
  INFO("C = " << c);
  CHECK(std::isfinite(c));
  // −1 = tan bound: the most negative Robin coefficient is −tan(θ/2) with |1 + e^{iθ}| > 1/2
  const double amax = std::tan(0.5 * (pi - 2.0 * std::asin(0.25)));
  CHECK(c <= 2.0 * amax * amax + 1.0);

  for (int t = 0; t < 20; ++t) {
    const CMat v = linalg::haar_unitary(2, rng);
    CVec d(2);
    d << (t % 2 ? 1.0 : -1.0), (t % 3 ? 1.0 : -1.0);
    const auto u = BoundaryUnitary::from_matrix(v * d.asDiagonal() * v.adjoint(), 1e-10);
    CHECK(eigensolve(assemble_laplacian(s.mesh, s.bops, u), 1).values(0) >= -1e-9);
  }
}
