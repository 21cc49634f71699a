#pragma once

// Lowest eigenpairs of K x = λ M x, spectral flow along paths of boundary
// unitaries, the bracketing check, the intertwiner V_u and the hypothesis
// report along a path.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "qbound/boundary.hpp"
#include "qbound/geometry.hpp"
#include "qbound/linalg.hpp"
#include "qbound/operators.hpp"
#include "qbound/types.hpp"

namespace qbound {

inline constexpr double kClusterTol = 1e-6;

struct EigensolveOptions {
  double cluster_tol = kClusterTol;  // relative, times max(1, |λ|)
  double residual_tol = 1e-10;       // on h̄‖Kv − λMv‖ / ‖v‖, see residual_scale
  int max_iterations = 3000;
  int dense_limit = 300;
  bool canonicalize = true;
  std::uint64_t seed = 0x5eedULL;
};

/// Mean quadrature weight h̄. Reduced coordinates carry M = I, so K there has
/// entries ~1/h²; h̄K, h̄M is the same pencil in the usual stiffness scaling
/// (entries ~1/h) and is where residuals are measured.
inline double residual_scale(const HermitianOperator& op) {
  return op.mesh ? op.mesh->volume() / op.mesh->node_count() : 1.0;
}

struct SpectralResult {
  RVec values;   // ascending
  CMat vectors;  // reduced coordinates, M-orthonormal columns
  std::vector<std::vector<int>> clusters;
  OperatorPtr op;

  [[nodiscard]] int size() const { return static_cast<int>(values.size()); }
  [[nodiscard]] CMat lifted() const { return op->lift * vectors; }

  /// max_n ‖K v_n − λ_n M v_n‖ / ‖v_n‖ for the pencil h̄K, h̄M.
  [[nodiscard]] double max_residual() const {
    const double scale = residual_scale(*op);
    double r = 0.0;
    for (int c = 0; c < size(); ++c) {
      const CVec v = vectors.col(c);
      const CVec res = op->stiffness * v - values(c) * op->mass.cast<cplx>().cwiseProduct(v);
      r = std::max(r, scale * res.norm() / v.norm());
    }
    return r;
  }

  [[nodiscard]] double orthonormality_defect() const {
    const CMat g = vectors.adjoint() * op->mass.cast<cplx>().asDiagonal() * vectors;
    return linalg::max_abs(g - CMat::Identity(size(), size()));
  }

  [[nodiscard]] int cluster_of(int index) const {
    for (size_t c = 0; c < clusters.size(); ++c)
      if (std::find(clusters[c].begin(), clusters[c].end(), index) != clusters[c].end()) return static_cast<int>(c);
    return -1;
  }
};

namespace detail {

inline std::vector<std::vector<int>> group_clusters(const RVec& values, double rel_tol) {
  std::vector<std::vector<int>> out;
  for (int i = 0; i < values.size(); ++i) {
    if (i > 0 && values(i) - values(i - 1) <= rel_tol * std::max(1.0, std::abs(values(i - 1))))
      out.back().push_back(i);
    else
      out.push_back({i});
  }
  return out;
}

/// Makes the first node with |v_j| ≥ max|v|/2 real positive.
inline void fix_phase(const SpMat& lift, CMat& vectors) {
  const CMat nodes = lift * vectors;
  for (int c = 0; c < vectors.cols(); ++c) {
    const double m = nodes.col(c).cwiseAbs().maxCoeff();
    for (int j = 0; j < nodes.rows(); ++j) {
      const double a = std::abs(nodes(j, c));
      if (a >= 0.5 * m && a > 0.0) {
        vectors.col(c) *= std::conj(nodes(j, c)) / a;
        break;
      }
    }
  }
}

/// Diagonalizes the momentum forms inside each degenerate cluster so that a
/// degenerate eigenspace comes out as Fourier modes wherever that makes sense.
inline void canonicalize_clusters(const HermitianOperator& op, const std::vector<std::vector<int>>& clusters,
                                  CMat& vectors) {
  const Mesh& mesh = *op.mesh;
  std::vector<SpMat> forms;
  for (int axis = 0; axis < mesh.dimension; ++axis) forms.push_back(momentum_form(mesh, axis));
  for (const auto& cl : clusters) {
    if (cl.size() < 2) continue;
    std::vector<std::vector<int>> groups{cl};
    for (const auto& p : forms) {
      std::vector<std::vector<int>> next;
      for (const auto& g : groups) {
        if (g.size() < 2) {
          next.push_back(g);
          continue;
        }
        const int d = static_cast<int>(g.size());
        CMat x(vectors.rows(), d);
        for (int i = 0; i < d; ++i) x.col(i) = vectors.col(g[i]);
        const CMat y = op.lift * x;
        CMat c = y.adjoint() * (p * y);
        c = 0.5 * (c + c.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<CMat> es(c);
        const CMat xr = x * es.eigenvectors();
        for (int i = 0; i < d; ++i) vectors.col(g[i]) = xr.col(i);
        const RVec& mu = es.eigenvalues();
        std::vector<int> cur{g[0]};
        for (int i = 1; i < d; ++i) {
          if (mu(i) - mu(i - 1) <= 1e-6 * std::max(1.0, std::abs(mu(i - 1)))) {
            cur.push_back(g[i]);
          } else {
            next.push_back(cur);
            cur = {g[i]};
          }
        }
        next.push_back(cur);
      }
      groups = std::move(next);
    }
  }
}

inline void dense_eigensolve(const HermitianOperator& op, int k, RVec& values, CMat& vectors) {
  const RVec is = op.mass.cwiseSqrt().cwiseInverse();
  CMat a = CMat(op.stiffness);
  a = is.asDiagonal() * a * is.asDiagonal();
  a = 0.5 * (a + a.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<CMat> es(a);
  if (es.info() != Eigen::Success) throw SolverError("dense eigensolver failed to converge");
  values = es.eigenvalues().head(k);
  vectors = is.asDiagonal() * es.eigenvectors().leftCols(k);
}

inline double row_sum_norm(const SpMat& k) {
  RVec rows = RVec::Zero(k.rows());
  for (int c = 0; c < k.outerSize(); ++c)
    for (SpMat::InnerIterator it(k, c); it; ++it) rows(it.row()) += std::abs(it.value());
  return rows.size() ? rows.maxCoeff() : 0.0;
}

/// Shift-invert block subspace iteration with Rayleigh–Ritz. The shift lies
/// strictly below the spectrum, certified by the inertia of an LDLᵀ
/// factorization of K − σM.
inline void iterative_eigensolve(const HermitianOperator& op, int k, const EigensolveOptions& opt, RVec& values,
                                 CMat& vectors) {
  const int n = op.dim();
  const int p = std::min(n, 2 * k + 8);
  const RVec& m = op.mass;
  const double scale = residual_scale(op);
  const double knorm = row_sum_norm(op.stiffness);

  SpMat mdiag(n, n);
  {
    std::vector<Triplet> t;
    for (int i = 0; i < n; ++i) t.emplace_back(i, i, m(i));
    mdiag.setFromTriplets(t.begin(), t.end());
  }
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  double sigma = -1.0;
  bool ok = false;
  for (int attempt = 0; attempt < 80; ++attempt, sigma *= 2.0) {
    SpMat shifted = op.stiffness - sigma * mdiag;
    ldlt.compute(shifted);
    if (ldlt.info() != Eigen::Success) continue;
    const auto d = ldlt.vectorD();
    bool positive = true;
    for (int i = 0; i < d.size(); ++i)
      if (!(d(i).real() > 0.0)) {
        positive = false;
        break;
      }
    if (positive) {
      ok = true;
      break;
    }
  }
  if (!ok) throw SolverError("eigensolve: no shift below the spectrum found");

  std::mt19937_64 rng(opt.seed);
  CMat x(n, p);
  for (int j = 0; j < p; ++j) x.col(j) = linalg::random_complex(n, rng);

  const RVec sm = m.cwiseSqrt();
  const RVec ism = sm.cwiseInverse();
  RVec theta;
  double worst = 0.0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    CMat y = ldlt.solve(m.cast<cplx>().asDiagonal() * x);
    // M-orthonormalize
    CMat ys = sm.asDiagonal() * y;
    Eigen::HouseholderQR<CMat> qr(ys);
    CMat q = ism.asDiagonal() * (qr.householderQ() * CMat::Identity(n, p));
    CMat g = q.adjoint() * (op.stiffness * q);
    g = 0.5 * (g + g.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMat> es(g);
    theta = es.eigenvalues();
    x = q * es.eigenvectors();
    worst = 0.0;
    bool converged = true;
    for (int c = 0; c < k; ++c) {
      const CVec v = x.col(c);
      const CVec r = op.stiffness * v - theta(c) * m.cast<cplx>().cwiseProduct(v);
      const double res = scale * r.norm() / v.norm();
      const double tol = std::max(opt.residual_tol, 4.0 * std::numeric_limits<double>::epsilon() * knorm * scale);
      worst = std::max(worst, res / tol);
      if (res > tol) converged = false;
    }
    if (converged) {
      values = theta.head(k);
      vectors = x.leftCols(k);
      return;
    }
  }
  throw SolverError("eigensolve: no convergence after " + std::to_string(opt.max_iterations) +
                    " iterations (worst residual/tolerance " + std::to_string(worst) + ")");
}

}  // namespace detail

inline SpectralResult eigensolve(const OperatorPtr& op, int k, const EigensolveOptions& opt = {}) {
  if (k <= 0 || k > op->dim())
    throw PreconditionError("eigensolve: k=" + std::to_string(k) + " outside [1, " + std::to_string(op->dim()) + "]");
  SpectralResult out;
  out.op = op;
  if (op->dim() <= opt.dense_limit || 3 * k >= op->dim())
    detail::dense_eigensolve(*op, k, out.values, out.vectors);
  else
    detail::iterative_eigensolve(*op, k, opt, out.values, out.vectors);
  out.clusters = detail::group_clusters(out.values, opt.cluster_tol);
  if (opt.canonicalize) detail::canonicalize_clusters(*op, out.clusters, out.vectors);
  detail::fix_phase(op->lift, out.vectors);
  return out;
}

// ---- bracketing --------------------------------------------------------------

struct BracketReport {
  bool pass = true;
  RVec lambda_u, lambda_n, lambda_d;
  RVec lower_margin;  // λ(U) − λ^N
  RVec upper_margin;  // λ^D − λ(U)
  RVec tolerance;
};

/// Neumann and Dirichlet spectra shared by every bracket check on a mesh.
struct BracketReference {
  RVec lambda_n, lambda_d, tolerance;
};

/// tol_n = 10·λ_n^D² h²/12, ten times the leading second-order error term.
inline BracketReference bracket_reference(const MeshPtr& mesh, const BoundaryOps& bops, int k,
                                          const EigensolveOptions& opt = {}) {
  const int nb = mesh->boundary_count();
  BracketReference ref;
  ref.lambda_n = eigensolve(assemble_laplacian(mesh, bops, presets::neumann(nb)), k, opt).values;
  ref.lambda_d = eigensolve(assemble_laplacian(mesh, bops, presets::dirichlet(nb)), k, opt).values;
  const double h = mesh->spacing();
  ref.tolerance = (10.0 * h * h / 12.0) * ref.lambda_d.array().square();
  return ref;
}

/// λ_n^N − tol ≤ λ_n(U) ≤ λ_n^D + tol for n ≤ k.
inline BracketReport bracket_check(const MeshPtr& mesh, const BoundaryOps& bops, const BoundaryUnitary& u,
                                   const BracketReference& ref, const EigensolveOptions& opt = {}) {
  for (int j = 0; j < u.dim(); ++j) {
    const double th = u.phases()(j);
    if (std::abs(th) > kPhaseSnapTol && std::abs(std::abs(th) - pi) > kPhaseSnapTol)
      throw PreconditionError("bracket_check: eigenphase " + std::to_string(th) + " is neither 0 nor pi");
  }
  const int k = static_cast<int>(ref.lambda_n.size());
  BracketReport r;
  r.lambda_u = eigensolve(assemble_laplacian(mesh, bops, u), k, opt).values;
  r.lambda_n = ref.lambda_n;
  r.lambda_d = ref.lambda_d;
  r.tolerance = ref.tolerance;
  r.lower_margin = r.lambda_u - r.lambda_n;
  r.upper_margin = r.lambda_d - r.lambda_u;
  for (int i = 0; i < k; ++i)
    if (r.lower_margin(i) < -r.tolerance(i) || r.upper_margin(i) < -r.tolerance(i)) r.pass = false;
  return r;
}

inline BracketReport bracket_check(const MeshPtr& mesh, const BoundaryOps& bops, const BoundaryUnitary& u, int k,
                                   const EigensolveOptions& opt = {}) {
  for (int j = 0; j < u.dim(); ++j) {
    const double th = u.phases()(j);
    if (std::abs(th) > kPhaseSnapTol && std::abs(std::abs(th) - pi) > kPhaseSnapTol)
      throw PreconditionError("bracket_check: eigenphase " + std::to_string(th) + " is neither 0 nor pi");
  }
  return bracket_check(mesh, bops, u, bracket_reference(mesh, bops, k, opt), opt);
}

// ---- spectral flow -------------------------------------------------------------

struct CrossingEvent {
  int curve_a = 0, curve_b = 0;
  double s_lo = 0.0, s_hi = 0.0;
  double min_separation = 0.0;
  double energy = 0.0;  // mean of the two curves where they are closest
  bool order_exchanged = false;
};

struct FlowOptions {
  int guard = -1;  // extra tracked modes; default max(4, k/2)
  double min_overlap = 0.9;
  int max_refinements = 6;
  EigensolveOptions eig;
};

struct FlowResult {
  int k = 0;
  std::vector<double> s;
  RMat curves;  // samples × k, tracked
  std::vector<SpectralResult> samples;  // aligned vectors, ascending order
  std::vector<std::vector<int>> assignment;  // per sample: curve → sorted index
  std::vector<std::vector<int>> step_permutations;  // prev sorted index → next sorted index
  std::vector<double> step_min_overlap;
  std::vector<CrossingEvent> crossings;
  std::vector<double> gap_profile;
  double min_gap = 2.0;
  double min_ground = 0.0;
  double lipschitz = 0.0;

  /// Composition of the per-step permutations: initial sorted index → final
  /// sorted index.
  [[nodiscard]] std::vector<int> total_permutation() const {
    const int kt = samples.empty() ? 0 : samples.front().size();
    std::vector<int> p(kt);
    std::iota(p.begin(), p.end(), 0);
    for (const auto& st : step_permutations)
      for (auto& v : p) v = st[v];
    return p;
  }

  /// Lifted vector of curve c at sample j.
  [[nodiscard]] CVec curve_vector(int j, int c) const {
    return samples[j].op->lift * samples[j].vectors.col(assignment[j][c]);
  }
};

namespace detail {

inline RVec node_weights_of(const SpectralResult& r) { return r.op->mesh->weights; }

/// Rotates each degenerate cluster of `b` by the polar factor of its overlap
/// with the best-matching columns of `la` so that column i follows the i-th
/// selected reference column.
inline void align_clusters(const CMat& la, const RVec& w, SpectralResult& b) {
  for (const auto& cl : b.clusters) {
    if (cl.size() < 2) continue;
    const int d = static_cast<int>(cl.size());
    CMat xb(b.vectors.rows(), d);
    for (int i = 0; i < d; ++i) xb.col(i) = b.vectors.col(cl[i]);
    const CMat lb = b.op->lift * xb;
    const CMat o = la.adjoint() * w.cast<cplx>().asDiagonal() * lb;  // ka × d
    std::vector<int> rows(o.rows());
    std::iota(rows.begin(), rows.end(), 0);
    const RVec rn = o.rowwise().norm();
    std::stable_sort(rows.begin(), rows.end(), [&](int x, int y) { return rn(x) > rn(y); });
    rows.resize(std::min<size_t>(d, rows.size()));
    std::sort(rows.begin(), rows.end());
    if (static_cast<int>(rows.size()) < d) continue;
    CMat osel(d, d);
    for (int i = 0; i < d; ++i) osel.row(i) = o.row(rows[i]);
    const CMat q = linalg::polar_unitary(osel.adjoint());
    const CMat xr = xb * q;
    for (int i = 0; i < d; ++i) b.vectors.col(cl[i]) = xr.col(i);
  }
}

struct StepMatch {
  std::vector<int> perm;  // prev sorted → next sorted
  std::vector<double> overlap;  // per prev index
};

inline StepMatch greedy_match(const CMat& la, const RVec& w, SpectralResult& b) {
  const CMat lb = b.lifted();
  const CMat o = la.adjoint() * w.cast<cplx>().asDiagonal() * lb;
  const int ka = static_cast<int>(o.rows()), kb = static_cast<int>(o.cols());
  StepMatch m;
  m.perm.assign(ka, -1);
  m.overlap.assign(ka, 0.0);
  std::vector<bool> used_a(ka, false), used_b(kb, false);
  for (int round = 0; round < std::min(ka, kb); ++round) {
    double best = -1.0;
    int bi = -1, bj = -1;
    for (int i = 0; i < ka; ++i) {
      if (used_a[i]) continue;
      for (int j = 0; j < kb; ++j) {
        if (used_b[j]) continue;
        const double v = std::abs(o(i, j));
        if (v > best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    used_a[bi] = used_b[bj] = true;
    m.perm[bi] = bj;
    m.overlap[bi] = best;
    const cplx ov = o(bi, bj);
    if (std::abs(ov) > 1e-14) b.vectors.col(bj) *= std::conj(ov) / std::abs(ov);
  }
  return m;
}

}  // namespace detail

/// Spectral flow along `path` with `steps` uniform samples of s ∈ [0, 1],
/// refined by halving wherever a reported curve's best overlap drops below
/// `min_overlap`.
inline FlowResult spectral_flow(const BCPath& path, const MeshPtr& mesh, const BoundaryOps& bops, int k, int steps,
                                const FlowOptions& opt = {}) {
  if (steps < 2) throw PreconditionError("spectral_flow: steps must be at least 2");
  if (k <= 0) throw PreconditionError("spectral_flow: k must be positive");
  const int guard = opt.guard >= 0 ? opt.guard : std::max(4, k / 2);
  auto solve_at = [&](double s) {
    try {
      const auto op = assemble_laplacian(mesh, bops, path.at(s));
      return eigensolve(op, std::min(k + guard, op->dim()), opt.eig);
    } catch (const Error& e) {
      throw SolverError("spectral_flow at s=" + std::to_string(s) + ": " + e.what());
    }
  };
  const RVec& w = mesh->weights;

  FlowResult fr;
  fr.k = k;
  std::vector<double> targets;
  for (int j = 1; j < steps; ++j) targets.push_back(j == steps - 1 ? 1.0 : static_cast<double>(j) / (steps - 1));
  const double min_ds = 1.0 / (steps - 1) / std::pow(2.0, opt.max_refinements);

  SpectralResult cur = solve_at(0.0);
  if (cur.size() < k) throw PreconditionError("spectral_flow: k exceeds the reduced dimension");
  {
    // Align degenerate clusters at s=0 with the next sample.
    SpectralResult nxt = solve_at(targets.front());
    const CMat ln = nxt.lifted();
    for (const auto& cl : cur.clusters) {
      if (cl.size() < 2) continue;
      const int d = static_cast<int>(cl.size());
      CMat xa(cur.vectors.rows(), d);
      for (int i = 0; i < d; ++i) xa.col(i) = cur.vectors.col(cl[i]);
      const CMat o = (cur.op->lift * xa).adjoint() * w.cast<cplx>().asDiagonal() * ln;  // d × kn
      std::vector<int> cols(o.cols());
      std::iota(cols.begin(), cols.end(), 0);
      const RVec cn = o.colwise().norm();
      std::stable_sort(cols.begin(), cols.end(), [&](int x, int y) { return cn(x) > cn(y); });
      cols.resize(d);
      std::sort(cols.begin(), cols.end());
      CMat osel(d, d);
      for (int i = 0; i < d; ++i) osel.col(i) = o.col(cols[i]);
      const CMat xr = xa * linalg::polar_unitary(osel);
      for (int i = 0; i < d; ++i) cur.vectors.col(cl[i]) = xr.col(i);
    }
  }
  const int kt = cur.size();
  std::vector<int> assign(k);
  std::iota(assign.begin(), assign.end(), 0);
  fr.s.push_back(0.0);
  fr.samples.push_back(cur);
  fr.assignment.push_back(assign);

  double s_cur = 0.0;
  while (!targets.empty()) {
    const double st = targets.front();
    SpectralResult nxt = solve_at(st);
    if (nxt.size() != kt) throw SolverError("spectral_flow: mode count changed along the path");
    const CMat la = cur.lifted();
    detail::align_clusters(la, w, nxt);
    auto match = detail::greedy_match(la, w, nxt);
    double worst = 1.0;
    for (int c = 0; c < k; ++c) worst = std::min(worst, match.overlap[assign[c]]);
    if (worst < opt.min_overlap && st - s_cur > 2.0 * min_ds * (1.0 - 1e-9)) {
      targets.insert(targets.begin(), 0.5 * (s_cur + st));
      continue;
    }
    targets.erase(targets.begin());
    for (auto& a : assign) a = match.perm[a];
    fr.s.push_back(st);
    fr.samples.push_back(nxt);
    fr.assignment.push_back(assign);
    fr.step_permutations.push_back(match.perm);
    fr.step_min_overlap.push_back(worst);
    cur = std::move(nxt);
    s_cur = st;
  }

  const int ns = static_cast<int>(fr.s.size());
  fr.curves.resize(ns, k);
  for (int j = 0; j < ns; ++j)
    for (int c = 0; c < k; ++c) fr.curves(j, c) = fr.samples[j].values(fr.assignment[j][c]);
  fr.min_ground = std::numeric_limits<double>::infinity();
  for (int j = 0; j < ns; ++j) {
    fr.min_ground = std::min(fr.min_ground, fr.samples[j].values(0));
    const double g = spectral_gap(path.at(fr.s[j])).gap;
    fr.gap_profile.push_back(g);
    fr.min_gap = std::min(fr.min_gap, g);
  }
  for (int j = 0; j + 1 < ns; ++j)
    for (int c = 0; c < k; ++c)
      fr.lipschitz = std::max(fr.lipschitz, std::abs(fr.curves(j + 1, c) - fr.curves(j, c)) / (fr.s[j + 1] - fr.s[j]));

  // crossings among reported curves
  const double ctol = opt.eig.cluster_tol;
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      int last_sign = 0, last_idx = -1;
      bool in_zero = false;
      auto emit = [&](int lo, int hi, bool exchanged) {
        CrossingEvent ev;
        ev.curve_a = a;
        ev.curve_b = b;
        ev.s_lo = fr.s[lo];
        ev.s_hi = fr.s[hi];
        ev.order_exchanged = exchanged;
        ev.min_separation = std::numeric_limits<double>::infinity();
        for (int j = lo; j <= hi; ++j) {
          const double sep = std::abs(fr.curves(j, a) - fr.curves(j, b));
          if (sep < ev.min_separation) {
            ev.min_separation = sep;
            ev.energy = 0.5 * (fr.curves(j, a) + fr.curves(j, b));
          }
        }
        fr.crossings.push_back(ev);
      };
      for (int j = 0; j < ns; ++j) {
        const double sep = fr.curves(j, a) - fr.curves(j, b);
        const double tol = ctol * std::max(1.0, std::abs(fr.curves(j, a)));
        const int sg = std::abs(sep) <= tol ? 0 : (sep > 0 ? 1 : -1);
        if (sg == 0) {
          in_zero = true;
          continue;
        }
        if (in_zero) {
          // a degeneracy present from s=0 is a splitting, not a crossing
          if (last_idx >= 0) emit(last_idx, j, last_sign != sg);
          in_zero = false;
        } else if (last_sign != 0 && sg != last_sign) {
          emit(last_idx, j, true);
        }
        last_sign = sg;
        last_idx = j;
      }
      // a degeneracy still open at s=1 is not a crossing either
    }
  }
  return fr;
}

// ---- intertwiner ---------------------------------------------------------------

/// V = Σ_n Φ_0^n (Φ_u^n)† M in node space, restricted to the computed modes.
struct Intertwiner {
  CMat source;     // N × k, lifted Φ_u^n
  CMat reference;  // N × k, lifted Φ_0^{a(n)} times phase
  RVec weights;
  std::vector<int> assignment;   // source index → reference index
  std::vector<cplx> phases;      // per source mode

  [[nodiscard]] CVec apply(const CVec& nodes) const {
    return reference * (source.adjoint() * weights.cast<cplx>().asDiagonal() * nodes);
  }
  [[nodiscard]] CVec apply_adjoint(const CVec& nodes) const {
    return source * (reference.adjoint() * weights.cast<cplx>().asDiagonal() * nodes);
  }
  /// ‖V†V − I‖ on the span of the source modes.
  [[nodiscard]] double isometry_defect() const {
    const CMat vs = reference;  // V applied to each source mode
    const CMat g = vs.adjoint() * weights.cast<cplx>().asDiagonal() * vs;
    return linalg::max_abs(g - CMat::Identity(g.rows(), g.cols()));
  }
};

inline Intertwiner build_intertwiner(const SpectralResult& spec_u, const SpectralResult& spec_ref) {
  if (spec_u.size() != spec_ref.size())
    throw DimensionError("build_intertwiner: mode counts differ (" + std::to_string(spec_u.size()) + " vs " +
                         std::to_string(spec_ref.size()) + ")");
  if (spec_u.op->mesh->node_count() != spec_ref.op->mesh->node_count())
    throw DimensionError("build_intertwiner: node spaces differ");
  const int k = spec_u.size();
  Intertwiner v;
  v.weights = spec_u.op->mesh->weights;
  v.source = spec_u.lifted();
  const CMat ref = spec_ref.lifted();
  const auto wd = v.weights.cast<cplx>().asDiagonal();
  for (const CMat* m : std::initializer_list<const CMat*>{&v.source, &ref}) {
    const CMat g = m->adjoint() * wd * *m;
    if (linalg::max_abs(g - CMat::Identity(k, k)) > 1e-8)
      throw PreconditionError("build_intertwiner: modes are not M-orthonormal");
  }
  const CMat o = v.source.adjoint() * wd * ref;  // ⟨src_i, M ref_j⟩

  // blocks: union of the degenerate clusters of both spectra
  std::vector<int> block(k);
  std::iota(block.begin(), block.end(), 0);
  std::function<int(int)> find = [&](int x) { return block[x] == x ? x : block[x] = find(block[x]); };
  for (const SpectralResult* r : std::initializer_list<const SpectralResult*>{&spec_u, &spec_ref})
    for (const auto& cl : r->clusters)
      for (size_t i = 1; i < cl.size(); ++i) block[find(cl[i])] = find(cl[0]);

  v.assignment.assign(k, -1);
  std::vector<bool> used(k, false);
  for (int root = 0; root < k; ++root) {
    std::vector<int> members;
    for (int i = 0; i < k; ++i)
      if (find(i) == root) members.push_back(i);
    std::vector<bool> done(k, false);
    for (size_t round = 0; round < members.size(); ++round) {
      double best = -1.0;
      int bi = -1, bj = -1;
      for (int i : members) {
        if (done[i]) continue;
        for (int j : members) {
          if (used[j]) continue;
          if (std::abs(o(i, j)) > best) {
            best = std::abs(o(i, j));
            bi = i;
            bj = j;
          }
        }
      }
      done[bi] = used[bj] = true;
      v.assignment[bi] = bj;
    }
  }
  v.reference.resize(ref.rows(), k);
  v.phases.resize(k);
  for (int i = 0; i < k; ++i) {
    const cplx ov = o(i, v.assignment[i]);
    const cplx ph = std::abs(ov) > 1e-12 ? std::conj(ov) / std::abs(ov) : cplx(1.0);
    v.phases[i] = ph;
    v.reference.col(i) = ref.col(v.assignment[i]) * ph;
  }
  return v;
}

// ---- hypothesis report ---------------------------------------------------------

struct HypothesisReport {
  std::vector<double> s;
  std::vector<int> max_degeneracy;      // H1 proxy
  std::vector<double> growth_ratio;     // H2 proxy
  std::vector<double> d1_v, d2_v;       // H3 proxy, max |entries|
  std::vector<double> d1_vhv, d2_vhv;   // H4 proxy
  std::vector<double> lambda_min;
  double h5_min = 0.0;                  // min_s λ_min
  double max_d1_v = 0.0, max_d2_v = 0.0, max_d1_vhv = 0.0, max_d2_vhv = 0.0;
  std::vector<double> flagged_s;        // second-derivative spikes
  std::vector<double> gap_profile;
  FlowResult flow;
};

inline HypothesisReport path_hypothesis_report(const BCPath& path, const MeshPtr& mesh, const BoundaryOps& bops, int k,
                                               int steps, const FlowOptions& opt = {}) {
  HypothesisReport rep;
  rep.flow = spectral_flow(path, mesh, bops, k, steps, opt);
  const FlowResult& fr = rep.flow;
  const int ns = static_cast<int>(fr.s.size());
  const int N = mesh->node_count();
  const RVec& w = mesh->weights;
  const auto wd = w.cast<cplx>().asDiagonal();
  rep.s = fr.s;
  rep.gap_profile = fr.gap_profile;

  // probes: leading reference modes and two Gaussian bumps
  CMat ref(N, k);
  for (int c = 0; c < k; ++c) ref.col(c) = fr.curve_vector(0, c);
  const int nmodes = std::min(3, k);
  CMat probes(N, nmodes + 2);
  probes.leftCols(nmodes) = ref.leftCols(nmodes);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& x : mesh->coords) {
    lo = std::min(lo, x[0]);
    hi = std::max(hi, x[0]);
  }
  for (int b = 0; b < 2; ++b) {
    const double c = lo + (hi - lo) * (b + 1) / 3.0, width = 0.1 * (hi - lo);
    CVec g(N);
    for (int j = 0; j < N; ++j) {
      const double dx = mesh->coords[j][0] - c;
      g(j) = std::exp(-0.5 * dx * dx / (width * width));
    }
    probes.col(nmodes + b) = g / linalg::weighted_norm(g, w);
  }
  const CMat ref_probe = ref.adjoint() * wd * probes;  // k × q

  std::vector<CMat> a(ns), bm(ns);
  RVec lambda0(k);
  for (int c = 0; c < k; ++c) lambda0(c) = fr.samples[0].values(c);
  for (int j = 0; j < ns; ++j) {
    const SpectralResult& sr = fr.samples[j];
    int deg = 1;
    for (const auto& cl : sr.clusters)
      if (cl.front() < k) deg = std::max(deg, static_cast<int>(std::count_if(cl.begin(), cl.end(), [&](int i) { return i < k; })));
    rep.max_degeneracy.push_back(deg);
    double gr = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) gr = std::max(gr, sr.values(c) / std::max(lambda0(c), 1.0));
    rep.growth_ratio.push_back(gr);
    rep.lambda_min.push_back(sr.values(0));

    CMat src(N, k);
    RVec lam(k);
    for (int c = 0; c < k; ++c) {
      src.col(c) = fr.curve_vector(j, c);
      lam(c) = fr.curves(j, c);
    }
    const CMat probe_src = probes.adjoint() * wd * src;  // q × k
    a[j] = probe_src * ref_probe;
    bm[j] = ref_probe.adjoint() * lam.cast<cplx>().asDiagonal() * ref_probe;
  }
  rep.h5_min = *std::min_element(rep.lambda_min.begin(), rep.lambda_min.end());

  auto derivs = [&](const std::vector<CMat>& m, std::vector<double>& d1, std::vector<double>& d2) {
    d1.assign(ns, 0.0);
    d2.assign(ns, 0.0);
    for (int j = 1; j + 1 < ns; ++j) {
      const double hl = fr.s[j] - fr.s[j - 1], hr = fr.s[j + 1] - fr.s[j];
      d1[j] = linalg::max_abs((m[j + 1] - m[j - 1]) / (hl + hr));
      d2[j] = linalg::max_abs(2.0 * ((m[j + 1] - m[j]) / hr - (m[j] - m[j - 1]) / hl) / (hl + hr));
    }
  };
  derivs(a, rep.d1_v, rep.d2_v);
  derivs(bm, rep.d1_vhv, rep.d2_vhv);
  auto mx = [](const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); };
  rep.max_d1_v = mx(rep.d1_v);
  rep.max_d2_v = mx(rep.d2_v);
  rep.max_d1_vhv = mx(rep.d1_vhv);
  rep.max_d2_vhv = mx(rep.d2_vhv);

  if (ns > 2) {
    std::vector<double> inner(rep.d2_v.begin() + 1, rep.d2_v.end() - 1);
    std::nth_element(inner.begin(), inner.begin() + inner.size() / 2, inner.end());
    const double median = inner[inner.size() / 2];
    for (int j = 1; j + 1 < ns; ++j)
      if (rep.d2_v[j] > 10.0 * median + 1e-9) rep.flagged_s.push_back(fr.s[j]);
  }
  return rep;
}

}  // namespace qbound
