#pragma once

// Time-dependent Schrödinger propagation with the time dependence carried by
// the boundary condition: Crank–Nicolson stepping, the Faraday equation on the
// fixed periodic domain, gauge maps and frozen-domain stepping along a path.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/SparseLU>

#include "qbound/boundary.hpp"
#include "qbound/geometry.hpp"
#include "qbound/operators.hpp"
#include "qbound/spectra.hpp"
#include "qbound/types.hpp"

namespace qbound {

/// Operator source t ↦ H(t). Returning the same pointer twice signals an
/// unchanged operator, so the step matrix is not refactorized.
using OperatorSource = std::function<OperatorPtr(double)>;

struct Trajectory {
  std::vector<double> t;
  std::vector<CVec> states;  // reduced coordinates of ops[k]
  std::vector<OperatorPtr> ops;
  std::vector<double> norms;
  std::vector<double> energies;
  std::vector<double> projection_loss;  // cumulative, frozen-domain only
  double dt = 0.0;
  std::string scheme;
  std::string path;
  double max_norm_drift = 0.0;
  // Optional map to physical node values (set by run_faraday).
  std::function<CVec(const Trajectory&, int)> physical;

  [[nodiscard]] int size() const { return static_cast<int>(t.size()); }
  [[nodiscard]] Wavefunction state(int k) const { return {states[k], ops[k]}; }
  [[nodiscard]] CVec nodes(int k) const { return ops[k]->lift * states[k]; }
  [[nodiscard]] CVec physical_nodes(int k) const { return physical ? physical(*this, k) : nodes(k); }
  [[nodiscard]] const CVec& final_state() const { return states.back(); }
};

struct PropagateOptions {
  int record_stride = 1;
  bool record_energy = true;
};

namespace detail {

struct CNStepper {
  const HermitianOperator* current = nullptr;
  Eigen::SparseLU<SpMat> lu;
  SpMat rhs;

  void prepare(const HermitianOperator& op, double dt) {
    if (current == &op) return;
    const int n = op.dim();
    SpMat m(n, n);
    std::vector<Triplet> t;
    for (int i = 0; i < n; ++i) t.emplace_back(i, i, op.mass(i));
    m.setFromTriplets(t.begin(), t.end());
    const cplx half(0.0, 0.5 * dt);
    SpMat a = m + half * op.stiffness;
    rhs = m - half * op.stiffness;
    a.makeCompressed();
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success) throw SolverError("Crank-Nicolson step matrix factorization failed");
    current = &op;
  }

  [[nodiscard]] CVec step(const CVec& psi) {
    CVec out = lu.solve(rhs * psi);
    if (lu.info() != Eigen::Success) throw SolverError("Crank-Nicolson solve failed");
    return out;
  }
};

inline int step_count(double t0, double t1, double dt) {
  if (!(dt > 0.0)) throw PreconditionError("propagate: dt must be positive");
  if (!(t1 >= t0)) throw PreconditionError("propagate: t1 must not precede t0");
  const double r = (t1 - t0) / dt;
  const double rounded = std::round(r);
  return static_cast<int>(std::abs(r - rounded) < 1e-9 * std::max(1.0, r) ? rounded : std::ceil(r));
}

}  // namespace detail

/// Crank–Nicolson with the generator evaluated at step midpoints.
inline Trajectory propagate(const OperatorSource& h_of_t, const Wavefunction& psi0, double t0, double t1, double dt,
                            const PropagateOptions& opt = {}) {
  const int steps = detail::step_count(t0, t1, dt);
  const double h = steps > 0 ? (t1 - t0) / steps : dt;
  Trajectory tr;
  tr.dt = h;
  tr.scheme = "crank_nicolson_midpoint";
  OperatorPtr op0 = h_of_t(t0);
  if (psi0.amplitudes.size() != op0->dim())
    throw DimensionError("propagate: initial state has " + std::to_string(psi0.amplitudes.size()) +
                         " components, operator has " + std::to_string(op0->dim()));
  CVec psi = psi0.amplitudes;
  const double n0 = op0->norm(psi);
  auto record = [&](double t, const OperatorPtr& op) {
    tr.t.push_back(t);
    tr.states.push_back(psi);
    tr.ops.push_back(op);
    const double nn = op->norm(psi);
    tr.norms.push_back(nn);
    tr.max_norm_drift = std::max(tr.max_norm_drift, std::abs(nn - n0));
    tr.energies.push_back(opt.record_energy ? h_of_t(t)->energy(psi) : std::nan(""));
  };
  record(t0, op0);
  detail::CNStepper cn;
  OperatorPtr keep;
  for (int k = 0; k < steps; ++k) {
    OperatorPtr op = h_of_t(t0 + (k + 0.5) * h);
    if (op->dim() != psi.size()) throw DimensionError("propagate: operator dimension changed during propagation");
    if (op.get() != cn.current) keep = op;
    cn.prepare(*keep, h);
    psi = cn.step(psi);
    const double t = k + 1 == steps ? t1 : t0 + (k + 1) * h;
    if ((k + 1) % opt.record_stride == 0 || k + 1 == steps) record(t, op);
  }
  return tr;
}

// ---- ε schedules -----------------------------------------------------------------

struct EpsilonSchedule {
  std::function<double(double)> eps, deps, d2eps;
  double t0 = 0.0, t1 = 1.0;
  std::string name;

  struct Samples {
    std::vector<double> t, eps, deps, d2eps;
    double max_deps = 0.0, max_d2eps = 0.0;
  };

  [[nodiscard]] Samples sample(int n = 1001) const {
    Samples s;
    for (int j = 0; j < n; ++j) {
      const double t = t0 + (t1 - t0) * j / (n - 1);
      s.t.push_back(t);
      s.eps.push_back(eps(t));
      s.deps.push_back(deps(t));
      s.d2eps.push_back(d2eps(t));
      s.max_deps = std::max(s.max_deps, std::abs(s.deps.back()));
      s.max_d2eps = std::max(s.max_d2eps, std::abs(s.d2eps.back()));
    }
    return s;
  }

  /// Central differences of ε and ε̇ agree with the supplied derivatives
  /// within 1e-6.
  void validate() const {
    if (!(t1 > t0)) throw ValidationError("schedule: empty time interval");
    const double h = 1e-4 * (t1 - t0);
    for (int j = 1; j < 200; ++j) {
      const double t = t0 + (t1 - t0) * j / 200.0;
      const double fd1 = (eps(t + h) - eps(t - h)) / (2 * h);
      const double fd2 = (deps(t + h) - deps(t - h)) / (2 * h);
      if (std::abs(fd1 - deps(t)) > 1e-6 * std::max(1.0, std::abs(deps(t))))
        throw ValidationError("schedule '" + name + "': eps_dot inconsistent with eps at t=" + std::to_string(t));
      if (std::abs(fd2 - d2eps(t)) > 1e-6 * std::max(1.0, std::abs(d2eps(t))))
        throw ValidationError("schedule '" + name + "': eps_ddot inconsistent with eps_dot at t=" + std::to_string(t));
    }
  }
};

namespace schedules {

inline EpsilonSchedule constant(double e, double T) {
  return {[e](double) { return e; }, [](double) { return 0.0; }, [](double) { return 0.0; }, 0.0, T, "constant"};
}

inline EpsilonSchedule linear(double from, double to, double T) {
  const double r = (to - from) / T;
  return {[=](double t) { return from + r * t; }, [=](double) { return r; }, [](double) { return 0.0; }, 0.0, T,
          "linear"};
}

/// from + (to − from)(3x² − 2x³), x = t/T; ε̇ vanishes at both ends.
inline EpsilonSchedule smoothstep(double from, double to, double T) {
  const double d = to - from;
  auto clampx = [T](double t) { return std::clamp(t / T, 0.0, 1.0); };
  return {[=](double t) {
            const double x = clampx(t);
            return from + d * x * x * (3 - 2 * x);
          },
          [=](double t) {
            const double x = clampx(t);
            return d * 6 * x * (1 - x) / T;
          },
          [=](double t) {
            const double x = clampx(t);
            return d * (6 - 12 * x) / (T * T);
          },
          0.0, T, "smoothstep"};
}

}  // namespace schedules

// ---- gauge map and Faraday dynamics ----------------------------------------------

enum class GaugeDirection { to_reference, from_reference };

/// Multiplication by e^{∓iεθ_j}. to_reference maps the quasi-periodic domain of
/// flux ε onto the periodic one; the result lives on `target` (assembled from
/// the mesh when not given).
inline Wavefunction gauge_map(double epsilon, const Wavefunction& psi, GaugeDirection dir, OperatorPtr target = {}) {
  const MeshPtr& mesh = psi.op->mesh;
  if (!mesh->is_single_interval(0.0, 2.0 * pi)) throw DomainError("gauge_map: mesh must be the interval [0, 2pi]");
  const double sign = dir == GaugeDirection::to_reference ? -1.0 : 1.0;
  CVec nodes = psi.nodes();
  for (int j = 0; j < nodes.size(); ++j) nodes(j) *= std::polar(1.0, sign * epsilon * mesh->coords[j][0]);
  if (!target) {
    const auto bops = boundary_operators(*mesh);
    const double alpha = dir == GaugeDirection::to_reference ? 0.0 : -2.0 * pi * epsilon;
    target = assemble_laplacian(mesh, bops, presets::quasi_periodic(alpha));
  }
  return {target->project(nodes), target};
}

/// Propagates iψ̇ = [(i d/dθ − ε)² + θ ε̇]ψ on the periodic domain. The
/// trajectory's physical map applies V†_{ε(t)}.
inline Trajectory run_faraday(const EpsilonSchedule& schedule, const Wavefunction& psi0, double dt,
                              const PropagateOptions& opt = {}) {
  schedule.validate();
  const MeshPtr mesh = psi0.op->mesh;
  struct Cache {
    double eps = std::nan(""), deps = std::nan("");
    OperatorPtr op;
  };
  auto cache = std::make_shared<Cache>();
  OperatorSource h = [mesh, schedule, cache](double t) {
    const double e = schedule.eps(t), de = schedule.deps(t);
    if (cache->op && e == cache->eps && de == cache->deps) return cache->op;
    cache->eps = e;
    cache->deps = de;
    cache->op = assemble_faraday(mesh, e, de);
    return cache->op;
  };
  Trajectory tr = propagate(h, psi0, schedule.t0, schedule.t1, dt, opt);
  tr.scheme = "faraday_crank_nicolson";
  tr.path = "quasi_periodic epsilon(t) " + schedule.name;
  tr.physical = [mesh, schedule](const Trajectory& self, int k) {
    CVec nodes = self.nodes(k);
    const double e = schedule.eps(self.t[k]);
    for (int j = 0; j < nodes.size(); ++j) nodes(j) *= std::polar(1.0, e * mesh->coords[j][0]);
    return nodes;
  };
  return tr;
}

/// Physical-domain state V†_{ε(t_k)} ψ(t_k) of a Faraday trajectory.
inline Wavefunction to_physical(const Trajectory& tr, const EpsilonSchedule& schedule, int k) {
  return gauge_map(schedule.eps(tr.t[k]), tr.state(k), GaugeDirection::from_reference);
}

// ---- adiabatic fidelity ------------------------------------------------------------

enum class FidelityTarget { ground, tracked_curve };

/// f(t_k) = ‖P ψ(t_k)‖/‖ψ(t_k)‖ with P the projector onto the instantaneous
/// ground cluster (or onto tracked curve `curve`) of the flow sample at
/// s(t_k). The flow must contain a sample at every s(t_k).
inline std::vector<double> adiabatic_fidelity(const Trajectory& tr, const FlowResult& flow,
                                              const std::function<double(double)>& s_of_t,
                                              FidelityTarget target = FidelityTarget::ground, int curve = 0) {
  std::vector<double> f;
  for (int k = 0; k < tr.size(); ++k) {
    const double s = s_of_t(tr.t[k]);
    auto it = std::min_element(flow.s.begin(), flow.s.end(),
                               [s](double a, double b) { return std::abs(a - s) < std::abs(b - s); });
    if (it == flow.s.end() || std::abs(*it - s) > 1e-9)
      throw ValidationError("adiabatic_fidelity: no flow sample at s=" + std::to_string(s));
    const int j = static_cast<int>(it - flow.s.begin());
    const SpectralResult& sr = flow.samples[j];
    const CVec psi = tr.physical_nodes(k);
    const RVec& w = sr.op->mesh->weights;
    std::vector<int> idx;
    if (target == FidelityTarget::ground)
      idx = sr.clusters.front();
    else
      idx = {flow.assignment[j][curve]};
    double p2 = 0.0;
    for (int i : idx) p2 += std::norm(linalg::weighted_dot(sr.op->lift * sr.vectors.col(i), w, psi));
    f.push_back(std::min(1.0, std::sqrt(p2) / linalg::weighted_norm(psi, w)));
  }
  return f;
}

// ---- frozen-domain stepping --------------------------------------------------------

struct FrozenOptions {
  std::function<double(double)> s_of_t;  // default: linear in t over [t0, t1]
  double loss_tol = 1e-3;
  int record_stride = 1;
  bool record_energy = true;
};

/// Per step: reassemble H for U(s(t_mid)), M-orthogonally project the state
/// onto the new reduced space (loss recorded, no renormalization), CN step.
inline Trajectory frozen_domain_propagate(const BCPath& path, const MeshPtr& mesh, const BoundaryOps& bops,
                                          const Wavefunction& psi0, double t0, double t1, double dt,
                                          FrozenOptions opt = {}) {
  const int steps = detail::step_count(t0, t1, dt);
  const double h = steps > 0 ? (t1 - t0) / steps : dt;
  if (!opt.s_of_t) opt.s_of_t = [t0, t1](double t) { return t1 > t0 ? (t - t0) / (t1 - t0) : 0.0; };

  CMat last_u;
  OperatorPtr last_op;
  auto op_at = [&](double t) {
    const BoundaryUnitary u = path.at(std::clamp(opt.s_of_t(t), 0.0, 1.0));
    if (last_op && u.matrix() == last_u) return last_op;
    last_u = u.matrix();
    last_op = assemble_laplacian(mesh, bops, u, "frozen");
    return last_op;
  };

  OperatorPtr op0 = op_at(t0);
  CVec nodes = psi0.nodes();
  const double n0 = linalg::weighted_norm(nodes, mesh->weights);
  const double cres = op0->constraints.rows() ? (op0->constraints * nodes).norm() : 0.0;
  if (cres >= 1e-8 * std::max(1.0, n0))
    throw PreconditionError("frozen_domain_propagate: initial state violates the boundary constraints (residual " +
                            std::to_string(cres) + ")");

  Trajectory tr;
  tr.dt = h;
  tr.scheme = "frozen_domain_crank_nicolson";
  tr.path = std::string("bc path ") + std::string(to_string(path.rule));
  CVec psi = op0->project(nodes);
  double cumulative = 0.0;
  auto record = [&](double t, const OperatorPtr& op) {
    tr.t.push_back(t);
    tr.states.push_back(psi);
    tr.ops.push_back(op);
    const double nn = op->norm(psi);
    tr.norms.push_back(nn);
    tr.max_norm_drift = std::max(tr.max_norm_drift, std::abs(nn - n0));
    tr.energies.push_back(opt.record_energy ? op->energy(psi) : std::nan(""));
    tr.projection_loss.push_back(cumulative);
  };
  record(t0, op0);
  detail::CNStepper cn;
  OperatorPtr cur = op0;
  for (int k = 0; k < steps; ++k) {
    const double tm = t0 + (k + 0.5) * h;
    OperatorPtr op = op_at(tm);
    if (op != cur) {
      const CVec full = cur->lift * psi;
      psi = op->project(full);
      const double before = linalg::weighted_norm(full, mesh->weights);
      const double after = op->norm(psi);
      const double loss = before > 0.0 ? std::max(0.0, 1.0 - (after * after) / (before * before)) : 0.0;
      if (loss > opt.loss_tol)
        throw SolverError("frozen_domain_propagate: projection loss " + std::to_string(loss) + " at t=" +
                          std::to_string(tm) + " exceeds " + std::to_string(opt.loss_tol));
      cumulative += loss;
      cur = op;
    }
    cn.prepare(*cur, h);
    psi = cn.step(psi);
    const double t = k + 1 == steps ? t1 : t0 + (k + 1) * h;
    if ((k + 1) % opt.record_stride == 0 || k + 1 == steps) record(t, cur);
  }
  return tr;
}

}  // namespace qbound
