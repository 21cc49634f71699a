#pragma once

// Named end-to-end scenarios driven by a ScenarioConfig. Each run writes its
// tables and plot data into an output directory and returns a RunReport whose
// flags reflect the invariants checked along the way.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qbound/boundary.hpp"
#include "qbound/config.hpp"
#include "qbound/dynamics.hpp"
#include "qbound/geometry.hpp"
#include "qbound/io.hpp"
#include "qbound/operators.hpp"
#include "qbound/spectra.hpp"

namespace qbound {

inline constexpr const char* kReportSchemaVersion = "1";

struct RunReport {
  std::string scenario;
  json input;
  json headline = json::object();
  json flags = json::object();
  std::vector<std::string> files;
  std::vector<std::pair<std::string, double>> timings;  // seconds; kept out of report.json

  [[nodiscard]] bool ok() const {
    for (auto it = flags.begin(); it != flags.end(); ++it)
      if (!it.value().get<bool>()) return false;
    return true;
  }

  [[nodiscard]] json to_json() const {
    json j;
    j["schema_version"] = kReportSchemaVersion;
    j["scenario"] = scenario;
    j["input"] = input;
    j["headline"] = headline;
    j["flags"] = flags;
    j["files"] = files;
    j["ok"] = ok();
    return j;
  }
};

// ---- boundary conditions from configuration --------------------------------------

inline BoundaryUnitary resolve_unitary(const BCSpec& bc, const Mesh& mesh, const BoundaryOps& bops) {
  const int nb = mesh.boundary_count();
  if (bc.preset == "torus") return torus_unitary(mesh, bops);
  if (bc.preset == "cylinder") return cylinder_unitary(mesh, bops);
  if (bc.preset == "block_pasting") return block_pasting_unitary(mesh, bops, bc.pairs, bc.others == "dirichlet" ? -1.0 : 1.0);
  PresetParams p;
  p.dim = nb;
  if (bc.alpha) p.alpha = *bc.alpha;
  if (bc.epsilon) p.alpha = -2.0 * pi * *bc.epsilon;
  p.matrix = bc.matrix;
  BoundaryUnitary u = unitary_from_preset(bc.preset, p);
  if (u.dim() != nb)
    throw ConfigError("bc.preset: " + bc.preset + " acts on " + std::to_string(u.dim()) +
                      " boundary values, the domain has " + std::to_string(nb));
  return u;
}

/// Path between two configured conditions. Two quasi-periodic ends given by
/// flux use the flux family, so ε: 0→1 is a closed loop rather than a
/// constant path.
inline BCPath resolve_path(const ScenarioConfig& c, const Mesh& mesh, const BoundaryOps& bops) {
  const BCSpec& a = c.bc;
  const BCSpec& b = *c.bc_end;
  if (a.preset == "quasi_periodic" && b.preset == "quasi_periodic" && !a.alpha && !b.alpha)
    return quasi_periodic_flux_path(a.epsilon.value_or(0.0), b.epsilon.value_or(0.0), c.steps);
  return make_bc_path(resolve_unitary(a, mesh, bops), resolve_unitary(b, mesh, bops), c.path_rule, c.steps);
}

// ---- closed forms used for run flags ---------------------------------------------

namespace detail {

inline std::vector<double> first_sorted(std::vector<double> v, int k) {
  std::sort(v.begin(), v.end());
  if (static_cast<int>(v.size()) > k) v.resize(k);
  return v;
}

inline std::vector<double> circle_levels(double length, int k) {
  std::vector<double> v;
  for (int n = -k; n <= k; ++n) v.push_back(std::pow(2.0 * pi * n / length, 2));
  return first_sorted(v, k);
}

}  // namespace detail

/// Closed-form spectrum for the configurations that have one.
inline std::optional<std::vector<double>> closed_form_spectrum(const DomainSpec& d, const BCSpec& bc, int k) {
  using detail::first_sorted;
  std::vector<double> v;
  if (const auto* iu = std::get_if<IntervalUnion>(&d)) {
    if (iu->intervals.size() == 1) {
      const double l = iu->intervals[0][1] - iu->intervals[0][0];
      if (bc.preset == "dirichlet") {
        for (int j = 1; j <= k; ++j) v.push_back(std::pow(j * pi / l, 2));
      } else if (bc.preset == "neumann") {
        for (int j = 0; j < k; ++j) v.push_back(std::pow(j * pi / l, 2));
      } else if (bc.preset == "periodic" || bc.preset == "quasi_periodic") {
        const double alpha = bc.alpha ? *bc.alpha : -2.0 * pi * bc.epsilon.value_or(0.0);
        for (int n = -k - 2; n <= k + 2; ++n) v.push_back(std::pow((2.0 * pi * n - alpha) / l, 2));
      } else {
        return std::nullopt;
      }
      return first_sorted(v, k);
    }
    if (iu->intervals.size() == 2) {
      const double l1 = iu->intervals[0][1] - iu->intervals[0][0];
      const double l2 = iu->intervals[1][1] - iu->intervals[1][0];
      if (bc.preset == "two_interval_U1") {
        v = detail::circle_levels(l1, k);
        const auto w = detail::circle_levels(l2, k);
        v.insert(v.end(), w.begin(), w.end());
        return first_sorted(v, k);
      }
      if (bc.preset == "two_interval_U2") return detail::circle_levels(l1 + l2, k);
      const bool dir = bc.preset == "dirichlet", neu = bc.preset == "neumann";
      if (dir || neu) {
        for (double l : {l1, l2})
          for (int j = dir ? 1 : 0; j <= k; ++j) v.push_back(std::pow(j * pi / l, 2));
        return first_sorted(v, k);
      }
    }
    return std::nullopt;
  }
  const auto& r = std::get<Rectangle>(d);
  const int m = k + 2;
  for (int i = -m; i <= m; ++i) {
    for (int j = -m; j <= m; ++j) {
      if (bc.preset == "torus")
        v.push_back(4 * pi * pi * (i * i / (r.L * r.L) + j * j / (r.H * r.H)));
      else if (bc.preset == "cylinder" && j >= 0)
        v.push_back(4 * pi * pi * i * i / (r.L * r.L) + pi * pi * j * j / (r.H * r.H));
      else if (bc.preset == "dirichlet" && i > 0 && j > 0)
        v.push_back(pi * pi * (i * i / (r.L * r.L) + j * j / (r.H * r.H)));
      else if (bc.preset == "neumann" && i >= 0 && j >= 0)
        v.push_back(pi * pi * (i * i / (r.L * r.L) + j * j / (r.H * r.H)));
    }
  }
  if (v.empty()) return std::nullopt;
  return first_sorted(v, k);
}

/// Largest |λ − o| / max(1, |o|).
inline double max_relative_error(const RVec& values, const std::vector<double>& oracle) {
  double e = 0.0;
  for (int i = 0; i < std::min<int>(values.size(), static_cast<int>(oracle.size())); ++i)
    e = std::max(e, std::abs(values(i) - oracle[i]) / std::max(1.0, std::abs(oracle[i])));
  return e;
}

/// Multiplicities of consecutive groups whose relative spread is below `tol`.
inline std::vector<int> multiplicities(const std::vector<double>& v, double tol) {
  std::vector<int> out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i > 0 && std::abs(v[i] - v[i - 1]) <= tol * std::max(1.0, std::abs(v[i - 1])))
      ++out.back();
    else
      out.push_back(1);
  }
  return out;
}

inline std::vector<int> cluster_sizes(const SpectralResult& r) {
  std::vector<int> out;
  for (const auto& c : r.clusters) out.push_back(static_cast<int>(c.size()));
  return out;
}

// ---- scenario runners -------------------------------------------------------------

namespace detail {

namespace fs = std::filesystem;

class ScenarioRun {
 public:
  ScenarioRun(const ScenarioConfig& cfg, fs::path out) : cfg_(cfg), out_(std::move(out)) {
    report_.scenario = cfg.scenario;
    report_.input = cfg.echo();
    io::ensure_dir(out_);
  }

  RunReport& report() { return report_; }
  const ScenarioConfig& cfg() const { return cfg_; }

  fs::path file(const std::string& name) {
    report_.files.push_back(name);
    return out_ / name;
  }

  template <class F>
  auto timed(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto result = f();
    report_.timings.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return result;
  }

  void flag(const std::string& name, bool v) { report_.flags[name] = v; }

 private:
  ScenarioConfig cfg_;
  fs::path out_;
  RunReport report_;
};

inline std::vector<double> to_std(const RVec& v) { return {v.data(), v.data() + v.size()}; }

inline void write_modes(ScenarioRun& run, const SpectralResult& r, const std::string& name) {
  const Mesh& mesh = *r.op->mesh;
  const CMat nodes = r.lifted();
  std::vector<std::vector<std::vector<double>>> blocks;
  std::vector<int> order(mesh.node_count());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return mesh.coords[a][1] != mesh.coords[b][1] ? mesh.coords[a][1] < mesh.coords[b][1]
                                                  : mesh.coords[a][0] < mesh.coords[b][0];
  });
  for (int c = 0; c < r.size(); ++c) {
    std::vector<std::vector<double>> rows;
    for (int id : order) {
      std::vector<double> row{mesh.coords[id][0]};
      if (mesh.dimension == 2) row.push_back(mesh.coords[id][1]);
      row.push_back(nodes(id, c).real());
      row.push_back(nodes(id, c).imag());
      rows.push_back(row);
    }
    blocks.push_back(std::move(rows));
  }
  io::write_dat(run.file(name), blocks,
                {mesh.dimension == 2 ? "x y re im, one block per mode" : "x re im, one block per mode"});
}

inline void write_eigen_table(ScenarioRun& run, const SpectralResult& r, const std::optional<std::vector<double>>& oracle,
                              const std::string& name) {
  io::CsvTable t;
  std::vector<double> idx, cl;
  for (int i = 0; i < r.size(); ++i) {
    idx.push_back(i + 1);
    cl.push_back(r.cluster_of(i));
  }
  t.add_column("index", idx);
  t.add_column("lambda", to_std(r.values));
  t.add_column("cluster", cl);
  if (oracle) t.add_column("closed_form", *oracle);
  t.write(run.file(name));
}

inline void write_flow(ScenarioRun& run, const FlowResult& fr) {
  // flow.csv: ordered eigenvalues λ_1(s) ≤ … ≤ λ_k(s); flow.dat: the tracked curves
  io::CsvTable t;
  t.add_column("s", fr.s);
  for (int c = 0; c < fr.k; ++c) {
    std::vector<double> col;
    for (const auto& smp : fr.samples) col.push_back(smp.values(c));
    t.add_column("lambda" + std::to_string(c + 1), col);
  }
  t.write(run.file("flow.csv"));

  std::vector<std::vector<std::vector<double>>> blocks;
  for (int c = 0; c < fr.k; ++c) {
    std::vector<std::vector<double>> rows;
    for (size_t j = 0; j < fr.s.size(); ++j) rows.push_back({fr.s[j], fr.curves(static_cast<Eigen::Index>(j), c)});
    blocks.push_back(std::move(rows));
  }
  io::write_dat(run.file("flow.dat"), blocks, {"s lambda, one block per tracked curve"});

  std::vector<std::vector<double>> gap;
  for (size_t j = 0; j < fr.s.size(); ++j) gap.push_back({fr.s[j], fr.gap_profile[j]});
  io::write_dat(run.file("gap.dat"), {gap}, {"s gap(U(s))"});

  io::CsvTable ct;
  std::vector<double> a, b, lo, hi, sep, en, ex;
  for (const auto& e : fr.crossings) {
    a.push_back(e.curve_a + 1);
    b.push_back(e.curve_b + 1);
    lo.push_back(e.s_lo);
    hi.push_back(e.s_hi);
    sep.push_back(e.min_separation);
    en.push_back(e.energy);
    ex.push_back(e.order_exchanged ? 1 : 0);
  }
  ct.add_column("curve_a", a);
  ct.add_column("curve_b", b);
  ct.add_column("s_lo", lo);
  ct.add_column("s_hi", hi);
  ct.add_column("min_separation", sep);
  ct.add_column("energy", en);
  ct.add_column("order_exchanged", ex);
  ct.write(run.file("crossings.csv"));
}

inline bool permutations_valid(const FlowResult& fr) {
  for (const auto& p : fr.step_permutations) {
    std::vector<int> q = p;
    std::sort(q.begin(), q.end());
    for (size_t i = 0; i < q.size(); ++i)
      if (q[i] != static_cast<int>(i)) return false;
  }
  return true;
}

inline bool lipschitz_consistent(const FlowResult& fr) {
  for (size_t j = 0; j + 1 < fr.s.size(); ++j)
    for (int c = 0; c < fr.k; ++c) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (std::abs(fr.curves(jj + 1, c) - fr.curves(jj, c)) > fr.lipschitz * (fr.s[j + 1] - fr.s[j]) * (1 + 1e-12) + 1e-12)
        return false;
    }
  return true;
}

inline json flow_headline(const FlowResult& fr) {
  json h;
  h["samples"] = fr.s.size();
  h["min_gap"] = fr.min_gap;
  h["min_ground"] = fr.min_ground;
  h["lipschitz"] = fr.lipschitz;
  h["crossings"] = fr.crossings.size();
  h["total_permutation"] = fr.total_permutation();
  h["start"] = to_std(fr.samples.front().values.head(fr.k));
  h["end"] = to_std(fr.samples.back().values.head(fr.k));
  h["tracked_end"] = to_std(fr.curves.row(fr.curves.rows() - 1).transpose());
  return h;
}

inline void endpoint_flags(ScenarioRun& run, const FlowResult& fr) {
  const auto& c = run.cfg();
  for (const auto& [which, spec, row] :
       {std::tuple{"start", c.bc, &fr.samples.front()}, std::tuple{"end", *c.bc_end, &fr.samples.back()}}) {
    const auto oracle = closed_form_spectrum(c.domain, spec, fr.k);
    if (!oracle) continue;
    const double err = max_relative_error(row->values.head(fr.k), *oracle);
    run.report().headline[std::string(which) + "_closed_form_error"] = err;
    run.flag(std::string(which) + "_matches_closed_form", err < 1e-3);
  }
}

inline std::vector<std::vector<double>> hypothesis_rows(const HypothesisReport& h) {
  std::vector<std::vector<double>> rows;
  for (size_t j = 0; j < h.s.size(); ++j)
    rows.push_back({h.s[j], static_cast<double>(h.max_degeneracy[j]), h.growth_ratio[j], h.d1_v[j], h.d2_v[j],
                    h.d1_vhv[j], h.d2_vhv[j], h.lambda_min[j], h.gap_profile[j]});
  return rows;
}

inline void write_hypothesis(ScenarioRun& run, const HypothesisReport& h) {
  io::CsvTable t;
  const auto rows = hypothesis_rows(h);
  const char* names[] = {"s", "max_degeneracy", "growth_ratio", "d1_v", "d2_v", "d1_vhv", "d2_vhv", "lambda_min", "gap"};
  for (int c = 0; c < 9; ++c) {
    std::vector<double> col;
    for (const auto& r : rows) col.push_back(r[c]);
    t.add_column(names[c], col);
  }
  t.write(run.file("hypothesis.csv"));
  json j;
  j["h5_min_lambda"] = h.h5_min;
  j["max_degeneracy"] = *std::max_element(h.max_degeneracy.begin(), h.max_degeneracy.end());
  j["max_growth_ratio"] = *std::max_element(h.growth_ratio.begin(), h.growth_ratio.end());
  j["max_d1_v"] = h.max_d1_v;
  j["max_d2_v"] = h.max_d2_v;
  j["max_d1_vhv"] = h.max_d1_vhv;
  j["max_d2_vhv"] = h.max_d2_vhv;
  j["flagged_s"] = h.flagged_s;
  run.report().headline["hypotheses"] = j;
  bool finite = std::isfinite(h.h5_min);
  for (const auto& r : rows)
    for (double x : r) finite = finite && std::isfinite(x);
  run.flag("hypothesis_report_finite", finite);
}

inline void run_spectrum(ScenarioRun& run) {
  const auto& c = run.cfg();
  const auto mesh = make_mesh(c.domain, c.n);
  const auto bops = boundary_operators(*mesh);
  const auto u = resolve_unitary(c.bc, *mesh, bops);
  const auto op = assemble_laplacian(mesh, bops, u);
  const int k = std::min(c.k, op->dim());
  const auto r = run.timed("eigensolve", [&] { return eigensolve(op, k); });
  const auto oracle = closed_form_spectrum(c.domain, c.bc, k);
  write_eigen_table(run, r, oracle, "eigenvalues.csv");
  write_modes(run, r, "modes.dat");
  auto& h = run.report().headline;
  h["eigenvalues"] = to_std(r.values);
  h["cluster_sizes"] = cluster_sizes(r);
  h["max_residual"] = r.max_residual();
  h["orthonormality_defect"] = r.orthonormality_defect();
  h["gap"] = spectral_gap(u).gap;
  h["gap_class"] = std::string(to_string(spectral_gap(u).classification));
  run.flag("residual_below_1e-9", r.max_residual() < 1e-9);
  run.flag("orthonormal_within_1e-10", r.orthonormality_defect() < 1e-10);
  if (oracle) {
    const double err = max_relative_error(r.values, *oracle);
    h["closed_form_error"] = err;
    run.flag("matches_closed_form", err < (mesh->dimension == 2 ? 1e-2 : 1e-3));
  }
}

inline void run_flow(ScenarioRun& run) {
  const auto& c = run.cfg();
  const auto mesh = make_mesh(c.domain, c.n);
  const auto bops = boundary_operators(*mesh);
  const auto path = resolve_path(c, *mesh, bops);
  const auto fr = run.timed("spectral_flow", [&] { return spectral_flow(path, mesh, bops, c.k, c.steps); });
  write_flow(run, fr);
  run.report().headline["flow"] = flow_headline(fr);
  run.flag("permutations_valid", permutations_valid(fr));
  run.flag("lipschitz_consistent", lipschitz_consistent(fr));
  endpoint_flags(run, fr);
}

inline EpsilonSchedule schedule_from(const RampSpec& r) {
  return r.profile == "smoothstep" ? schedules::smoothstep(r.from, r.to, r.T) : schedules::linear(r.from, r.to, r.T);
}

inline void run_faraday_scenario(ScenarioRun& run) {
  const auto& c = run.cfg();
  const RampSpec ramp = *c.epsilon_ramp;
  const auto schedule = schedule_from(ramp);
  const auto mesh = make_mesh(c.domain, c.n);
  const auto bops = boundary_operators(*mesh);

  // initial state: ground state at ε(0), carried to the periodic reference domain
  const auto periodic = assemble_laplacian(mesh, bops, presets::periodic());
  const auto start_op = assemble_laplacian(mesh, bops, presets::quasi_periodic(-2.0 * pi * ramp.from));
  const auto ground = eigensolve(start_op, 1);
  const Wavefunction psi0 =
      gauge_map(ramp.from, Wavefunction{ground.vectors.col(0), start_op}, GaugeDirection::to_reference, periodic);

  const int segments = c.steps - 1;
  const int per = std::max(1, static_cast<int>(std::ceil(ramp.T / c.dt / segments)));
  const double dt = ramp.T / (per * segments);
  PropagateOptions popt;
  popt.record_stride = per;
  const auto tr = run.timed("propagate", [&] { return run_faraday(schedule, psi0, dt, popt); });

  // instantaneous spectra along the schedule, sampled at the record times
  const auto path = make_family_path(
      [schedule, T = ramp.T](double s) { return presets::quasi_periodic(-2.0 * pi * schedule.eps(s * T)); }, c.steps);
  FlowOptions fo;
  fo.max_refinements = 0;
  const auto fr = run.timed("spectral_flow", [&] { return spectral_flow(path, mesh, bops, c.k, c.steps, fo); });
  const auto s_of_t = [T = ramp.T](double t) { return t / T; };
  const auto fid = adiabatic_fidelity(tr, fr, s_of_t);

  std::vector<std::vector<double>> rows;
  for (int k = 0; k < tr.size(); ++k) rows.push_back({tr.t[k], fid[k]});
  io::write_dat(run.file("fidelity.dat"), {rows}, {"t f(t) = |<psi(t), ground(eps(t))>|"});
  io::CsvTable t;
  std::vector<double> eps;
  for (double x : tr.t) eps.push_back(schedule.eps(x));
  t.add_column("t", tr.t);
  t.add_column("epsilon", eps);
  t.add_column("norm", tr.norms);
  t.add_column("energy", tr.energies);
  t.add_column("fidelity", fid);
  t.write(run.file("trajectory.csv"));
  write_flow(run, fr);

  auto& h = run.report().headline;
  h["dt"] = dt;
  h["steps"] = static_cast<long long>(per) * segments;
  h["final_fidelity"] = fid.back();
  h["min_fidelity"] = *std::min_element(fid.begin(), fid.end());
  h["max_norm_drift"] = tr.max_norm_drift;
  h["final_energy"] = tr.energies.back();
  h["flow"] = flow_headline(fr);
  const auto samples = schedule.sample();
  h["max_eps_dot"] = samples.max_deps;
  h["max_eps_ddot"] = samples.max_d2eps;
  run.flag("norm_drift_below_1e-9", tr.max_norm_drift < 1e-9);
  bool in_range = true;
  for (double f : fid) in_range = in_range && f >= 0.0 && f <= 1.0 + 1e-12;
  run.flag("fidelity_in_unit_interval", in_range);
  run.flag("permutations_valid", permutations_valid(fr));
}

inline void run_reconnect(ScenarioRun& run) {
  const auto& c = run.cfg();
  const auto mesh = make_mesh(c.domain, c.n);
  const auto bops = boundary_operators(*mesh);
  const auto path = resolve_path(c, *mesh, bops);
  const auto hyp = run.timed("hypothesis_report", [&] { return path_hypothesis_report(path, mesh, bops, c.k, c.steps); });
  write_flow(run, hyp.flow);
  write_hypothesis(run, hyp);
  run.report().headline["flow"] = flow_headline(hyp.flow);
  run.flag("permutations_valid", permutations_valid(hyp.flow));
  run.flag("lipschitz_consistent", lipschitz_consistent(hyp.flow));
  endpoint_flags(run, hyp.flow);

  if (c.T > 0.0) {
    const auto& s0 = hyp.flow.samples.front();
    const Wavefunction psi0{s0.vectors.col(0), s0.op};
    FrozenOptions fo;
    fo.record_stride = std::max(1, static_cast<int>(std::lround(c.T / c.dt / 500.0)));
    const auto tr = run.timed("frozen_domain", [&] {
      return frozen_domain_propagate(path, mesh, bops, psi0, 0.0, c.T, c.dt, fo);
    });
    io::CsvTable t;
    t.add_column("t", tr.t);
    t.add_column("norm", tr.norms);
    t.add_column("energy", tr.energies);
    t.add_column("projection_loss", tr.projection_loss);
    t.write(run.file("trajectory.csv"));
    const auto& s1 = hyp.flow.samples.back();
    const CVec final_nodes = tr.nodes(tr.size() - 1);
    std::vector<double> idx, pop, lam;
    double total = 0.0;
    for (int i = 0; i < s1.size(); ++i) {
      const double p = std::norm(linalg::weighted_dot(s1.op->lift * s1.vectors.col(i), mesh->weights, final_nodes));
      idx.push_back(i + 1);
      pop.push_back(p);
      lam.push_back(s1.values(i));
      total += p;
    }
    io::CsvTable pt;
    pt.add_column("index", idx);
    pt.add_column("lambda", lam);
    pt.add_column("population", pop);
    pt.write(run.file("populations.csv"));
    auto& h = run.report().headline;
    const double nf = tr.norms.back();
    h["final_norm"] = nf;
    h["cumulative_projection_loss"] = tr.projection_loss.back();
    h["captured_population"] = total;
    run.flag("norm_accounts_for_projection_loss", std::abs(1.0 - nf * nf) <= tr.projection_loss.back() + 1e-8);
  }
}

inline void run_torus_vs_cylinder(ScenarioRun& run) {
  const auto& c = run.cfg();
  const auto mesh = make_mesh(c.domain, c.n);
  const auto bops = boundary_operators(*mesh);
  auto& h = run.report().headline;
  for (const std::string name : {"torus", "cylinder"}) {
    BCSpec bc;
    bc.preset = name;
    const auto op = assemble_laplacian(mesh, bops, resolve_unitary(bc, *mesh, bops), name);
    const auto r = run.timed(name, [&] { return eigensolve(op, std::min(c.k, op->dim())); });
    const auto oracle = closed_form_spectrum(c.domain, bc, r.size());
    write_eigen_table(run, r, oracle, name + ".csv");
    const double err = max_relative_error(r.values, *oracle);
    const auto mult = multiplicities(to_std(r.values), 1e-2);
    const auto expect = multiplicities(*oracle, 1e-9);
    h[name] = {{"eigenvalues", to_std(r.values)},
               {"closed_form", *oracle},
               {"closed_form_error", err},
               {"multiplicities", mult},
               {"closed_form_multiplicities", expect}};
    run.flag(name + "_matches_closed_form", err < 1e-2);
    run.flag(name + "_degeneracies_match", mult == expect);
  }
}

inline void run_bracketing(ScenarioRun& run) {
  const auto& c = run.cfg();
  const auto mesh = make_mesh(c.domain, c.n);
  const auto bops = boundary_operators(*mesh);
  const int nb = mesh->boundary_count();
  const int k = std::min(c.k, mesh->interior_count);
  const auto ref = run.timed("reference", [&] { return bracket_reference(mesh, bops, k); });
  std::mt19937_64 rng(c.seed);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> sample, idx, ln, lu, ld, tol;
  int passed = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < c.count; ++i) {
    const CMat v = linalg::haar_unitary(nb, rng);
    RVec d(nb);
    for (int j = 0; j < nb; ++j) d(j) = coin(rng) ? 1.0 : -1.0;
    CMat m = v * d.cast<cplx>().asDiagonal() * v.adjoint();
    const auto u = BoundaryUnitary::from_matrix(m, 1e-10);
    const auto r = bracket_check(mesh, bops, u, ref);
    passed += r.pass ? 1 : 0;
    for (int n = 0; n < k; ++n) {
      sample.push_back(i);
      idx.push_back(n + 1);
      ln.push_back(r.lambda_n(n));
      lu.push_back(r.lambda_u(n));
      ld.push_back(r.lambda_d(n));
      tol.push_back(r.tolerance(n));
      worst = std::min({worst, r.lower_margin(n) + r.tolerance(n), r.upper_margin(n) + r.tolerance(n)});
    }
  }
  io::CsvTable t;
  t.add_column("sample", sample);
  t.add_column("n", idx);
  t.add_column("lambda_neumann", ln);
  t.add_column("lambda_u", lu);
  t.add_column("lambda_dirichlet", ld);
  t.add_column("tolerance", tol);
  t.write(run.file("bracketing.csv"));
  auto& h = run.report().headline;
  h["samples"] = c.count;
  h["passed"] = passed;
  h["worst_margin"] = worst;
  run.flag("all_brackets_hold", passed == c.count);
}

inline void run_hypothesis(ScenarioRun& run) {
  const auto& c = run.cfg();
  const auto mesh = make_mesh(c.domain, c.n);
  const auto bops = boundary_operators(*mesh);
  const auto path = resolve_path(c, *mesh, bops);
  const auto hyp = run.timed("hypothesis_report", [&] { return path_hypothesis_report(path, mesh, bops, c.k, c.steps); });
  write_flow(run, hyp.flow);
  write_hypothesis(run, hyp);
  run.report().headline["flow"] = flow_headline(hyp.flow);
  run.flag("permutations_valid", permutations_valid(hyp.flow));
}

}  // namespace detail

/// Runs the configured scenario, writing outputs and report.json into `out`.
inline RunReport run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out) {
  detail::ScenarioRun run(cfg, out);
  try {
    const std::string& s = cfg.scenario;
    if (s == "spectrum")
      detail::run_spectrum(run);
    else if (s == "flow")
      detail::run_flow(run);
    else if (s == "faraday")
      detail::run_faraday_scenario(run);
    else if (s == "reconnect_intervals")
      detail::run_reconnect(run);
    else if (s == "torus_vs_cylinder")
      detail::run_torus_vs_cylinder(run);
    else if (s == "bracketing_sweep")
      detail::run_bracketing(run);
    else if (s == "hypothesis_report")
      detail::run_hypothesis(run);
    else
      throw ConfigError("scenario: unknown scenario '" + s + "'");
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw Error("scenario " + cfg.scenario + ": " + e.what());
  }
  RunReport rep = run.report();
  io::write_json(out / "report.json", rep.to_json());
  return rep;
}

}  // namespace qbound
