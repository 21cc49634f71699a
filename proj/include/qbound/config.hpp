#pragma once

// Strict JSON scenario configuration. Unknown keys, wrong types and missing
// required fields raise ConfigError naming the key path.

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "qbound/boundary.hpp"
#include "qbound/geometry.hpp"
#include "qbound/types.hpp"

namespace qbound {

using json = nlohmann::ordered_json;

inline const std::vector<std::string>& scenario_ids() {
  static const std::vector<std::string> ids = {"spectrum",          "flow",
                                               "faraday",           "reconnect_intervals",
                                               "torus_vs_cylinder", "bracketing_sweep",
                                               "hypothesis_report"};
  return ids;
}

struct BCSpec {
  std::string preset;
  std::optional<double> alpha;
  std::optional<double> epsilon;
  std::optional<CMat> matrix;
  std::vector<std::array<std::string, 2>> pairs;
  std::string others = "neumann";
};

struct RampSpec {
  double from = 0.0;
  double to = 0.4;
  double T = 200.0;
  std::string profile = "linear";
};

struct ScenarioConfig {
  std::string scenario;
  DomainSpec domain = IntervalUnion{{{0.0, 1.0}}};
  BCSpec bc;
  std::optional<BCSpec> bc_end;
  PathRule path_rule = PathRule::eigenphase;
  double n = 1000.0;
  int k = 10;
  double dt = 0.01;
  double T = 0.0;
  int steps = 51;
  int count = 50;
  std::uint64_t seed = 12345;
  std::optional<RampSpec> epsilon_ramp;
  std::optional<std::string> output_dir;
  std::vector<std::string> defaults_applied;

  /// Canonical echo of the validated configuration, defaults included.
  [[nodiscard]] json echo() const;
};

namespace detail {

inline std::string line_context(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError((path.empty() ? "" : path + ".") + it.key() + ": unknown key");
}

inline double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

inline double get_positive(const json& j, const std::string& path) {
  const double v = get_number(j, path);
  if (!(v > 0.0)) throw ConfigError(path + ": must be positive");
  return v;
}

inline int get_positive_int(const json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) throw ConfigError(path + ": expected an integer");
  const auto v = j.get<long long>();
  if (v <= 0 || v > 1000000000LL) throw ConfigError(path + ": must be a positive integer");
  return static_cast<int>(v);
}

inline std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  return j.get<std::string>();
}

inline CMat parse_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a non-empty array of rows");
  const auto n = static_cast<Eigen::Index>(j.size());
  CMat m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) throw ConfigError(rp + ": expected a row of length " + std::to_string(n));
    for (Eigen::Index c = 0; c < n; ++c) {
      const json& e = row[static_cast<size_t>(c)];
      const std::string ep = rp + "[" + std::to_string(c) + "]";
      if (e.is_number()) {
        m(r, c) = e.get<double>();
      } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
        m(r, c) = cplx(e[0].get<double>(), e[1].get<double>());
      } else {
        throw ConfigError(ep + ": expected a number or [re, im]");
      }
    }
  }
  return m;
}

inline BCSpec parse_bc(const json& j, const std::string& path) {
  check_keys(j, path, {"preset", "alpha", "epsilon", "matrix", "pairs", "others"});
  BCSpec bc;
  if (!j.contains("preset")) throw ConfigError(path + ".preset: missing required field");
  bc.preset = get_string(j["preset"], path + ".preset");
  bool known = false;
  for (const auto& p : preset_catalog()) known = known || p.name == bc.preset;
  if (!known) throw ConfigError(path + ".preset: unknown boundary preset '" + bc.preset + "'");
  if (j.contains("alpha")) bc.alpha = get_number(j["alpha"], path + ".alpha");
  if (j.contains("epsilon")) bc.epsilon = get_number(j["epsilon"], path + ".epsilon");
  if (bc.alpha && bc.epsilon) throw ConfigError(path + ": give alpha or epsilon, not both");
  if ((bc.alpha || bc.epsilon) && bc.preset != "quasi_periodic")
    throw ConfigError(path + ".alpha: only the quasi_periodic preset takes a twist");
  if (j.contains("matrix")) {
    if (bc.preset != "custom") throw ConfigError(path + ".matrix: only the custom preset takes a matrix");
    bc.matrix = parse_matrix(j["matrix"], path + ".matrix");
  } else if (bc.preset == "custom") {
    throw ConfigError(path + ".matrix: missing required field for preset custom");
  }
  if (j.contains("pairs")) {
    if (bc.preset != "block_pasting") throw ConfigError(path + ".pairs: only the block_pasting preset takes pairs");
    const json& p = j["pairs"];
    if (!p.is_array()) throw ConfigError(path + ".pairs: expected an array of [piece, piece]");
    for (size_t i = 0; i < p.size(); ++i) {
      const std::string pp = path + ".pairs[" + std::to_string(i) + "]";
      if (!p[i].is_array() || p[i].size() != 2) throw ConfigError(pp + ": expected [piece, piece]");
      bc.pairs.push_back({get_string(p[i][0], pp + "[0]"), get_string(p[i][1], pp + "[1]")});
    }
  }
  if (j.contains("others")) {
    if (bc.preset != "block_pasting") throw ConfigError(path + ".others: only the block_pasting preset takes others");
    bc.others = get_string(j["others"], path + ".others");
    if (bc.others != "neumann" && bc.others != "dirichlet")
      throw ConfigError(path + ".others: expected \"neumann\" or \"dirichlet\"");
  }
  return bc;
}

inline json bc_echo(const BCSpec& bc) {
  json j;
  j["preset"] = bc.preset;
  if (bc.alpha) j["alpha"] = *bc.alpha;
  if (bc.epsilon) j["epsilon"] = *bc.epsilon;
  if (bc.matrix) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < bc.matrix->rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < bc.matrix->cols(); ++c) row.push_back({(*bc.matrix)(r, c).real(), (*bc.matrix)(r, c).imag()});
      rows.push_back(row);
    }
    j["matrix"] = rows;
  }
  if (bc.preset == "block_pasting") {
    json p = json::array();
    for (const auto& pr : bc.pairs) p.push_back({pr[0], pr[1]});
    j["pairs"] = p;
    j["others"] = bc.others;
  }
  return j;
}

inline DomainSpec parse_domain(const json& j) {
  check_keys(j, "domain", {"intervals", "rectangle"});
  if (j.contains("intervals") == j.contains("rectangle"))
    throw ConfigError("domain: give exactly one of intervals or rectangle");
  if (j.contains("intervals")) {
    const json& iv = j["intervals"];
    if (!iv.is_array() || iv.empty()) throw ConfigError("domain.intervals: expected a non-empty array of [a, b]");
    IntervalUnion u;
    for (size_t i = 0; i < iv.size(); ++i) {
      const std::string p = "domain.intervals[" + std::to_string(i) + "]";
      if (!iv[i].is_array() || iv[i].size() != 2) throw ConfigError(p + ": expected [a, b]");
      const double a = get_number(iv[i][0], p + "[0]"), b = get_number(iv[i][1], p + "[1]");
      if (!(b > a)) throw ConfigError(p + ": non-positive length");
      u.intervals.push_back({a, b});
    }
    return u;
  }
  const json& r = j["rectangle"];
  check_keys(r, "domain.rectangle", {"L", "H"});
  Rectangle rect;
  if (r.contains("L")) rect.L = get_positive(r["L"], "domain.rectangle.L");
  if (r.contains("H")) rect.H = get_positive(r["H"], "domain.rectangle.H");
  return rect;
}

inline json domain_echo(const DomainSpec& d) {
  json j;
  if (const auto* iu = std::get_if<IntervalUnion>(&d)) {
    json a = json::array();
    for (const auto& iv : iu->intervals) a.push_back({iv[0], iv[1]});
    j["intervals"] = a;
  } else {
    const auto& r = std::get<Rectangle>(d);
    j["rectangle"] = {{"L", r.L}, {"H", r.H}};
  }
  return j;
}

}  // namespace detail

inline json ScenarioConfig::echo() const {
  json j;
  j["scenario"] = scenario;
  j["domain"] = detail::domain_echo(domain);
  j["bc"] = detail::bc_echo(bc);
  if (bc_end) j["bc_end"] = detail::bc_echo(*bc_end);
  j["path_rule"] = std::string(to_string(path_rule));
  j["n"] = n;
  j["k"] = k;
  j["dt"] = dt;
  if (T > 0.0) j["T"] = T;  // 0 means "no dynamics"; the parser only takes positive T
  j["steps"] = steps;
  j["count"] = count;
  j["seed"] = seed;
  if (epsilon_ramp)
    j["epsilon_ramp"] = {{"from", epsilon_ramp->from},
                         {"to", epsilon_ramp->to},
                         {"T", epsilon_ramp->T},
                         {"profile", epsilon_ramp->profile}};
  j["defaults_applied"] = defaults_applied;
  return j;
}

/// Parses and validates a configuration document, filling scenario defaults.
inline ScenarioConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("parse error at " + detail::line_context(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
  }
  detail::check_keys(j, "", {"scenario", "domain", "bc", "bc_end", "path_rule", "n", "k", "dt", "T", "steps", "count",
                             "seed", "epsilon_ramp", "output_dir"});
  ScenarioConfig c;
  if (!j.contains("scenario")) throw ConfigError("scenario: missing required field");
  c.scenario = detail::get_string(j["scenario"], "scenario");
  if (std::find(scenario_ids().begin(), scenario_ids().end(), c.scenario) == scenario_ids().end())
    throw ConfigError("scenario: unknown scenario '" + c.scenario + "'");
  const std::string& s = c.scenario;

  auto defaulted = [&](const std::string& key) {
    const bool missing = !j.contains(key);
    if (missing) c.defaults_applied.push_back(key);
    return missing;
  };

  // domain
  if (defaulted("domain")) {
    if (s == "faraday" || s == "flow" || s == "hypothesis_report")
      c.domain = IntervalUnion{{{0.0, 2.0 * pi}}};
    else if (s == "reconnect_intervals")
      c.domain = IntervalUnion{{{0.0, 1.0}, {0.0, 1.0}}};
    else if (s == "torus_vs_cylinder")
      c.domain = Rectangle{1.0, 1.0};
    else
      c.domain = IntervalUnion{{{0.0, 1.0}}};
  } else {
    c.domain = detail::parse_domain(j["domain"]);
  }

  // boundary conditions
  if (defaulted("bc")) {
    if (s == "faraday" || s == "flow" || s == "hypothesis_report")
      c.bc = {"quasi_periodic", std::nullopt, 0.0, std::nullopt, {}, "neumann"};
    else if (s == "reconnect_intervals")
      c.bc.preset = "two_interval_U1";
    else if (s == "torus_vs_cylinder")
      c.bc.preset = "torus";
    else
      c.bc.preset = "dirichlet";
  } else {
    c.bc = detail::parse_bc(j["bc"], "bc");
  }
  if (j.contains("bc_end")) {
    c.bc_end = detail::parse_bc(j["bc_end"], "bc_end");
  } else if (s == "flow" || s == "hypothesis_report" || s == "reconnect_intervals") {
    c.defaults_applied.push_back("bc_end");
    if (s == "reconnect_intervals")
      c.bc_end = BCSpec{"two_interval_U2", std::nullopt, std::nullopt, std::nullopt, {}, "neumann"};
    else
      c.bc_end = BCSpec{"quasi_periodic", std::nullopt, 1.0, std::nullopt, {}, "neumann"};
  }
  if (!defaulted("path_rule")) {
    const std::string r = detail::get_string(j["path_rule"], "path_rule");
    if (r == "eigenphase")
      c.path_rule = PathRule::eigenphase;
    else if (r == "great_circle")
      c.path_rule = PathRule::great_circle;
    else
      throw ConfigError("path_rule: expected \"eigenphase\" or \"great_circle\"");
  }

  // numerics
  if (!defaulted("n")) c.n = detail::get_positive(j["n"], "n");
  if (s == "torus_vs_cylinder" && !j.contains("n")) c.n = 40.0;
  if (!defaulted("k"))
    c.k = detail::get_positive_int(j["k"], "k");
  else if (s == "reconnect_intervals")
    c.k = 6;
  else if (s == "torus_vs_cylinder")
    c.k = 9;
  else if (s == "flow" || s == "faraday" || s == "hypothesis_report")
    c.k = 4;
  if (!defaulted("dt")) c.dt = detail::get_positive(j["dt"], "dt");
  if (!defaulted("T")) c.T = detail::get_positive(j["T"], "T");
  if (!defaulted("steps")) {
    c.steps = detail::get_positive_int(j["steps"], "steps");
    if (c.steps < 2) throw ConfigError("steps: must be at least 2");
  }
  if (!defaulted("count")) c.count = detail::get_positive_int(j["count"], "count");
  if (!defaulted("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
      throw ConfigError("seed: expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("epsilon_ramp")) {
    const json& r = j["epsilon_ramp"];
    detail::check_keys(r, "epsilon_ramp", {"from", "to", "T", "profile"});
    RampSpec ramp;
    if (r.contains("from")) ramp.from = detail::get_number(r["from"], "epsilon_ramp.from");
    if (r.contains("to")) ramp.to = detail::get_number(r["to"], "epsilon_ramp.to");
    if (r.contains("T")) ramp.T = detail::get_positive(r["T"], "epsilon_ramp.T");
    if (r.contains("profile")) {
      ramp.profile = detail::get_string(r["profile"], "epsilon_ramp.profile");
      if (ramp.profile != "linear" && ramp.profile != "smoothstep")
        throw ConfigError("epsilon_ramp.profile: expected \"linear\" or \"smoothstep\"");
    }
    c.epsilon_ramp = ramp;
  } else if (s == "faraday") {
    c.defaults_applied.push_back("epsilon_ramp");
    c.epsilon_ramp = RampSpec{};
  }
  if (j.contains("output_dir")) c.output_dir = detail::get_string(j["output_dir"], "output_dir");

  if (s == "faraday") {
    const auto* iu = std::get_if<IntervalUnion>(&c.domain);
    if (!iu || iu->intervals.size() != 1 || std::abs(iu->intervals[0][0]) > 1e-9 ||
        std::abs(iu->intervals[0][1] - 2.0 * pi) > 1e-9)
      throw ConfigError("domain: the faraday scenario runs on the interval [0, 2pi]");
  }
  if (s == "torus_vs_cylinder" && !std::holds_alternative<Rectangle>(c.domain))
    throw ConfigError("domain: torus_vs_cylinder needs a rectangle");
  return c;
}

}  // namespace qbound
