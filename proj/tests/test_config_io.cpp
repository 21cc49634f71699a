#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "qbound/qbound.hpp"

using namespace qbound;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("qbound_test_config_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("minimal spectrum config fills defaults", "[config]") {
  const auto c = parse_config(R"({"scenario":"spectrum","domain":{"intervals":[[0,1]]},"bc":{"preset":"dirichlet"}})");
  CHECK(c.scenario == "spectrum");
  CHECK(c.n == 1000.0);
  CHECK(c.k == 10);
  CHECK(c.bc.preset == "dirichlet");
  const auto& d = c.defaults_applied;
  CHECK(std::find(d.begin(), d.end(), "n") != d.end());
  CHECK(std::find(d.begin(), d.end(), "k") != d.end());
  CHECK(std::find(d.begin(), d.end(), "domain") == d.end());
  const json e = c.echo();
  CHECK(e["n"].get<double>() == 1000.0);
  CHECK(e["bc"]["preset"] == "dirichlet");
}

TEST_CASE("faraday config gives a valid schedule", "[config]") {
  const auto c = parse_config(R"({"scenario":"faraday","epsilon_ramp":{"from":0,"to":0.4,"T":200}})");
  REQUIRE(c.epsilon_ramp);
  CHECK(c.epsilon_ramp->from == 0.0);
  CHECK(c.epsilon_ramp->to == 0.4);
  CHECK(c.epsilon_ramp->T == 200.0);
  const auto* iu = std::get_if<IntervalUnion>(&c.domain);
  REQUIRE(iu);
  CHECK(iu->intervals[0][1] == Catch::Approx(2.0 * pi));
  const auto sched = schedules::linear(c.epsilon_ramp->from, c.epsilon_ramp->to, c.epsilon_ramp->T);
  CHECK_NOTHROW(sched.validate());
  CHECK(sched.eps(200.0) == Catch::Approx(0.4));
}

TEST_CASE("config errors name the offending key", "[config]") {
  CHECK_THROWS_WITH(parse_config(R"({"scenario":"spectrum","bc":{"preset":"nonsense"}})"), ContainsSubstring("preset"));
  CHECK_THROWS_AS(parse_config(R"({"scenario":"spectrum","bc":{"preset":"nonsense"}})"), ConfigError);
  CHECK_THROWS_WITH(parse_config(R"({"scenario":"spectrum","nn":5})"), ContainsSubstring("nn: unknown key"));
  CHECK_THROWS_WITH(parse_config(R"({"scenario":"spectrum","bc":{"preset":"dirichlet","alfa":1}})"),
                    ContainsSubstring("bc.alfa"));
  CHECK_THROWS_WITH(parse_config(R"({"scenario":"spectrum","n":"many"})"), ContainsSubstring("n: expected a number"));
  CHECK_THROWS_WITH(parse_config(R"({"scenario":"spectrum","k":-3})"), ContainsSubstring("k:"));
  CHECK_THROWS_WITH(parse_config(R"({"scenario":"spectrum","dt":0})"), ContainsSubstring("dt: must be positive"));
  CHECK_THROWS_WITH(parse_config(R"({"domain":{"intervals":[[0,1]]}})"), ContainsSubstring("scenario: missing"));
  CHECK_THROWS_WITH(parse_config(R"({"scenario":"bogus"})"), ContainsSubstring("unknown scenario"));
  CHECK_THROWS_WITH(parse_config(R"({"scenario":"spectrum","bc":{"preset":"custom"}})"), ContainsSubstring("bc.matrix"));
  CHECK_THROWS_WITH(parse_config(R"({"scenario":"faraday","domain":{"intervals":[[0,1]]}})"),
                    ContainsSubstring("domain"));
  CHECK_THROWS_WITH(parse_config(R"({"scenario":"torus_vs_cylinder","domain":{"intervals":[[0,1]]}})"),
                    ContainsSubstring("rectangle"));
  CHECK_THROWS_WITH(parse_config(R"({"scenario":"faraday","epsilon_ramp":{"from":0,"profile":"cubic"}})"),
                    ContainsSubstring("epsilon_ramp.profile"));
}

TEST_CASE("malformed documents report line and column", "[config]") {
  const std::string text = "{\n  \"scenario\": \"spectrum\",\n  \"n\": ,\n}";
  try {
    parse_config(text);
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK_THAT(msg, ContainsSubstring("parse error"));
    CHECK_THAT(msg, ContainsSubstring("line 3"));
    CHECK_THAT(msg, ContainsSubstring("column"));
  }
}

TEST_CASE("custom matrices parse real and complex entries", "[config]") {
  const auto c = parse_config(
      R"({"scenario":"spectrum","bc":{"preset":"custom","matrix":[[0,[1,0]],[1,0]]}})");
  REQUIRE(c.bc.matrix);
  CHECK(c.bc.matrix->rows() == 2);
  CHECK((*c.bc.matrix)(0, 1) == cplx(1.0, 0.0));
  CHECK_THROWS_WITH(parse_config(R"({"scenario":"spectrum","bc":{"preset":"custom","matrix":[[0,1]]}})"),
                    ContainsSubstring("bc.matrix[0]"));
}

TEST_CASE("echo round trips through the parser", "[config]") {
  const auto c = parse_config(R"({"scenario":"flow","k":3,"steps":11})");
  json e = c.echo();
  e.erase("defaults_applied");
  const auto again = parse_config(e.dump());
  CHECK(again.echo().dump() != "");
  CHECK(again.k == 3);
  CHECK(again.steps == 11);
  REQUIRE(again.bc_end);
  CHECK(again.bc_end->epsilon == c.bc_end->epsilon);
}

TEST_CASE("CSV tables use a header, 17 digits and re/im pairs", "[io]") {
  const auto dir = scratch("csv");
  io::CsvTable t;
  t.add_column("x", std::vector<double>{0.1, 1.0 / 3.0});
  t.add_column("z", std::vector<cplx>{{1.0, -2.0}, {0.5, 0.25}});
  t.write(dir / "t.csv");
  const auto lines = lines_of(io::read_file(dir / "t.csv"));
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "x,z_re,z_im");
  CHECK(lines[1] == "0.10000000000000001,1,-2");
  CHECK(lines[2] == "0.33333333333333331,0.5,0.25");
  // 17 significant digits round trip exactly
  CHECK(std::stod(io::format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(std::stod(io::format_double(pi)) == pi);
}

TEST_CASE("dat files separate blocks with a blank line", "[io]") {
  const auto dir = scratch("dat");
  io::write_dat(dir / "d.dat", {{{0.0, 1.0}, {0.5, 2.0}}, {{0.0, 3.0}}}, {"s lambda"});
  const auto lines = lines_of(io::read_file(dir / "d.dat"));
  const std::vector<std::string> expect = {"# s lambda", "0 1", "0.5 2", "", "0 3"};
  CHECK(lines == expect);
}

TEST_CASE("run reports carry schema version 1", "[io]") {
  RunReport r;
  r.scenario = "spectrum";
  r.flags["a"] = true;
  r.files.push_back("eigenvalues.csv");
  const json j = r.to_json();
  CHECK(j["schema_version"] == "1");
  CHECK(j["ok"] == true);
  r.flags["b"] = false;
  CHECK_FALSE(r.ok());
  const auto dir = scratch("json");
  io::write_json(dir / "report.json", r.to_json());
  const json back = json::parse(io::read_file(dir / "report.json"));
  CHECK(back["schema_version"] == "1");
  CHECK(back["ok"] == false);
}

TEST_CASE("IO failures name the path", "[io]") {
  CHECK_THROWS_WITH(io::read_file("/nonexistent/qbound/file.json"), ContainsSubstring("/nonexistent/qbound/file.json"));
  const auto dir = scratch("blocked");
  { auto f = io::open_out(dir / "plain"); f << "x"; io::close_checked(f, dir / "plain"); }
  CHECK_THROWS_WITH(io::ensure_dir(dir / "plain" / "sub"), ContainsSubstring("plain"));
}
