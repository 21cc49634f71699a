// qbound command line: run scenario configs, list boundary presets, validate
// configs.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qbound/qbound.hpp"

namespace {

enum Exit { kOk = 0, kFlagFailed = 1, kConfigError = 2, kRunError = 3 };

std::filesystem::path output_dir(const std::string& cli_out, const qbound::ScenarioConfig& cfg) {
  if (!cli_out.empty()) return cli_out;
  if (cfg.output_dir) return *cfg.output_dir;
  if (const char* env = std::getenv("QBOUND_OUT"); env && *env) return env;
  return "qbound_out";
}

qbound::ScenarioConfig load(const std::string& path, std::optional<std::uint64_t> seed) {
  auto cfg = qbound::parse_config(qbound::io::read_file(path));
  if (seed) cfg.seed = *seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-adjoint boundary conditions: spectra, spectral flow and boundary-driven dynamics"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  app.add_option("--out", out, "Output directory (overrides config output_dir and QBOUND_OUT)");
  app.add_option("--seed", seed, "Seed for randomized sweeps (overrides the config)");
  app.add_flag("--quiet", quiet, "Only report errors");

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the scenario described by a config file");
  run->add_option("config", config_path, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
  auto* presets = app.add_subcommand("presets", "List boundary condition presets");
  std::string check_path;
  auto* check = app.add_subcommand("check", "Validate a config file without running it");
  check->add_option("config", check_path, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets->parsed()) {
      for (const auto& p : qbound::preset_catalog())
        std::cout << p.name << "\n    params: " << p.parameters << "\n    " << p.description << "\n";
      return kOk;
    }
    if (check->parsed()) {
      const auto cfg = load(check_path, seed);
      if (!quiet) std::cout << cfg.echo().dump(2) << "\n";
      return kOk;
    }
    const auto cfg = load(config_path, seed);
    const auto dir = output_dir(out, cfg);
    const auto report = qbound::run_scenario(cfg, dir);
    if (!quiet) {
      std::cout << "scenario " << report.scenario << " -> " << dir.string() << "\n";
      for (auto it = report.flags.begin(); it != report.flags.end(); ++it)
        std::cout << "  " << (it.value().get<bool>() ? "ok   " : "FAIL ") << it.key() << "\n";
      for (const auto& f : report.files) std::cout << "  wrote " << f << "\n";
      std::cout << "  wrote report.json\n";
      for (const auto& [name, sec] : report.timings) std::cout << "  time " << name << " " << sec << " s\n";
    }
    return report.ok() ? kOk : kFlagFailed;
  } catch (const qbound::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunError;
  }
}
