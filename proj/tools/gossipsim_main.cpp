// Command-line experiment runner: configuration-driven sweeps over
// decentralized SGD variants, theory-table emission, self checks, and
// dataset export. See README.md for the config schema.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "gsim/config.hpp"
#include "gsim/experiment.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Simulator for gossip SGD with periodic/adaptive global "
               "averaging"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  long trials_override = 0;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  int parallel = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config)
      cmd->add_option("config", config_path, "experiment config (JSON)")
          ->required()
          ->check(CLI::ExistingFile);
    cmd->add_option("--out", out_override, "override output directory");
    cmd->add_option("--trials", trials_override, "override trial count");
    cmd->add_option("--seed", seed_override, "override master seed")
        ->each([&](const std::string&) { seed_set = true; });
    cmd->add_option("--parallel", parallel,
                    "max concurrent trials (0 = hardware)");
  };

  auto* run_cmd = app.add_subcommand("run", "execute an experiment config");
  add_common(run_cmd, true);

  auto* tables_cmd =
      app.add_subcommand("tables", "emit transient-time scaling tables");
  add_common(tables_cmd, true);

  auto* verify_cmd = app.add_subcommand("verify", "run the self-check suites");
  std::vector<std::string> subsets;
  std::string report_path = "verify_report.json";
  verify_cmd->add_option("--subset", subsets,
                         "subset(s): topology, gradients, reductions, "
                         "theory, bounds (default: all but bounds)");
  verify_cmd->add_option("--report", report_path,
                         "machine-readable report path");
  verify_cmd->add_option("--parallel", parallel,
                         "max concurrent trials (0 = hardware)");

  auto* export_cmd =
      app.add_subcommand("export-dataset", "write the problem as a CSV bundle");
  add_common(export_cmd, true);

  auto* topo_cmd = app.add_subcommand(
      "export-topology", "write the mixing weight matrix as CSV");
  add_common(topo_cmd, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify_cmd->parsed()) {
      std::vector<std::string> wanted = subsets;
      if (wanted.empty())
        wanted = {"topology", "gradients", "reductions", "theory"};
      std::vector<gsim::CheckResult> checks;
      auto has = [&wanted](const char* s) {
        for (const auto& w : wanted)
          if (w == s || w == "all") return true;
        return false;
      };
      if (has("topology"))
        for (auto& c : gsim::verify_topology()) checks.push_back(c);
      if (has("gradients"))
        for (auto& c : gsim::verify_gradients()) checks.push_back(c);
      if (has("reductions"))
        for (auto& c : gsim::verify_reductions()) checks.push_back(c);
      if (has("theory"))
        for (auto& c : gsim::verify_theory()) checks.push_back(c);
      if (has("bounds"))
        for (auto& c : gsim::verify_bounds(std::cerr, parallel))
          checks.push_back(c);
      return gsim::write_verify_report(checks, report_path);
    }

    gsim::ExperimentConfig cfg = gsim::load_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (trials_override > 0) cfg.trials = trials_override;
    if (seed_set) cfg.master_seed = seed_override;
    if (parallel > 0) cfg.max_parallel = parallel;

    if (run_cmd->parsed()) return gsim::run_experiment(cfg);

    if (tables_cmd->parsed()) {
      fs::create_directories(cfg.output_dir);
      const fs::path path = fs::path(cfg.output_dir) / "theory_tables.csv";
      gsim::emit_theory_tables(cfg.tables, path);
      std::cerr << "tables written to " << path << std::endl;
      return 0;
    }

    if (export_cmd->parsed()) {
      const auto problem = gsim::LogisticProblem::generate(
          cfg.problem.n, cfg.problem.samples, cfg.problem.dim,
          cfg.problem.het, cfg.problem.seed);
      const fs::path dir = fs::path(cfg.output_dir) / "dataset";
      problem.export_csv(dir);
      std::cerr << "dataset written to " << dir << std::endl;
      return 0;
    }

    if (topo_cmd->parsed()) {
      const auto topology = cfg.topology.build(cfg.problem.n);
      const fs::path dir = fs::path(cfg.output_dir) / "topology";
      gsim::export_topology_csv(topology, dir);
      std::cerr << "weight matrix written to " << dir << std::endl;
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
