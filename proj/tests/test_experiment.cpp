#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gsim/config.hpp"
#include "gsim/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json tiny_config_json(const std::string& out_dir) {
  return json{
      {"name", "tiny"},
      {"seed", 99},
      {"problem", {{"n", 6}, {"M", 40}, {"d", 4},
                   {"heterogeneity", "non_iid"}, {"seed", 5}}},
      {"topology", {{"kind", "ring"}}},
      {"trials", 3},
      {"log_interval", 5},
      {"output_dir", out_dir},
      {"detect_transient", {{"reference", "parallel"}, {"rel_tol", 0.05},
                            {"window", 4}}},
      {"runs",
       json::array(
           {{{"name", "parallel"}, {"variant", "parallel"}, {"T", 40},
             {"step", {{"kind", "halving"}, {"gamma0", 0.1}, {"every", 20}}}},
            {{"name", "pga"}, {"variant", "gossip_pga"}, {"H", 4}, {"T", 40},
             {"step", {{"kind", "halving"}, {"gamma0", 0.1}, {"every", 20}}}},
            {{"name", "aga"}, {"variant", "gossip_aga"}, {"T", 40},
             {"aga", {{"h_init", 2}, {"warmup", 10}}},
             {"step",
              {{"kind", "halving"}, {"gamma0", 0.1}, {"every", 20}}}}})}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  SECTION("full round trip") {
    const auto cfg = gsim::parse_config(tiny_config_json("outdir"));
    REQUIRE(cfg.name == "tiny");
    REQUIRE(cfg.master_seed == 99);
    REQUIRE(cfg.problem.n == 6);
    REQUIRE(cfg.problem.het == gsim::Heterogeneity::non_iid);
    REQUIRE(cfg.topology.kind == gsim::TopologyKind::ring);
    REQUIRE(cfg.trials == 3);
    REQUIRE(cfg.detect.enabled);
    REQUIRE(cfg.detect.reference == "parallel");
    REQUIRE(cfg.runs.size() == 3);
    REQUIRE(cfg.runs[1].config.variant == gsim::Variant::gossip_pga);
    REQUIRE(cfg.runs[1].config.period == 4);
    REQUIRE(cfg.runs[2].config.aga.h_init == 2);
    REQUIRE(cfg.runs[0].config.step.kind ==
            gsim::StepSchedule::Kind::halving);
  }
  SECTION("unknown variant is rejected") {
    auto j = tiny_config_json("x");
    j["runs"][0]["variant"] = "teleport";
    REQUIRE_THROWS_AS(gsim::parse_config(j), gsim::ConfigError);
  }
  SECTION("missing detection reference is rejected") {
    auto j = tiny_config_json("x");
    j["detect_transient"]["reference"] = "nonexistent";
    REQUIRE_THROWS_AS(gsim::parse_config(j), gsim::ConfigError);
  }
  SECTION("trials must be positive") {
    auto j = tiny_config_json("x");
    j["trials"] = 0;
    REQUIRE_THROWS_AS(gsim::parse_config(j), gsim::ConfigError);
  }
  SECTION("grid topology requires matching rows*cols") {
    auto j = tiny_config_json("x");
    j["topology"] = {{"kind", "grid"}, {"rows", 2}, {"cols", 2}};
    const auto cfg = gsim::parse_config(j);
    REQUIRE_THROWS_AS(cfg.topology.build(cfg.problem.n), gsim::ConfigError);
  }
  SECTION("nonpositive step size is rejected") {
    auto j = tiny_config_json("x");
    j["runs"][0]["step"]["gamma0"] = -0.2;
    REQUIRE_THROWS_AS(gsim::parse_config(j), gsim::ConfigError);
  }
  SECTION("common initial vector") {
    auto j = tiny_config_json("x");
    j["runs"][0]["x0"] = {0.5, -0.25, 0.0, 1.0};
    const auto cfg = gsim::parse_config(j);
    REQUIRE(cfg.runs[0].config.x0.size() == 4);
    REQUIRE(cfg.runs[0].config.x0(1) == -0.25);
  }
}

TEST_CASE("trial seed derivation") {
  std::set<std::uint64_t> seen;
  for (long t = 0; t < 1000; ++t)
    seen.insert(gsim::derive_trial_seed(123, t));
  REQUIRE(seen.size() == 1000);
  REQUIRE(gsim::derive_trial_seed(123, 5) == gsim::derive_trial_seed(123, 5));
  REQUIRE(gsim::derive_trial_seed(123, 5) != gsim::derive_trial_seed(124, 5));
}

TEST_CASE("parallel_for") {
  SECTION("covers every index exactly once") {
    std::vector<std::atomic<int>> hits(257);
    gsim::parallel_for(257, 4, [&](long i) { hits[i].fetch_add(1); });
    for (const auto& h : hits) REQUIRE(h.load() == 1);
  }
  SECTION("propagates the first exception") {
    REQUIRE_THROWS_AS(gsim::parallel_for(16, 4,
                                         [&](long i) {
                                           if (i == 7)
                                             throw std::runtime_error("boom");
                                         }),
                      std::runtime_error);
  }
}

TEST_CASE("experiment execution end to end") {
  const fs::path dir1 = fs::temp_directory_path() / "gsim_exp1";
  const fs::path dir2 = fs::temp_directory_path() / "gsim_exp2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  std::ostringstream sink;

  auto cfg1 = gsim::parse_config(tiny_config_json(dir1.string()));
  REQUIRE(gsim::run_experiment(cfg1, sink) == 0);
  REQUIRE(fs::exists(dir1 / "parallel_trajectories.csv"));
  REQUIRE(fs::exists(dir1 / "parallel_ensemble.csv"));
  REQUIRE(fs::exists(dir1 / "pga_trajectories.csv"));
  REQUIRE(fs::exists(dir1 / "aga_ensemble.csv"));
  REQUIRE(fs::exists(dir1 / "summary.csv"));

  SECTION("identical config runs twice to byte-identical outputs") {
    auto cfg2 = gsim::parse_config(tiny_config_json(dir2.string()));
    cfg2.max_parallel = 2;  // scheduling must not affect the bytes
    REQUIRE(gsim::run_experiment(cfg2, sink) == 0);
    for (const char* f :
         {"parallel_trajectories.csv", "parallel_ensemble.csv",
          "pga_trajectories.csv", "pga_ensemble.csv", "aga_trajectories.csv",
          "aga_ensemble.csv", "summary.csv"}) {
      REQUIRE(slurp(dir1 / f) == slurp(dir2 / f));
    }
  }

  SECTION("trajectory CSV row count matches trials x grid") {
    std::ifstream in(dir1 / "parallel_trajectories.csv");
    std::string line;
    long rows = -1;  // header
    while (std::getline(in, line)) ++rows;
    REQUIRE(rows == 3 * (40 / 5 + 1));
  }

  SECTION("summary lists transient detection against the reference") {
    const std::string summary = slurp(dir1 / "summary.csv");
    REQUIRE(summary.find("run,variant,topology,n,H,trials,diverged,"
                         "transient_iter") == 0);
    REQUIRE(summary.find("pga,gossip_pga,ring,6,4,3,0,") != std::string::npos);
  }

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("single-trial parallel run: two CSVs, 11 logged rows") {
  const fs::path dir = fs::temp_directory_path() / "gsim_exp_single";
  fs::remove_all(dir);
  const json j{
      {"name", "single"},
      {"seed", 4},
      {"problem",
       {{"n", 4}, {"M", 20}, {"d", 3}, {"heterogeneity", "iid"}, {"seed", 4}}},
      {"topology", {{"kind", "fully_connected"}}},
      {"trials", 1},
      {"log_interval", 1},
      {"output_dir", dir.string()},
      {"runs", json::array({{{"name", "parallel"},
                             {"variant", "parallel"},
                             {"T", 10},
                             {"step", {{"kind", "constant"},
                                       {"gamma0", 0.05}}}}})}};
  std::ostringstream sink;
  REQUIRE(gsim::run_experiment(gsim::parse_config(j), sink) == 0);
  std::ifstream in(dir / "parallel_trajectories.csv");
  std::string line;
  long rows = -1;
  while (std::getline(in, line)) ++rows;
  REQUIRE(rows == 11);  // iterations 0..10
  REQUIRE(fs::exists(dir / "parallel_ensemble.csv"));
  fs::remove_all(dir);
}

TEST_CASE("theory table emission") {
  const fs::path path = fs::temp_directory_path() / "gsim_tables.csv";
  gsim::TableSpec spec;
  gsim::emit_theory_tables(spec, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  REQUIRE(header ==
          "family,topology_model,scenario,theta_exponent,alpha_exponent");
  long rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  REQUIRE(rows == 8);

  spec.families.clear();
  gsim::emit_theory_tables(spec, path);
  std::ifstream in2(path);
  std::getline(in2, header);
  REQUIRE(header ==
          "family,topology_model,scenario,theta_exponent,alpha_exponent");
  REQUIRE_FALSE(std::getline(in2, line));  // header-only
  fs::remove(path);
}

TEST_CASE("verify suites pass on a fresh build") {
  for (auto* suite : {&gsim::verify_topology, &gsim::verify_theory}) {
    for (const auto& c : suite()) {
      INFO(c.name << " " << c.detail);
      REQUIRE(c.pass);
    }
  }
  for (const auto& c : gsim::verify_gradients()) {
    INFO(c.name << " " << c.detail);
    REQUIRE(c.pass);
  }
  for (const auto& c : gsim::verify_reductions()) {
    INFO(c.name << " " << c.detail);
    REQUIRE(c.pass);
  }
}

TEST_CASE("verify report writer") {
  std::ostringstream out;
  const fs::path path = fs::temp_directory_path() / "gsim_verify.json";
  const int rc = gsim::write_verify_report(
      {{"alpha", true, ""}, {"beta", false, "row 0 sum != 1"}}, path, out);
  REQUIRE(rc == 1);
  REQUIRE(out.str().find("[PASS] alpha") != std::string::npos);
  REQUIRE(out.str().find("[FAIL] beta") != std::string::npos);
  std::ifstream in(path);
  json j;
  in >> j;
  REQUIRE(j.size() == 2);
  REQUIRE(j[1]["pass"] == false);
  REQUIRE(j[1]["detail"] == "row 0 sum != 1");
  fs::remove(path);
}
