#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsim/engine.hpp"
#include "gsim/problem.hpp"
#include "gsim/theory.hpp"
#include "gsim/topology.hpp"

// Experiment configuration files (JSON). Schema is documented in the README;
// recipes/ holds the shipped configs.

namespace gsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProblemSpec {
  int n = 1, samples = 1, dim = 1;
  Heterogeneity het = Heterogeneity::non_iid;
  std::uint64_t seed = 1;
};

struct TopologySpec {
  TopologyKind kind = TopologyKind::ring;
  int rows = 0, cols = 0;  // grid only

  Topology build(int n) const {
    switch (kind) {
      case TopologyKind::ring: return Topology::ring(n);
      case TopologyKind::grid: {
        if (rows * cols != n)
          throw ConfigError("grid rows*cols must equal problem n");
        return Topology::grid(rows, cols);
      }
      case TopologyKind::static_exponential:
        return Topology::static_exponential(n);
      case TopologyKind::one_peer_exponential:
        return Topology::one_peer_exponential(n);
      case TopologyKind::fully_connected:
        return Topology::fully_connected(n);
      case TopologyKind::identity: return Topology::identity(n);
    }
    throw ConfigError("unknown topology kind");
  }
};

struct DetectSpec {
  bool enabled = false;
  std::string reference;
  double rel_tol = 0.05;
  std::size_t window = 50;
};

struct RunSpec {
  std::string name;
  RunConfig config;
  std::optional<std::uint64_t> seed;  // default: derived from master seed
};

struct TableSpec {
  std::vector<Family> families = {Family::gossip, Family::gossip_pga};
  int dim = 10;
  int n_pow_min = 4, n_pow_max = 10;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t master_seed = 1;
  ProblemSpec problem;
  TopologySpec topology;
  std::optional<CommModel> comm;  // dim/n/degree filled at build time
  long trials = 1;
  long log_interval = 10;
  std::string output_dir = "out";
  DetectSpec detect;
  std::vector<RunSpec> runs;
  TableSpec tables;
  int max_parallel = 0;  // 0: hardware concurrency

  void validate() const {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (log_interval < 1) throw ConfigError("log_interval must be >= 1");
    if (detect.enabled) {
      bool found = false;
      for (const auto& r : runs)
        if (r.name == detect.reference) found = true;
      if (!found)
        throw ConfigError("transient detection reference run '" +
                          detect.reference + "' is not configured");
    }
  }
};

namespace detail {

inline TopologyKind topology_kind_from(const std::string& s) {
  if (s == "ring") return TopologyKind::ring;
  if (s == "grid") return TopologyKind::grid;
  if (s == "static_exponential") return TopologyKind::static_exponential;
  if (s == "one_peer_exponential") return TopologyKind::one_peer_exponential;
  if (s == "fully_connected") return TopologyKind::fully_connected;
  if (s == "identity") return TopologyKind::identity;
  throw ConfigError("unknown topology kind: " + s);
}

inline Variant variant_from(const std::string& s) {
  if (s == "parallel") return Variant::parallel;
  if (s == "gossip") return Variant::gossip;
  if (s == "local") return Variant::local;
  if (s == "gossip_pga") return Variant::gossip_pga;
  if (s == "gossip_aga") return Variant::gossip_aga;
  throw ConfigError("unknown variant: " + s);
}

inline Family family_from(const std::string& s) {
  if (s == "gossip") return Family::gossip;
  if (s == "gossip_pga" || s == "pga") return Family::gossip_pga;
  if (s == "local") return Family::local;
  throw ConfigError("unknown family: " + s);
}

inline StepSchedule step_from(const nlohmann::json& j) {
  StepSchedule s;
  const std::string kind = j.value("kind", "constant");
  if (kind == "constant") {
    s.kind = StepSchedule::Kind::constant;
    s.gamma0 = j.at("gamma0").get<double>();
  } else if (kind == "halving") {
    s.kind = StepSchedule::Kind::halving;
    s.gamma0 = j.at("gamma0").get<double>();
    s.every = j.at("every").get<long>();
    if (s.every < 1) throw ConfigError("halving interval must be >= 1");
  } else if (kind == "analytic") {
    s.kind = StepSchedule::Kind::analytic;
  } else {
    throw ConfigError("unknown step schedule: " + kind);
  }
  if (s.kind != StepSchedule::Kind::analytic && s.gamma0 <= 0.0)
    throw ConfigError("gamma0 must be positive");
  return s;
}

inline RunSpec run_from(const nlohmann::json& j, long default_t) {
  RunSpec r;
  r.name = j.at("name").get<std::string>();
  r.config.variant = variant_from(j.at("variant").get<std::string>());
  r.config.total_iters = j.value("T", default_t);
  if (j.contains("H")) r.config.period = j.at("H").get<long>();
  if (j.contains("step")) r.config.step = step_from(j.at("step"));
  r.config.batch_size = j.value("batch_size", 1);
  r.config.full_batch = j.value("full_batch", false);
  if (j.contains("aga")) {
    r.config.aga.h_init = j.at("aga").value("h_init", 4l);
    r.config.aga.warmup_iters = j.at("aga").value("warmup", 200l);
  }
  if (j.contains("x0")) {
    const auto& arr = j.at("x0");
    r.config.x0.resize(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i)
      r.config.x0(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  if (j.contains("seed")) r.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.name = j.value("name", std::string("experiment"));
  cfg.master_seed = j.value("seed", 1ull);
  if (j.contains("problem")) {
    const auto& p = j.at("problem");
    cfg.problem.n = p.at("n").get<int>();
    cfg.problem.samples = p.at("M").get<int>();
    cfg.problem.dim = p.at("d").get<int>();
    const std::string het = p.value("heterogeneity", "non_iid");
    if (het != "iid" && het != "non_iid")
      throw ConfigError("heterogeneity must be iid or non_iid");
    cfg.problem.het =
        het == "iid" ? Heterogeneity::iid : Heterogeneity::non_iid;
    cfg.problem.seed = p.value("seed", cfg.master_seed);
  }
  if (j.contains("topology")) {
    const auto& t = j.at("topology");
    cfg.topology.kind =
        detail::topology_kind_from(t.at("kind").get<std::string>());
    cfg.topology.rows = t.value("rows", 0);
    cfg.topology.cols = t.value("cols", 0);
  }
  if (j.contains("comm_model")) {
    CommModel m;
    m.alpha = j.at("comm_model").at("alpha").get<double>();
    m.theta = j.at("comm_model").at("theta").get<double>();
    cfg.comm = m;
  }
  cfg.trials = j.value("trials", 1l);
  cfg.log_interval = j.value("log_interval", 10l);
  cfg.output_dir = j.value("output_dir", std::string("out"));
  cfg.max_parallel = j.value("max_parallel", 0);
  if (j.contains("detect_transient")) {
    const auto& d = j.at("detect_transient");
    cfg.detect.enabled = true;
    cfg.detect.reference = d.at("reference").get<std::string>();
    cfg.detect.rel_tol = d.value("rel_tol", 0.05);
    cfg.detect.window = d.value("window", std::size_t{50});
  }
  const long default_t = j.value("T", 1000l);
  if (j.contains("runs"))
    for (const auto& r : j.at("runs"))
      cfg.runs.push_back(detail::run_from(r, default_t));
  if (j.contains("tables")) {
    const auto& t = j.at("tables");
    cfg.tables.dim = t.value("d", 10);
    cfg.tables.n_pow_min = t.value("n_pow_min", 4);
    cfg.tables.n_pow_max = t.value("n_pow_max", 10);
    if (t.contains("families")) {
      cfg.tables.families.clear();
      for (const auto& f : t.at("families"))
        cfg.tables.families.push_back(
            detail::family_from(f.get<std::string>()));
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " +
                      e.what());
  }
  return parse_config(j);
}

// Trial seeds are a pure function of (master seed, trial index) only: trial
// t of every run in an experiment uses the same seed. Runs therefore share
// random draws (common random numbers), which is what lets curve ratios
// between algorithm variants be compared at tight tolerances; no two trials
// share an RNG stream.
inline std::uint64_t derive_trial_seed(std::uint64_t master_seed, long trial) {
  return splitmix64(master_seed ^
                    splitmix64(static_cast<std::uint64_t>(trial) +
                               0x7261696cull));
}

}  // namespace gsim
