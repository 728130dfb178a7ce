#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsim/metrics.hpp"
#include "gsim/problem.hpp"
#include "gsim/rng.hpp"
#include "gsim/theory.hpp"
#include "gsim/topology.hpp"

// One iteration of the simulator:
//   g_i   = stochastic gradient at x_i^(k)          (all nodes, synchronously)
//   x_i^(k+1/2) = x_i^(k) - gamma_k g_i
//   x^(k+1) = global average of x^(k+1/2)           every H-th iteration,
//           = one gossip step with W (or W_k)       otherwise.
//
// Parallel SGD is the H = 1 instance, Gossip SGD the H = infinity instance,
// Local SGD the W = I instance, and Gossip-AGA adapts H from sampled losses.
// All variants share the same mixing kernel, so the reductions hold
// bit-for-bit, not just approximately.

namespace gsim {

enum class Variant { parallel, gossip, local, gossip_pga, gossip_aga };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::parallel: return "parallel";
    case Variant::gossip: return "gossip";
    case Variant::local: return "local";
    case Variant::gossip_pga: return "gossip_pga";
    case Variant::gossip_aga: return "gossip_aga";
  }
  return "?";
}

constexpr long kInfinitePeriod = std::numeric_limits<long>::max();

struct StepSchedule {
  enum class Kind { constant, halving, analytic } kind = Kind::constant;
  double gamma0 = 0.1;
  long every = 1000;  // halving interval
  // analytic schedules are constants resolved by the caller from
  // theory::analytic_stepsize before the run starts.
  double resolved = std::numeric_limits<double>::quiet_NaN();
};

struct AgaConfig {
  long h_init = 4;
  long warmup_iters = 200;  // K_w
};

struct RunConfig {
  Variant variant = Variant::gossip_pga;
  long total_iters = 1000;       // T
  long period = kInfinitePeriod; // H (ignored by parallel/gossip)
  StepSchedule step;
  int batch_size = 1;
  bool full_batch = false;  // sigma = 0 mode: exact local gradients
  std::uint64_t seed = 0;
  AgaConfig aga;
  Eigen::VectorXd x0;  // common initial vector; empty means zeros
};

inline double step_size_at(const RunConfig& c, long k) {
  switch (c.step.kind) {
    case StepSchedule::Kind::constant:
      return c.step.gamma0;
    case StepSchedule::Kind::halving:
      return c.step.gamma0 * std::pow(0.5, static_cast<double>(k / c.step.every));
    case StepSchedule::Kind::analytic:
      if (std::isnan(c.step.resolved))
        throw std::logic_error("analytic step size was not resolved");
      return c.step.resolved;
  }
  throw std::logic_error("unknown step schedule");
}

// ceil((F0/F_ell)^(1/4) H0): the idealized increasing-period rule.
inline long theoretical_period_schedule(double f0, double f_ell, long h0) {
  if (f0 <= 0.0 || f_ell <= 0.0)
    throw std::domain_error("period schedule needs positive losses");
  if (h0 < 1) throw InvalidPeriodError("period must be >= 1");
  return static_cast<long>(
      std::ceil(std::pow(f0 / f_ell, 0.25) * static_cast<double>(h0)));
}

struct DivergenceError : std::runtime_error {
  explicit DivergenceError(long k)
      : std::runtime_error("non-finite parameters at iteration " +
                           std::to_string(k)),
        iteration(k) {}
  long iteration;
};

struct WorkerState {
  Eigen::MatrixXd x;        // n x d stacked parameters
  long iter = 0;            // k
  long period_counter = 0;  // C: gossip steps since the last global average
  long current_h = 1;       // active period (AGA mutates it)
  double f_init = 0.0;      // AGA warm-up loss running average
  Eigen::VectorXd avg_sum;  // sum of xbar^(j), j = 0..iter
};

// Period update of the adaptive variant. Called at global-average
// iterations only (the counter just reached current_h). During warm-up the
// loss average is folded in and the period stays at h_init; afterwards
// H <- ceil((F_init/F) H_init), floored at 1. Returns true when a
// non-positive loss had to be clamped.
inline bool aga_update(WorkerState& state, double mean_minibatch_loss,
                       const RunConfig& config) {
  bool clamped = false;
  double f = mean_minibatch_loss;
  if (f <= 0.0) {
    f = 1e-12;
    clamped = true;
  }
  if (state.iter < config.aga.warmup_iters) {
    state.f_init = 0.5 * (state.f_init + f);
    state.current_h = config.aga.h_init;
  } else {
    const double h = std::ceil(state.f_init / f *
                               static_cast<double>(config.aga.h_init));
    state.current_h = std::max(1l, static_cast<long>(h));
  }
  state.period_counter = 0;
  return clamped;
}

struct StepOutcome {
  bool synced = false;
  double gamma = 0.0;
  Eigen::VectorXd mean_grad;  // (1/n) sum_i g_i, for the mean recursion
  double mean_minibatch_loss = std::numeric_limits<double>::quiet_NaN();
  bool loss_clamped = false;
};

struct MetricsContext {
  double f_star = 0.0;  // subtracted from losses in gap metrics
  const CommModel* comm = nullptr;
  long log_interval = 10;
  bool track_gap_sum = false;     // per-iteration f(xbar) - f* accumulation
  bool track_gradsq_sum = false;  // per-iteration ||grad f(xbar)||^2
};

class Engine {
 public:
  // The problem is shared by reference (it can be large and outlives the
  // engine in the orchestrator); the topology is small and copied so that
  // engines stay valid independently of the caller's temporaries.
  Engine(const LogisticProblem& problem, Topology topology, RunConfig config)
      : problem_(problem),
        topology_(std::move(topology)),
        config_(std::move(config)) {
    if (topology_.size() != problem_.nodes())
      throw std::invalid_argument("topology size does not match problem");
    if (config_.total_iters < 1)
      throw std::invalid_argument("T must be >= 1");
    if (config_.batch_size < 1)
      throw std::invalid_argument("batch_size must be >= 1");
    const int n = problem_.nodes();
    avg_matrix_ = Eigen::MatrixXd::Constant(n, n, 1.0 / double(n));
    if (config_.variant == Variant::local)
      identity_ = Eigen::MatrixXd::Identity(n, n);
    if (needs_period() && config_.period < 1 &&
        config_.variant != Variant::gossip_aga)
      throw InvalidPeriodError("period must be >= 1 or infinite");
    if (config_.variant == Variant::gossip_aga && config_.aga.h_init < 1)
      throw InvalidPeriodError("H_init must be >= 1");
    reset();
  }

  void reset() {
    const int n = problem_.nodes(), d = problem_.dim();
    state_.x.setZero(n, d);
    if (config_.x0.size() > 0) {
      if (config_.x0.size() != d)
        throw std::invalid_argument("x0 dimension mismatch");
      state_.x.rowwise() = config_.x0.transpose();
    }
    state_.iter = 0;
    state_.period_counter = 0;
    state_.current_h = effective_initial_period();
    state_.f_init = 0.0;
    state_.avg_sum = state_.x.colwise().mean().transpose();
    grads_.resize(n, d);
    half_.resize(n, d);
    streams_.clear();
    streams_.reserve(n);
    for (int i = 0; i < n; ++i)
      streams_.push_back(
          Rng::stream(config_.seed, 0x6e0de, static_cast<std::uint64_t>(i)));
  }

  WorkerState& state() { return state_; }
  const WorkerState& state() const { return state_; }
  const RunConfig& config() const { return config_; }

  // Advance one iteration. Throws DivergenceError on non-finite parameters.
  StepOutcome step() {
    const int n = problem_.nodes();
    const long k = state_.iter;
    StepOutcome out;
    out.gamma = step_size_at(config_, k);

    const bool adaptive = config_.variant == Variant::gossip_aga;
    double loss_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd xi = state_.x.row(i).transpose();
      if (config_.full_batch) {
        grads_.row(i) = problem_.local_grad(i, xi).transpose();
        if (adaptive) loss_sum += problem_.local_loss(i, xi);
      } else {
        double loss = 0.0;
        grads_.row(i) =
            problem_
                .stochastic_grad(i, xi, config_.batch_size, streams_[i],
                                 adaptive ? &loss : nullptr)
                .transpose();
        loss_sum += loss;
      }
    }
    out.mean_grad = grads_.colwise().mean().transpose();

    half_ = state_.x - out.gamma * grads_;
    state_.period_counter += 1;
    if (state_.period_counter == state_.current_h) {
      state_.x.noalias() = avg_matrix_ * half_;
      out.synced = true;
      if (adaptive) {
        out.mean_minibatch_loss = loss_sum / n;
        out.loss_clamped = aga_update(state_, out.mean_minibatch_loss, config_);
      } else {
        state_.period_counter = 0;
      }
    } else {
      state_.x.noalias() = gossip_matrix(k) * half_;
    }
    if (!state_.x.allFinite()) throw DivergenceError(k);
    state_.iter = k + 1;
    state_.avg_sum += state_.x.colwise().mean().transpose();
    return out;
  }

  // Full run with metric recording. On divergence the trajectory collected
  // so far is returned with divergence_iter set.
  Trajectory run(const MetricsContext& ctx,
                 WorkerState* final_state = nullptr) {
    reset();
    Trajectory traj;
    fill_meta(traj.meta);
    if (ctx.track_gap_sum) traj.gap_sum = 0.0;
    if (ctx.track_gradsq_sum) traj.gradsq_sum = 0.0;
    traj.realized_h_max = state_.current_h == kInfinitePeriod
                              ? 0
                              : state_.current_h;

    Eigen::VectorXd xbar = state_.x.colwise().mean().transpose();
    double model_time = 0.0;
    accumulate_sums(traj, ctx, xbar, 0.0);
    log_record(traj, ctx, 0, xbar, 0.0, model_time);

    const long t_total = config_.total_iters;
    for (long k = 0; k < t_total; ++k) {
      StepOutcome out;
      try {
        out = step();
      } catch (const DivergenceError& e) {
        traj.divergence_iter = e.iteration;
        break;
      }
      const Eigen::VectorXd xbar_pred =
          xbar - out.gamma * out.mean_grad;
      xbar = state_.x.colwise().mean().transpose();
      const double drift = (xbar - xbar_pred).norm() /
                           std::max(1.0, xbar_pred.norm());
      traj.max_mean_drift_rel = std::max(traj.max_mean_drift_rel, drift);

      const double cons = consensus_sq(state_.x);
      if (out.synced) {
        const double scale = std::max(state_.x.squaredNorm(), 1e-300);
        traj.max_sync_consensus_rel =
            std::max(traj.max_sync_consensus_rel, cons / scale);
        if (config_.variant == Variant::gossip_aga) {
          traj.syncs.push_back(
              {k + 1, out.mean_minibatch_loss, state_.current_h});
          if (out.loss_clamped) ++traj.aga_loss_clamps;
        }
        traj.realized_h_max =
            std::max(traj.realized_h_max, state_.current_h);
      }
      model_time += comm_cost(ctx, out.synced);
      accumulate_sums(traj, ctx, xbar, cons);
      if ((k + 1) % ctx.log_interval == 0 || k + 1 == t_total)
        log_record(traj, ctx, k + 1, xbar, cons, model_time);
    }
    if (final_state) *final_state = state_;
    return traj;
  }

  // Flat CSV snapshot of the iteration state (checkpoint/restore surface).
  static void save_state_csv(const WorkerState& s,
                             const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "iter,period_counter,current_h,f_init,n,d\n";
    out << s.iter << ',' << s.period_counter << ',' << s.current_h << ','
        << fmt_double(s.f_init) << ',' << s.x.rows() << ',' << s.x.cols()
        << "\n";
    auto write_row = [&out](const auto& row) {
      for (Eigen::Index j = 0; j < row.size(); ++j) {
        if (j) out << ',';
        out << fmt_double(row(j));
      }
      out << '\n';
    };
    write_row(s.avg_sum);
    for (Eigen::Index i = 0; i < s.x.rows(); ++i) write_row(s.x.row(i));
  }

  static WorkerState load_state_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);  // header
    std::getline(in, line);
    WorkerState s;
    long n = 0, d = 0;
    {
      std::stringstream ss(line);
      std::string f;
      std::getline(ss, f, ',');
      s.iter = std::stol(f);
      std::getline(ss, f, ',');
      s.period_counter = std::stol(f);
      std::getline(ss, f, ',');
      s.current_h = std::stol(f);
      std::getline(ss, f, ',');
      s.f_init = std::stod(f);
      std::getline(ss, f, ',');
      n = std::stol(f);
      std::getline(ss, f, ',');
      d = std::stol(f);
    }
    auto read_row = [&in](Eigen::Index len) {
      std::string row;
      std::getline(in, row);
      std::stringstream ss(row);
      Eigen::VectorXd v(len);
      std::string f;
      for (Eigen::Index j = 0; j < len; ++j) {
        std::getline(ss, f, ',');
        v(j) = std::stod(f);
      }
      return v;
    };
    s.avg_sum = read_row(d);
    s.x.resize(n, d);
    for (long i = 0; i < n; ++i) s.x.row(i) = read_row(d).transpose();
    return s;
  }

 private:
  bool needs_period() const {
    return config_.variant == Variant::local ||
           config_.variant == Variant::gossip_pga;
  }

  long effective_initial_period() const {
    switch (config_.variant) {
      case Variant::parallel: return 1;
      case Variant::gossip: return kInfinitePeriod;
      case Variant::local:
      case Variant::gossip_pga: return config_.period;
      case Variant::gossip_aga: return config_.aga.h_init;
    }
    return kInfinitePeriod;
  }

  const Eigen::MatrixXd& gossip_matrix(long k) const {
    if (config_.variant == Variant::local) return identity_;
    return topology_.weights_at(k);
  }

  double comm_cost(const MetricsContext& ctx, bool synced) const {
    if (!ctx.comm) return 0.0;
    if (synced) return comm_time_per_iter(*ctx.comm, CommMethod::allreduce);
    if (config_.variant == Variant::local ||
        topology_.kind() == TopologyKind::identity)
      return 0.0;  // W = I moves no data
    return comm_time_per_iter(*ctx.comm, CommMethod::gossip);
  }

  void accumulate_sums(Trajectory& traj, const MetricsContext& ctx,
                       const Eigen::VectorXd& xbar, double cons) {
    traj.consensus_sum += cons;
    if (ctx.track_gap_sum)
      traj.gap_sum += problem_.global_loss(xbar) - ctx.f_star;
    if (ctx.track_gradsq_sum)
      traj.gradsq_sum += problem_.global_grad(xbar).squaredNorm();
  }

  void log_record(Trajectory& traj, const MetricsContext& ctx, long k,
                  const Eigen::VectorXd& xbar, double cons,
                  double model_time) {
    TrajectoryRecord r;
    r.iter = k;
    r.consensus_sq = cons;
    r.gap = problem_.global_loss(xbar) - ctx.f_star;
    const Eigen::VectorXd xhat = state_.avg_sum / double(k + 1);
    r.avg_gap = problem_.global_loss(xhat) - ctx.f_star;
    r.grad_sq = problem_.global_grad(xbar).squaredNorm();
    r.model_time = model_time;
    r.current_h = state_.current_h == kInfinitePeriod
                      ? std::numeric_limits<double>::infinity()
                      : static_cast<double>(state_.current_h);
    traj.records.push_back(r);
  }

  void fill_meta(RunMeta& m) const {
    m.variant = to_string(config_.variant);
    m.topology = topology_.name();
    m.n = problem_.nodes();
    m.total_iters = config_.total_iters;
    m.period = state_.current_h == kInfinitePeriod ? -1 : state_.current_h;
    m.seed = config_.seed;
  }

  const LogisticProblem& problem_;
  Topology topology_;
  RunConfig config_;
  WorkerState state_;
  Eigen::MatrixXd avg_matrix_;
  Eigen::MatrixXd identity_;
  Eigen::MatrixXd grads_, half_;
  std::vector<Rng> streams_;
};

inline Trajectory run(const LogisticProblem& problem, const Topology& topology,
                      const RunConfig& config, const MetricsContext& ctx = {},
                      WorkerState* final_state = nullptr) {
  Engine engine(problem, topology, config);
  return engine.run(ctx, final_state);
}

}  // namespace gsim
