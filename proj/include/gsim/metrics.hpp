#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsim/topology.hpp"

// Per-iteration measurements, trial aggregation, and the empirical
// transient-stage detector. Trajectories are immutable once produced; all
// comparisons happen on the shared logging grid.

namespace gsim {

struct GridError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sum_i ||x_i - xbar||^2 for a stacked n x d parameter matrix.
inline double consensus_sq(const Eigen::MatrixXd& x) {
  const Eigen::RowVectorXd xbar = x.colwise().mean();
  return (x.rowwise() - xbar).squaredNorm();
}

struct TrajectoryRecord {
  long iter = 0;
  double consensus_sq = 0.0;
  double gap = 0.0;      // f(xbar^k) - f*
  double avg_gap = 0.0;  // f(xhat^k) - f*, the running-average metric
  double grad_sq = 0.0;  // ||grad f(xbar^k)||^2
  double model_time = 0.0;
  double current_h = 0.0;
};

struct SyncEvent {
  long iter = 0;        // iteration k+1 at which the global average ran
  double loss = 0.0;    // node-averaged mini-batch loss F (AGA only)
  long period_after = 0;
};

struct RunMeta {
  std::string run_name;
  std::string variant;
  std::string topology;
  int n = 0;
  long total_iters = 0;
  long period = 0;
  std::uint64_t seed = 0;
  long trial = 0;
};

struct Trajectory {
  RunMeta meta;
  std::vector<TrajectoryRecord> records;
  std::vector<SyncEvent> syncs;

  // Full-resolution accumulators over k = 0..T (every iteration, not just
  // the logging grid).
  double consensus_sum = 0.0;
  double gap_sum = std::numeric_limits<double>::quiet_NaN();
  double gradsq_sum = std::numeric_limits<double>::quiet_NaN();

  // Worst relative consensus residual at global-average iterations and
  // worst relative drift of the mean recursion xbar <- xbar - gamma/n sum g.
  double max_sync_consensus_rel = 0.0;
  double max_mean_drift_rel = 0.0;

  long realized_h_max = 0;
  long aga_loss_clamps = 0;
  long divergence_iter = -1;  // -1: completed

  bool diverged() const { return divergence_iter >= 0; }
};

struct MetricSeries {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct TrialEnsemble {
  std::vector<long> grid;  // logged iterations
  MetricSeries consensus_sq, gap, avg_gap, grad_sq, model_time, current_h;
  long trials = 0;
  double consensus_sum_mean = 0.0;
  double gap_sum_mean = std::numeric_limits<double>::quiet_NaN();
  double gradsq_sum_mean = std::numeric_limits<double>::quiet_NaN();
  long total_iters = 0;
};

// Pointwise mean and sample standard deviation (divisor trials-1) on the
// common logging grid. The mean is computed as baseline + mean deviation,
// so identical trajectories aggregate to any member exactly.
inline TrialEnsemble aggregate(const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty())
    throw std::invalid_argument("aggregate needs at least one trajectory");
  const auto& first = trajectories.front();
  TrialEnsemble ens;
  ens.trials = static_cast<long>(trajectories.size());
  ens.total_iters = first.meta.total_iters;
  ens.grid.reserve(first.records.size());
  for (const auto& r : first.records) ens.grid.push_back(r.iter);
  for (const auto& t : trajectories) {
    if (t.records.size() != ens.grid.size())
      throw GridError("trajectories disagree on logging grid size");
    for (std::size_t i = 0; i < t.records.size(); ++i)
      if (t.records[i].iter != ens.grid[i])
        throw GridError("trajectories disagree on logged iterations");
  }

  const std::size_t npts = ens.grid.size();
  auto series = [&](double TrajectoryRecord::* field) {
    MetricSeries s;
    s.mean.assign(npts, 0.0);
    s.stddev.assign(npts, 0.0);
    for (std::size_t i = 0; i < npts; ++i) {
      const double baseline = first.records[i].*field;
      double acc = 0.0;
      for (const auto& t : trajectories) acc += t.records[i].*field - baseline;
      s.mean[i] = baseline + acc / ens.trials;
      if (ens.trials > 1) {
        double sq = 0.0;
        for (const auto& t : trajectories) {
          const double dev = t.records[i].*field - s.mean[i];
          sq += dev * dev;
        }
        s.stddev[i] = std::sqrt(sq / (ens.trials - 1));
      }
    }
    return s;
  };
  ens.consensus_sq = series(&TrajectoryRecord::consensus_sq);
  ens.gap = series(&TrajectoryRecord::gap);
  ens.avg_gap = series(&TrajectoryRecord::avg_gap);
  ens.grad_sq = series(&TrajectoryRecord::grad_sq);
  ens.model_time = series(&TrajectoryRecord::model_time);
  ens.current_h = series(&TrajectoryRecord::current_h);

  double csum = 0.0, gsum = 0.0, gssum = 0.0;
  for (const auto& t : trajectories) {
    csum += t.consensus_sum;
    gsum += t.gap_sum;
    gssum += t.gradsq_sum;
  }
  ens.consensus_sum_mean = csum / ens.trials;
  ens.gap_sum_mean = gsum / ens.trials;
  ens.gradsq_sum_mean = gssum / ens.trials;
  return ens;
}

// Smallest logged iteration k0 such that the candidate mean gap stays within
// (1 + rel_tol) of the reference over the next `window` logged points. A full
// window of points must exist after k0 (otherwise a single matching point at
// the horizon edge would count as a detection); the window is clamped to the
// grid length so that identical curves always detect at the first iteration.
// Returns nullopt when the curves never match inside the horizon.
inline std::optional<long> detect_transient(const TrialEnsemble& candidate,
                                            const TrialEnsemble& reference,
                                            double rel_tol = 0.05,
                                            std::size_t window = 50) {
  if (candidate.grid != reference.grid)
    throw GridError("transient detection requires a shared logging grid");
  const std::size_t npts = candidate.grid.size();
  const std::size_t win = std::min(window, npts);
  for (std::size_t i = 0; i + win <= npts; ++i) {
    bool matched = true;
    for (std::size_t j = i; j < i + win; ++j) {
      if (candidate.gap.mean[j] > (1.0 + rel_tol) * reference.gap.mean[j]) {
        matched = false;
        break;
      }
    }
    if (matched) return candidate.grid[i];
  }
  return std::nullopt;
}

struct ConsensusInequalityReport {
  double lhs = 0.0;       // trial-mean of (1/(T+1)) sum_k consensus_sq
  double rhs = 0.0;       // (2 c2 D_beta/(T+1)) sum_k mean gap + 2 c3
  double c2 = 0.0;
  double c3 = 0.0;
  bool step_size_ok = false;  // gamma <= 1/(4 L beta D_beta)
  bool pass = false;
  long trials = 0;
};

// Running-consensus inequality
//   (1/(T+1)) sum_k E||x^k - xbar^k||_F^2
//     <= (2 c2 D_beta/(T+1)) sum_k (E f(xbar^k) - f*) + 2 c3
// with c2 = 12 n beta^2 D_beta gamma^2 L and
//      c3 = 2 n beta^2 gamma^2 C_beta (3 D_beta b^2 + sigma^2).
// Expectations are approximated by trial means; requires a constant step
// size and full-resolution sums on the ensemble.
inline ConsensusInequalityReport consensus_inequality_check(const TrialEnsemble& ens,
                                         double smoothness, double sigma2,
                                         double b2, double gamma, double period,
                                         double beta, int n,
                                         bool constant_step = true) {
  if (!constant_step)
    throw std::invalid_argument(
        "consensus inequality check requires a constant step size");
  if (std::isnan(ens.gap_sum_mean))
    throw std::invalid_argument(
        "ensemble lacks full-resolution gap sums (run with full sums on)");
  const MixingConstants mc = mixing_constants(beta, period);
  ConsensusInequalityReport rep;
  rep.trials = ens.trials;
  rep.c2 = 12.0 * n * beta * beta * mc.d_beta * gamma * gamma * smoothness;
  rep.c3 = 2.0 * n * beta * beta * gamma * gamma * mc.c_beta *
           (3.0 * mc.d_beta * b2 + sigma2);
  const double tp1 = static_cast<double>(ens.total_iters + 1);
  rep.lhs = ens.consensus_sum_mean / tp1;
  rep.rhs = 2.0 * rep.c2 * mc.d_beta * ens.gap_sum_mean / tp1 + 2.0 * rep.c3;
  const double cap = beta > 0.0
                         ? 1.0 / (4.0 * smoothness * beta * mc.d_beta)
                         : std::numeric_limits<double>::infinity();
  rep.step_size_ok = gamma <= cap;
  rep.pass = rep.lhs <= rep.rhs;
  return rep;
}

// ---------------------------------------------------------------------------
// CSV emission. One row per (trial, logged iteration) for raw trajectories;
// mean/std columns for ensembles. Doubles printed with %.17g so identical
// runs produce byte-identical files.

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_trajectories_csv(const std::filesystem::path& path,
                                   const std::vector<Trajectory>& trajectories) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "trial,iter,variant,topology,n,H,consensus_sq,gap,avg_gap,grad_sq,"
         "model_time,current_H\n";
  for (const auto& t : trajectories) {
    for (const auto& r : t.records) {
      out << t.meta.trial << ',' << r.iter << ',' << t.meta.variant << ','
          << t.meta.topology << ',' << t.meta.n << ',' << t.meta.period << ','
          << fmt_double(r.consensus_sq) << ',' << fmt_double(r.gap) << ','
          << fmt_double(r.avg_gap) << ',' << fmt_double(r.grad_sq) << ','
          << fmt_double(r.model_time) << ',' << fmt_double(r.current_h)
          << '\n';
    }
  }
}

inline void write_ensemble_csv(const std::filesystem::path& path,
                               const TrialEnsemble& ens) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "iter,consensus_sq_mean,consensus_sq_std,gap_mean,gap_std,"
         "avg_gap_mean,avg_gap_std,grad_sq_mean,grad_sq_std,"
         "model_time_mean,model_time_std,current_H_mean,current_H_std\n";
  for (std::size_t i = 0; i < ens.grid.size(); ++i) {
    out << ens.grid[i] << ',' << fmt_double(ens.consensus_sq.mean[i]) << ','
        << fmt_double(ens.consensus_sq.stddev[i]) << ','
        << fmt_double(ens.gap.mean[i]) << ',' << fmt_double(ens.gap.stddev[i])
        << ',' << fmt_double(ens.avg_gap.mean[i]) << ','
        << fmt_double(ens.avg_gap.stddev[i]) << ','
        << fmt_double(ens.grad_sq.mean[i]) << ','
        << fmt_double(ens.grad_sq.stddev[i]) << ','
        << fmt_double(ens.model_time.mean[i]) << ','
        << fmt_double(ens.model_time.stddev[i]) << ','
        << fmt_double(ens.current_h.mean[i]) << ','
        << fmt_double(ens.current_h.stddev[i]) << '\n';
  }
}

}  // namespace gsim
