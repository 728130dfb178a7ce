#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gsim/topology.hpp"

// Closed-form side of the analysis: the step-size rule, the explicit convex
// and non-convex bounds, transient-stage predictors for the three algorithm
// families, and the latency/bandwidth communication-time model.

namespace gsim {

struct BoundInputs {
  int n = 1;
  long total_iters = 1;  // T
  double period = 1.0;   // H
  double beta = 0.0;
  double smoothness = 0.0;  // L
  double sigma2 = 0.0;
  double b2 = 0.0;
  double b_hat2 = 0.0;
  // r0 convention: 2 E||xbar^0 - x*||^2 in convex mode,
  //                4 E f(xbar^0)       in non-convex mode.
  double r0 = 0.0;
  double gamma = 0.0;  // used by the non-convex bound only
};

inline void validate(const BoundInputs& in) {
  if (in.total_iters < 1) throw std::invalid_argument("T must be >= 1");
  if (in.beta < 0.0 || in.beta >= 1.0)
    throw std::invalid_argument("beta must lie in [0, 1)");
  if (in.period < 1.0) throw InvalidPeriodError("period must be >= 1");
  if (in.smoothness < 0.0 || in.sigma2 < 0.0 || in.b2 < 0.0 ||
      in.b_hat2 < 0.0 || in.r0 < 0.0)
    throw std::invalid_argument("bound inputs must be nonnegative");
}

enum class HeterogeneityConstant { b2, b_hat2 };

// r2 = 12 L beta^2 C_beta sigma^2 + 36 L beta^2 C_beta D_beta het^2,
// with het^2 = b^2 (convex) or bhat^2 (non-convex).
inline double r2_constant(const BoundInputs& in,
                          HeterogeneityConstant het = HeterogeneityConstant::b2) {
  const MixingConstants mc = mixing_constants(in.beta, in.period);
  const double het2 =
      het == HeterogeneityConstant::b2 ? in.b2 : in.b_hat2;
  const double b2cb = in.beta * in.beta * mc.c_beta;
  return 12.0 * in.smoothness * b2cb * in.sigma2 +
         36.0 * in.smoothness * b2cb * mc.d_beta * het2;
}

// gamma = min{ 1/(12 beta L D_beta), (r0/(r1 (T+1)))^(1/2),
//              (r0/(r2 (T+1)))^(1/3) };   r1 = 2 sigma^2 / n.
// Vanishing denominators make the corresponding candidate inactive.
inline double analytic_stepsize(
    const BoundInputs& in,
    HeterogeneityConstant het = HeterogeneityConstant::b2) {
  validate(in);
  const MixingConstants mc = mixing_constants(in.beta, in.period);
  const double inf = std::numeric_limits<double>::infinity();
  const double denom1 = 12.0 * in.beta * in.smoothness * mc.d_beta;
  const double c1 = denom1 > 0.0 ? 1.0 / denom1 : inf;
  const double r1 = 2.0 * in.sigma2 / in.n;
  const double tp1 = static_cast<double>(in.total_iters + 1);
  const double c2 = r1 > 0.0 ? std::sqrt(in.r0 / (r1 * tp1)) : inf;
  const double r2 = r2_constant(in, het);
  const double c3 = r2 > 0.0 ? std::cbrt(in.r0 / (r2 * tp1)) : inf;
  return std::min({c1, c2, c3});
}

// Explicit convex bound on E f(xhat^T) - f(x*) for the analytic step size:
//   12 r0 L D_beta beta / (T+1) + 2 (r0 r1/(T+1))^(1/2)
//   + 2 r2^(1/3) (r0/(T+1))^(2/3)
inline double convex_bound(const BoundInputs& in) {
  validate(in);
  const MixingConstants mc = mixing_constants(in.beta, in.period);
  const double tp1 = static_cast<double>(in.total_iters + 1);
  const double r1 = 2.0 * in.sigma2 / in.n;
  const double r2 = r2_constant(in, HeterogeneityConstant::b2);
  return 12.0 * in.r0 * in.smoothness * mc.d_beta * in.beta / tp1 +
         2.0 * std::sqrt(in.r0 * r1 / tp1) +
         2.0 * std::cbrt(r2) * std::pow(in.r0 / tp1, 2.0 / 3.0);
}

struct StepSizePreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Explicit non-convex bound on (1/(T+1)) sum_k E||grad f(xbar^k)||^2 for a
// constant step size gamma <= 1/(9 L H beta):
//   8 F0/((T+1) gamma) + 4 gamma L sigma^2/n
//   + 24 L^2 gamma^2 beta^2 C_beta sigma^2
//   + 72 L^2 gamma^2 beta^2 C_beta D_beta bhat^2      (F0 = r0/4)
inline double nonconvex_bound(const BoundInputs& in) {
  validate(in);
  if (in.gamma <= 0.0) throw std::invalid_argument("gamma must be positive");
  const double cap = in.beta > 0.0
                         ? 1.0 / (9.0 * in.smoothness * in.period * in.beta)
                         : std::numeric_limits<double>::infinity();
  if (in.gamma > cap)
    throw StepSizePreconditionError(
        "non-convex bound requires gamma <= 1/(9 L H beta)");
  const MixingConstants mc = mixing_constants(in.beta, in.period);
  const double tp1 = static_cast<double>(in.total_iters + 1);
  const double f0 = in.r0 / 4.0;
  const double l2g2b2 = in.smoothness * in.smoothness * in.gamma * in.gamma *
                        in.beta * in.beta;
  return 8.0 * f0 / (tp1 * in.gamma) +
         4.0 * in.gamma * in.smoothness * in.sigma2 / in.n +
         24.0 * l2g2b2 * mc.c_beta * in.sigma2 +
         72.0 * l2g2b2 * mc.c_beta * mc.d_beta * in.b_hat2;
}

// Time-varying periods bounded by H_max converge at the fixed-period rate
// with H replaced by H_max.
inline double time_varying_period_bound(BoundInputs in, double h_max) {
  in.period = h_max;
  return nonconvex_bound(in);
}

enum class Family { gossip, gossip_pga, local };
enum class Scenario { iid, non_iid };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::gossip: return "gossip";
    case Family::gossip_pga: return "gossip_pga";
    case Family::local: return "local";
  }
  return "?";
}

// Transient-stage predictors (order values, no hidden constants):
//   gossip:      iid n^3 b^4/(1-b)^2        non-iid n^3 b^4/(1-b)^4
//   gossip_pga:  iid n^3 b^4 C_b^2          non-iid n^3 b^4 C_b^2 D_b^2
//   local:       iid n^3 H^2                non-iid n^3 H^4
// All families share one evaluation tree so the predictor orderings hold
// exactly in floating point, not just algebraically.
inline double transient_predict(Family family, double n, double beta, double h,
                                Scenario scenario) {
  if (n < 1.0) throw std::invalid_argument("n must be >= 1");
  double beta_eff, c_eff, d_eff;
  switch (family) {
    case Family::gossip: {
      if (beta >= 1.0) return std::numeric_limits<double>::infinity();
      if (beta < 0.0) throw std::invalid_argument("beta must lie in [0, 1]");
      beta_eff = beta;
      c_eff = 1.0 / (1.0 - beta);
      d_eff = scenario == Scenario::non_iid ? 1.0 / (1.0 - beta) : 1.0;
      break;
    }
    case Family::gossip_pga: {
      const MixingConstants mc = mixing_constants(beta, h);
      beta_eff = beta;
      c_eff = mc.c_beta;
      d_eff = scenario == Scenario::non_iid ? mc.d_beta : 1.0;
      break;
    }
    case Family::local: {
      if (h < 1.0) throw InvalidPeriodError("period must be >= 1");
      beta_eff = 1.0;
      c_eff = h;
      d_eff = scenario == Scenario::non_iid ? h : 1.0;
      break;
    }
    default:
      throw std::invalid_argument("unknown family");
  }
  const double n3 = n * n * n;
  const double b4 = (beta_eff * beta_eff) * (beta_eff * beta_eff);
  return ((n3 * b4) * (c_eff * c_eff)) * (d_eff * d_eff);
}

struct CommModel {
  double alpha = 0.0;  // point-to-point latency, seconds
  double theta = 0.0;  // per-scalar transfer time, seconds
  int dim = 1;         // model dimension d
  int n = 1;           // node count
  int degree = 3;      // gossip neighborhood size |N_i| (3 ring, 5 grid)
};

enum class CommMethod { allreduce, gossip, pga_amortized, local_amortized };

// allreduce:       2 theta d + n alpha
// gossip:          |N_i| theta d + alpha
// pga_amortized:   |N_i| theta d + alpha + (2 theta d + n alpha)/H
// local_amortized: (2 theta d + n alpha)/H
inline double comm_time_per_iter(
    const CommModel& m, CommMethod method,
    double h = std::numeric_limits<double>::infinity()) {
  const double allreduce = 2.0 * m.theta * m.dim + m.n * m.alpha;
  const double gossip = m.degree * m.theta * m.dim + m.alpha;
  switch (method) {
    case CommMethod::allreduce: return allreduce;
    case CommMethod::gossip: return gossip;
    case CommMethod::pga_amortized: return gossip + allreduce / h;
    case CommMethod::local_amortized: return allreduce / h;
  }
  throw std::invalid_argument("unknown comm method");
}

// Total time = transient stage (iterations) x per-iteration communication
// cost of the matching method.
inline double transient_time(Family family, const CommModel& m, double n,
                             double beta, double h, Scenario scenario) {
  const double iters = transient_predict(family, n, beta, h, scenario);
  CommMethod method = CommMethod::gossip;
  if (family == Family::gossip_pga) method = CommMethod::pga_amortized;
  if (family == Family::local) method = CommMethod::local_amortized;
  return iters * comm_time_per_iter(m, method, h);
}

// Least-squares slope of log(y) against log(x).
inline double log_log_slope(const std::vector<double>& xs,
                            const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("slope fit needs >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace gsim
