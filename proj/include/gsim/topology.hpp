#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

// Network topologies and their doubly stochastic mixing matrices.
//
// Every static topology carries its dense weight matrix W and the spectral
// quantity beta = ||W - (1/n) 11^T||_2. The time-varying one-peer schedule
// exposes per-iteration matrices instead and has no single beta.

namespace gsim {

struct InvalidTopologyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnsupportedTopologyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidPeriodError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class TopologyKind {
  ring,
  grid,
  static_exponential,
  one_peer_exponential,
  fully_connected,
  identity
};

inline const char* to_string(TopologyKind k) {
  switch (k) {
    case TopologyKind::ring: return "ring";
    case TopologyKind::grid: return "grid";
    case TopologyKind::static_exponential: return "static_exponential";
    case TopologyKind::one_peer_exponential: return "one_peer_exponential";
    case TopologyKind::fully_connected: return "fully_connected";
    case TopologyKind::identity: return "identity";
  }
  return "?";
}

// Spectral norm of W - (1/n) 11^T, computed from the Gram matrix so it also
// covers the non-symmetric circulant exponential graphs.
inline double spectral_deviation(const Eigen::MatrixXd& w) {
  const auto n = w.rows();
  Eigen::MatrixXd dev =
      w - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dev.transpose() * dev);
  double lam = es.eigenvalues().maxCoeff();
  return lam <= 0.0 ? 0.0 : std::sqrt(lam);
}

inline bool is_doubly_stochastic(const Eigen::MatrixXd& w, double tol = 1e-12,
                                 std::string* why = nullptr) {
  const auto n = w.rows();
  if (w.cols() != n) {
    if (why) *why = "not square";
    return false;
  }
  if ((w.array() < 0.0).any()) {
    if (why) *why = "negative entry";
    return false;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(w.row(i).sum() - 1.0) > tol) {
      if (why) *why = "row " + std::to_string(i) + " sum != 1";
      return false;
    }
    if (std::abs(w.col(i).sum() - 1.0) > tol) {
      if (why) *why = "column " + std::to_string(i) + " sum != 1";
      return false;
    }
  }
  return true;
}

class Topology {
 public:
  static Topology ring(int n) {
    if (n < 3) throw InvalidTopologyError("ring requires n >= 3");
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      w(i, i) += 1.0 / 3.0;
      w(i, (i + 1) % n) += 1.0 / 3.0;
      w(i, (i + n - 1) % n) += 1.0 / 3.0;
    }
    return Topology(TopologyKind::ring, n, std::move(w), 3);
  }

  // Metropolis-Hastings weights over the non-wrapping 2-d grid: interior
  // nodes have |N_i| = 5 (self plus up/down/left/right).
  static Topology grid(int rows, int cols) {
    if (rows < 1 || cols < 1 || rows * cols < 2)
      throw InvalidTopologyError("grid requires rows*cols >= 2");
    const int n = rows * cols;
    auto id = [cols](int r, int c) { return r * cols + c; };
    std::vector<std::vector<int>> nbrs(n);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const int dr[] = {1, -1, 0, 0}, dc[] = {0, 0, 1, -1};
        for (int q = 0; q < 4; ++q) {
          int rr = r + dr[q], cc = c + dc[q];
          if (rr >= 0 && rr < rows && cc >= 0 && cc < cols)
            nbrs[id(r, c)].push_back(id(rr, cc));
        }
      }
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    int max_deg = 0;
    for (int i = 0; i < n; ++i) {
      double off = 0.0;
      const int deg_i = static_cast<int>(nbrs[i].size()) + 1;
      max_deg = std::max(max_deg, deg_i);
      for (int j : nbrs[i]) {
        const int deg_j = static_cast<int>(nbrs[j].size()) + 1;
        w(i, j) = 1.0 / std::max(deg_i, deg_j);
        off += w(i, j);
      }
      w(i, i) = 1.0 - off;
    }
    return Topology(TopologyKind::grid, n, std::move(w), max_deg);
  }

  // Node i links to (i + 2^j) mod n, j = 0..ceil(log2 n)-1, uniform weights
  // over N_i (self included). Circulant, hence doubly stochastic, but not
  // symmetric in general.
  static Topology static_exponential(int n) {
    if (n < 2) throw InvalidTopologyError("static_exponential requires n >= 2");
    const int hops = static_cast<int>(std::ceil(std::log2(double(n))));
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    int degree = 0;
    for (int i = 0; i < n; ++i) {
      std::vector<int> nb = {i};
      for (int j = 0; j < hops; ++j) {
        int peer = static_cast<int>((i + (1ll << j)) % n);
        if (std::find(nb.begin(), nb.end(), peer) == nb.end())
          nb.push_back(peer);
      }
      degree = std::max(degree, static_cast<int>(nb.size()));
      for (int peer : nb) w(i, peer) = 1.0 / static_cast<double>(nb.size());
    }
    return Topology(TopologyKind::static_exponential, n, std::move(w), degree);
  }

  // Time-varying schedule: at iteration k node i averages with
  // (i + 2^(k mod log2 n)) mod n, both weights 1/2. Restricted to powers of
  // two so each per-iteration matrix is doubly stochastic.
  static Topology one_peer_exponential(int n) {
    if (n < 2 || (n & (n - 1)) != 0)
      throw UnsupportedTopologyError(
          "one_peer_exponential requires a power-of-two node count");
    int log2n = 0;
    while ((1 << log2n) < n) ++log2n;
    Topology t(TopologyKind::one_peer_exponential, n, Eigen::MatrixXd(), 2);
    t.schedule_period_ = std::max(log2n, 1);
    t.schedule_.reserve(t.schedule_period_);
    for (int j = 0; j < t.schedule_period_; ++j) {
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        w(i, i) = 0.5;
        w(i, static_cast<int>((i + (1ll << j)) % n)) = 0.5;
      }
      t.schedule_.push_back(std::move(w));
    }
    return t;
  }

  static Topology fully_connected(int n) {
    if (n < 1) throw InvalidTopologyError("fully_connected requires n >= 1");
    return Topology(TopologyKind::fully_connected, n,
                    Eigen::MatrixXd::Constant(n, n, 1.0 / double(n)), n);
  }

  static Topology identity(int n) {
    if (n < 1) throw InvalidTopologyError("identity requires n >= 1");
    return Topology(TopologyKind::identity, n, Eigen::MatrixXd::Identity(n, n),
                    1);
  }

  int size() const { return n_; }
  TopologyKind kind() const { return kind_; }
  bool time_varying() const {
    return kind_ == TopologyKind::one_peer_exponential;
  }

  const Eigen::MatrixXd& weights() const {
    if (time_varying())
      throw UnsupportedTopologyError(
          "time-varying topology has no single weight matrix");
    return weights_;
  }

  const Eigen::MatrixXd& weights_at(long k) const {
    if (!time_varying()) return weights_;
    return schedule_[static_cast<std::size_t>(k % schedule_period_)];
  }

  // Length of the weight schedule (log2 n for one-peer, 1 for static kinds).
  int schedule_period() const { return schedule_period_; }

  // Largest neighborhood size |N_i| including the node itself; drives the
  // gossip term of the communication-time model.
  int comm_degree() const { return degree_; }

  double beta() const {
    if (time_varying())
      throw UnsupportedTopologyError(
          "beta is undefined for the time-varying one-peer schedule");
    return beta_;
  }

  std::string name() const {
    return std::string(to_string(kind_)) + "_n" + std::to_string(n_);
  }

 private:
  Topology(TopologyKind kind, int n, Eigen::MatrixXd w, int degree)
      : kind_(kind), n_(n), degree_(degree), weights_(std::move(w)) {
    if (weights_.size() > 0) beta_ = spectral_deviation(weights_);
  }

  TopologyKind kind_;
  int n_;
  int degree_;
  int schedule_period_ = 1;
  double beta_ = 0.0;
  Eigen::MatrixXd weights_;
  std::vector<Eigen::MatrixXd> schedule_;
};

struct MixingConstants {
  double beta;
  double c_beta;  // sum_{k=0}^{H-1} beta^k
  double d_beta;  // min{H, 1/(1-beta)}
  double period;
};

// Exact evaluation of C_beta and D_beta. C_beta is clamped by its algebraic
// upper bound H so the inequality C_beta <= D_beta survives rounding when
// beta -> 1.
inline MixingConstants mixing_constants(double beta, double period) {
  if (period < 1.0) throw InvalidPeriodError("period must be >= 1");
  if (beta < 0.0 || beta > 1.0)
    throw std::invalid_argument("beta must lie in [0, 1]");
  MixingConstants mc{};
  mc.beta = beta;
  mc.period = period;
  if (beta >= 1.0) {
    mc.c_beta = period;
    mc.d_beta = period;
  } else {
    mc.c_beta = std::min((1.0 - std::pow(beta, period)) / (1.0 - beta), period);
    mc.d_beta = std::min(period, 1.0 / (1.0 - beta));
  }
  return mc;
}

}  // namespace gsim
