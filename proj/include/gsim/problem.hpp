#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsim/rng.hpp"

// Synthetic distributed logistic regression: n nodes, M samples each,
// feature dimension d. Features are N(0, 10 I_d); labels are drawn from the
// logistic model of a planted unit-norm parameter vector (shared across
// nodes in the iid scenario, independent per node otherwise).

namespace gsim {

enum class Heterogeneity { iid, non_iid };

inline const char* to_string(Heterogeneity h) {
  return h == Heterogeneity::iid ? "iid" : "non_iid";
}

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow.
inline double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

class LogisticProblem {
 public:
  static LogisticProblem generate(int n, int m, int d, Heterogeneity het,
                                  std::uint64_t seed) {
    if (n < 1 || m < 1 || d < 1)
      throw std::invalid_argument("generate: n, M, d must be >= 1");
    LogisticProblem p;
    p.n_ = n;
    p.m_ = m;
    p.d_ = d;
    p.het_ = het;
    p.seed_ = seed;
    p.planted_.resize(n);

    Rng planted_rng = Rng::stream(seed, 0xA11CE);
    Eigen::VectorXd shared(d);
    if (het == Heterogeneity::iid) {
      for (int j = 0; j < d; ++j) shared(j) = planted_rng.normal();
      shared.normalize();
    }
    for (int i = 0; i < n; ++i) {
      if (het == Heterogeneity::iid) {
        p.planted_[i] = shared;
      } else {
        Eigen::VectorXd v(d);
        for (int j = 0; j < d; ++j) v(j) = planted_rng.normal();
        v.normalize();
        p.planted_[i] = v;
      }
    }

    const double feature_std = std::sqrt(10.0);
    p.features_.resize(n);
    p.labels_.resize(n);
    for (int i = 0; i < n; ++i) {
      Rng rng = Rng::stream(seed, 0xDA7A, static_cast<std::uint64_t>(i));
      Eigen::MatrixXd h(m, d);
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < d; ++c) h(r, c) = feature_std * rng.normal();
      Eigen::VectorXd y(m);
      for (int r = 0; r < m; ++r) {
        const double u = rng.uniform01();
        y(r) = (u <= sigmoid(h.row(r).dot(p.planted_[i]))) ? 1.0 : -1.0;
      }
      p.features_[i] = std::move(h);
      p.labels_[i] = std::move(y);
    }
    return p;
  }

  // n copies of node 0's dataset: the identical-local-objectives scenario
  // (f_i = f for every i), under which consensus is never broken.
  static LogisticProblem replicate(const LogisticProblem& src, int n) {
    LogisticProblem p;
    p.n_ = n;
    p.m_ = src.m_;
    p.d_ = src.d_;
    p.het_ = Heterogeneity::iid;
    p.seed_ = src.seed_;
    p.features_.assign(n, src.features_.at(0));
    p.labels_.assign(n, src.labels_.at(0));
    p.planted_.assign(n, src.planted_.at(0));
    return p;
  }

  int nodes() const { return n_; }
  int samples_per_node() const { return m_; }
  int dim() const { return d_; }
  Heterogeneity heterogeneity() const { return het_; }
  std::uint64_t seed() const { return seed_; }
  const Eigen::MatrixXd& features(int i) const { return features_.at(i); }
  const Eigen::VectorXd& labels(int i) const { return labels_.at(i); }
  const Eigen::VectorXd& planted_params(int i) const { return planted_.at(i); }

  // f_i(x) = (1/M) sum_m log(1 + exp(-y_m h_m^T x))
  double local_loss(int i, const Eigen::VectorXd& x) const {
    const Eigen::VectorXd margins =
        labels_[i].cwiseProduct(features_[i] * x);
    double s = 0.0;
    for (int r = 0; r < m_; ++r) s += softplus(-margins(r));
    return s / m_;
  }

  Eigen::VectorXd local_grad(int i, const Eigen::VectorXd& x) const {
    const Eigen::VectorXd margins =
        labels_[i].cwiseProduct(features_[i] * x);
    Eigen::VectorXd coef(m_);
    for (int r = 0; r < m_; ++r) coef(r) = -labels_[i](r) * sigmoid(-margins(r));
    return (features_[i].transpose() * coef) / m_;
  }

  // Mean gradient over batch indices drawn uniformly with replacement.
  // When loss_out is non-null the mini-batch loss at x (same indices) is
  // also reported, as the Gossip-AGA period rule needs it.
  Eigen::VectorXd stochastic_grad(int i, const Eigen::VectorXd& x, int batch,
                                  Rng& rng, double* loss_out = nullptr) const {
    if (batch < 1) throw std::invalid_argument("batch_size must be >= 1");
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d_);
    double loss = 0.0;
    for (int b = 0; b < batch; ++b) {
      const auto r = rng.index(static_cast<std::size_t>(m_));
      const double y = labels_[i](static_cast<Eigen::Index>(r));
      const double margin = y * features_[i].row(static_cast<Eigen::Index>(r)).dot(x);
      g -= (y * sigmoid(-margin)) * features_[i].row(static_cast<Eigen::Index>(r)).transpose();
      if (loss_out) loss += softplus(-margin);
    }
    g /= batch;
    if (loss_out) *loss_out = loss / batch;
    return g;
  }

  // f(x) = (1/n) sum_i f_i(x)
  double global_loss(const Eigen::VectorXd& x) const {
    double s = 0.0;
    for (int i = 0; i < n_; ++i) s += local_loss(i, x);
    return s / n_;
  }

  Eigen::VectorXd global_grad(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d_);
    for (int i = 0; i < n_; ++i) g += local_grad(i, x);
    return g / n_;
  }

  // CSV bundle: one file per node (d feature columns then the label), plus
  // meta.csv. The plotting/cross-implementation interface.
  void export_csv(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    {
      std::ofstream meta(dir / "meta.csv");
      meta << "n,M,d,heterogeneity,seed\n";
      meta << n_ << "," << m_ << "," << d_ << "," << to_string(het_) << ","
           << seed_ << "\n";
    }
    char buf[32];
    for (int i = 0; i < n_; ++i) {
      std::snprintf(buf, sizeof(buf), "node_%04d.csv", i);
      std::ofstream out(dir / buf);
      for (int r = 0; r < m_; ++r) {
        for (int c = 0; c < d_; ++c) {
          char num[40];
          std::snprintf(num, sizeof(num), "%.17g", features_[i](r, c));
          out << num << ",";
        }
        out << (labels_[i](r) > 0 ? 1 : -1) << "\n";
      }
    }
  }

  static LogisticProblem import_csv(const std::filesystem::path& dir) {
    LogisticProblem p;
    {
      std::ifstream meta(dir / "meta.csv");
      if (!meta) throw std::runtime_error("missing meta.csv in " + dir.string());
      std::string header, row;
      std::getline(meta, header);
      std::getline(meta, row);
      std::stringstream ss(row);
      std::string field;
      std::getline(ss, field, ',');
      p.n_ = std::stoi(field);
      std::getline(ss, field, ',');
      p.m_ = std::stoi(field);
      std::getline(ss, field, ',');
      p.d_ = std::stoi(field);
      std::getline(ss, field, ',');
      p.het_ = field == "iid" ? Heterogeneity::iid : Heterogeneity::non_iid;
      std::getline(ss, field, ',');
      p.seed_ = std::stoull(field);
    }
    p.features_.resize(p.n_);
    p.labels_.resize(p.n_);
    p.planted_.assign(p.n_, Eigen::VectorXd());  // unknown after import
    char buf[32];
    for (int i = 0; i < p.n_; ++i) {
      std::snprintf(buf, sizeof(buf), "node_%04d.csv", i);
      std::ifstream in(dir / buf);
      if (!in) throw std::runtime_error("missing node file in " + dir.string());
      Eigen::MatrixXd h(p.m_, p.d_);
      Eigen::VectorXd y(p.m_);
      std::string line;
      for (int r = 0; r < p.m_; ++r) {
        std::getline(in, line);
        std::stringstream ss(line);
        std::string field;
        for (int c = 0; c < p.d_; ++c) {
          std::getline(ss, field, ',');
          h(r, c) = std::stod(field);
        }
        std::getline(ss, field, ',');
        y(r) = std::stod(field);
      }
      p.features_[i] = std::move(h);
      p.labels_[i] = std::move(y);
    }
    return p;
  }

 private:
  int n_ = 0, m_ = 0, d_ = 0;
  Heterogeneity het_ = Heterogeneity::non_iid;
  std::uint64_t seed_ = 0;
  std::vector<Eigen::MatrixXd> features_;
  std::vector<Eigen::VectorXd> labels_;
  std::vector<Eigen::VectorXd> planted_;
};

struct ReferenceSolution {
  Eigen::VectorXd x_star;
  double f_star = 0.0;
  double grad_norm = 0.0;
  long iterations = 0;
  bool converged = false;
};

// Full-batch gradient descent with Armijo backtracking (halving) on the
// global objective until ||grad f|| <= tol. Deterministic. Separable data
// has no finite minimizer; the solver then reports converged = false with
// the best iterate found.
inline ReferenceSolution solve_reference(const LogisticProblem& p,
                                         double tol = 1e-10,
                                         long max_iters = 100000) {
  ReferenceSolution out;
  // Trial step 1/L from the logistic Hessian bound L = max_i ||H_i||^2/(4M):
  // with step <= 1/L the gradient norm decreases monotonically, so progress
  // continues even once Armijo comparisons saturate at machine precision.
  double l_bound = 0.0;
  for (int i = 0; i < p.nodes(); ++i) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        p.features(i).transpose() * p.features(i));
    l_bound = std::max(l_bound, es.eigenvalues().maxCoeff() /
                                    (4.0 * p.samples_per_node()));
  }
  const double step0 = l_bound > 0.0 ? 1.0 / l_bound : 1.0;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(p.dim());
  double f = p.global_loss(x);
  Eigen::VectorXd g = p.global_grad(x);
  long k = 0;
  for (; k < max_iters; ++k) {
    const double gnorm2 = g.squaredNorm();
    if (std::sqrt(gnorm2) <= tol) {
      out.converged = true;
      break;
    }
    // Once the sufficient-decrease term drops below the resolution of f,
    // Armijo comparisons are meaningless; the fixed spectral step still
    // descends (smoothness) and keeps contracting the gradient.
    const double decrease = 1e-4 * step0 * gnorm2;
    if (decrease > 1e-12 * std::max(std::abs(f), 1e-300)) {
      double step = step0;
      Eigen::VectorXd x_try = x - step * g;
      double f_try = p.global_loss(x_try);
      while (f_try > f - 1e-4 * step * gnorm2 && step > 1e-20 * step0) {
        step *= 0.5;
        x_try = x - step * g;
        f_try = p.global_loss(x_try);
      }
      if (f_try > f) break;  // strictly uphill: flat to machine precision
      x = std::move(x_try);
      f = f_try;
    } else {
      Eigen::VectorXd x_next = x - step0 * g;
      if (x_next == x) break;  // no representable progress left
      x = std::move(x_next);
    }
    g = p.global_grad(x);
  }
  out.x_star = x;
  out.f_star = p.global_loss(x);
  out.grad_norm = g.norm();
  out.iterations = k;
  if (!out.converged) out.converged = out.grad_norm <= tol;
  return out;
}

struct ProblemConstants {
  Eigen::VectorXd x_star;
  double f_star = 0.0;
  double smoothness = 0.0;      // L
  double sigma2 = 0.0;          // single-sample gradient variance at x*
  double b2 = 0.0;              // (1/n) sum_i ||grad f_i(x*)||^2
  double b_hat2 = 0.0;          // probe-set lower bound for Assumption-5 sup
  // The certificates below these constants are approximations: sigma2 is
  // evaluated at x* only and b_hat2 is a lower bound on a supremum.
  bool sigma2_at_optimum = true;
  bool b_hat2_lower_bound = true;
};

// L  = max_i ||H_i||_2^2 / (4M)   (logistic Hessian bound)
// sigma2 = max_i exact variance of a single uniformly drawn sample gradient
//          at x* (enumerated over all M samples, no Monte Carlo error)
// b_hat2 = max over probes {x*, 0, +-unit directions} of
//          (1/n) sum_i ||grad f_i(x) - grad f(x)||^2
inline ProblemConstants estimate_constants(const LogisticProblem& p,
                                           const ReferenceSolution& ref,
                                           int probe_directions = 16,
                                           std::uint64_t probe_seed = 7) {
  ProblemConstants c;
  c.x_star = ref.x_star;
  c.f_star = ref.f_star;

  const int n = p.nodes(), m = p.samples_per_node(), d = p.dim();
  for (int i = 0; i < n; ++i) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        p.features(i).transpose() * p.features(i));
    c.smoothness =
        std::max(c.smoothness, es.eigenvalues().maxCoeff() / (4.0 * m));
  }

  // b2 is measured relative to the global gradient at the numerical optimum,
  // which is 0 at the exact minimizer: this projects out the solver residual
  // and makes b2 exactly zero for a single node.
  const Eigen::VectorXd residual = p.global_grad(ref.x_star);
  double b2 = 0.0;
  double sigma2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd mean_grad = p.local_grad(i, ref.x_star);
    b2 += (mean_grad - residual).squaredNorm();
    const Eigen::VectorXd margins =
        p.labels(i).cwiseProduct(p.features(i) * ref.x_star);
    double var = 0.0;
    for (int r = 0; r < m; ++r) {
      const Eigen::VectorXd g =
          (-p.labels(i)(r) * sigmoid(-margins(r))) *
          p.features(i).row(r).transpose();
      var += (g - mean_grad).squaredNorm();
    }
    sigma2 = std::max(sigma2, var / m);
  }
  c.b2 = b2 / n;
  c.sigma2 = sigma2;

  std::vector<Eigen::VectorXd> probes = {ref.x_star,
                                         Eigen::VectorXd::Zero(d)};
  Rng rng(probe_seed);
  for (int q = 0; q < probe_directions; ++q) {
    Eigen::VectorXd v(d);
    for (int j = 0; j < d; ++j) v(j) = rng.normal();
    v.normalize();
    probes.push_back(v);
    probes.push_back(-v);
  }
  for (const auto& x : probes) {
    const Eigen::VectorXd gbar = p.global_grad(x);
    double dev = 0.0;
    for (int i = 0; i < n; ++i)
      dev += (p.local_grad(i, x) - gbar).squaredNorm();
    c.b_hat2 = std::max(c.b_hat2, dev / n);
  }
  return c;
}

}  // namespace gsim
