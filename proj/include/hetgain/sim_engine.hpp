// Copyright 2026 The hetgain Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// Monte Carlo gain from personalization for m >= 2 arms.
//
// Each replication draws arm means mu from F, then n individuals with
// potential outcomes Y_i ~ N(mu, sigma^2 [(1 - rho) I + rho J]). Estimated
// outcomes are Yhat = Y + eps with eps ~ N(0, sigma_eps^2). The personalized
// value is the mean of Y_i at argmax_a Yhat_i^a; the uniform value is the mean
// of Y at argmax_a mean_i Yhat_i^a. With sigma_eps = 0 this is the
// perfect-information simulation; otherwise prediction error degrades the
// personalized choice.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "hetgain/errors.hpp"
#include "hetgain/parallel.hpp"
#include "hetgain/rng.hpp"

namespace hetgain {

// ---------------------------------------------------------------------------
// Distribution of average arm responses.

struct FixedMeans {
  std::vector<double> mu;
};

struct NormalMeans {
  double grand_mean = 0.0;
  double s = 0.0;
};

/// mu_T = M with probability pi_spike, otherwise N(M, s^2). Variance (1 - pi) s^2.
struct SpikeSlabMeans {
  double pi_spike = 0.0;
  double grand_mean = 0.0;
  double s = 0.0;
};

using AvgResponseDist = std::variant<FixedMeans, NormalMeans, SpikeSlabMeans>;

/// Spike-and-slab whose total variance (1 - pi) s^2 equals \p variance.
inline SpikeSlabMeans spike_slab_with_variance(double pi_spike, double grand_mean, double variance) {
  if (!(pi_spike >= 0.0 && pi_spike < 1.0)) throw ConfigError("pi_spike must lie in [0, 1)");
  if (!(variance >= 0.0)) throw ConfigError("variance must be >= 0");
  return {pi_spike, grand_mean, std::sqrt(variance / (1.0 - pi_spike))};
}

/// Population variance of a single mu_T draw. For Fixed, the variance of the
/// stored vector (denominator m).
inline double variance(const AvgResponseDist& dist) {
  struct Visitor {
    double operator()(const FixedMeans& f) const {
      if (f.mu.empty()) return 0.0;
      double mean = 0.0;
      for (double x : f.mu) mean += x;
      mean /= static_cast<double>(f.mu.size());
      double ss = 0.0;
      for (double x : f.mu) ss += (x - mean) * (x - mean);
      return ss / static_cast<double>(f.mu.size());
    }
    double operator()(const NormalMeans& n) const { return n.s * n.s; }
    double operator()(const SpikeSlabMeans& p) const { return (1.0 - p.pi_spike) * p.s * p.s; }
  };
  return std::visit(Visitor{}, dist);
}

inline void validate(const AvgResponseDist& dist, int m) {
  struct Visitor {
    int m;
    void operator()(const FixedMeans& f) const {
      if (f.mu.size() != static_cast<std::size_t>(m)) {
        throw ConfigError("fixed mean vector has length " + std::to_string(f.mu.size()) +
                          " but m = " + std::to_string(m));
      }
      for (double x : f.mu) {
        if (!std::isfinite(x)) throw ConfigError("fixed mean vector must be finite");
      }
    }
    void operator()(const NormalMeans& n) const {
      if (!std::isfinite(n.grand_mean) || !(n.s >= 0.0) || !std::isfinite(n.s)) {
        throw ConfigError("normal means need finite M and s >= 0");
      }
    }
    void operator()(const SpikeSlabMeans& p) const {
      if (!std::isfinite(p.grand_mean) || !(p.s >= 0.0) || !std::isfinite(p.s)) {
        throw ConfigError("spike-and-slab means need finite M and s >= 0");
      }
      if (!(p.pi_spike >= 0.0 && p.pi_spike <= 1.0)) throw ConfigError("pi_spike must lie in [0, 1]");
    }
  };
  std::visit(Visitor{m}, dist);
}

/// Draws the m-vector of arm means. Normal and spike-and-slab consume one
/// uniform and one normal per arm regardless of the branch taken, so changing
/// pi or s keeps the stream aligned (common random numbers).
inline std::vector<double> sample_mu(const AvgResponseDist& dist, int m, Rng& rng) {
  if (m < 2) throw ConfigError("m must be >= 2, got " + std::to_string(m));
  validate(dist, m);
  std::vector<double> mu(static_cast<std::size_t>(m));
  if (const auto* f = std::get_if<FixedMeans>(&dist)) {
    mu = f->mu;
  } else if (const auto* n = std::get_if<NormalMeans>(&dist)) {
    for (double& x : mu) x = n->grand_mean + n->s * rng.normal();
  } else {
    const auto& p = std::get<SpikeSlabMeans>(dist);
    for (double& x : mu) {
      const double u = rng.uniform();
      const double z = rng.normal();
      x = u < p.pi_spike ? p.grand_mean : p.grand_mean + p.s * z;
    }
  }
  return mu;
}

// ---------------------------------------------------------------------------
// Equicorrelated potential outcomes.

/// Smallest admissible rho for m arms: the equicorrelation matrix is PSD iff
/// rho >= -1/(m-1). A 1e-9 margin keeps the Cholesky factor well defined.
inline double rho_lower_bound(int m) { return -1.0 / static_cast<double>(m - 1) + 1e-9; }

inline void check_rho(double rho, int m) {
  if (!std::isfinite(rho) || rho > 1.0 || rho < rho_lower_bound(m)) {
    std::ostringstream os;
    os.precision(17);
    os << "rho = " << rho << " is outside [-1/(m-1) + 1e-9, 1] = [" << rho_lower_bound(m)
       << ", 1] for m = " << m << "; the covariance sigma^2[(1-rho)I + rho J] is not PSD";
    throw ConfigError(os.str());
  }
}

/// Row sampler for N(mu, sigma^2 [(1 - rho) I + rho J]).
///
/// rho >= 0 uses the one-factor form Y = mu + sigma (sqrt(rho) z + sqrt(1-rho) e)
/// with scalar z and e in R^m: m + 1 normals and O(m) work per row. rho < 0
/// uses the Cholesky factor of the covariance (m normals, O(m^2) per row).
class EquicorrelatedSampler {
 public:
  EquicorrelatedSampler(std::span<const double> mu, double sigma, double rho)
      : mu_(mu.begin(), mu.end()) {
    const int m = static_cast<int>(mu_.size());
    if (m < 2) throw ConfigError("m must be >= 2");
    if (!std::isfinite(sigma) || sigma < 0.0) throw ConfigError("sigma must be finite and >= 0");
    check_rho(rho, m);
    if (sigma == 0.0) {
      mode_ = Mode::kDegenerate;
    } else if (rho >= 0.0) {
      mode_ = Mode::kOneFactor;
      common_ = sigma * std::sqrt(rho);
      idio_ = sigma * std::sqrt(1.0 - rho);
    } else {
      mode_ = Mode::kCholesky;
      Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(m, m, rho * sigma * sigma);
      cov.diagonal().setConstant(sigma * sigma);
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() != Eigen::Success) {
        throw ConfigError("covariance not positive definite; rho must exceed -1/(m-1)");
      }
      chol_ = llt.matrixL();
      scratch_.resize(m);
    }
  }

  int arms() const { return static_cast<int>(mu_.size()); }

  void draw(Rng& rng, std::span<double> row) {
    const std::size_t m = mu_.size();
    switch (mode_) {
      case Mode::kDegenerate:
        for (std::size_t j = 0; j < m; ++j) row[j] = mu_[j];
        break;
      case Mode::kOneFactor: {
        const double shared = common_ * rng.normal();
        for (std::size_t j = 0; j < m; ++j) row[j] = mu_[j] + shared + idio_ * rng.normal();
        break;
      }
      case Mode::kCholesky:
        for (std::size_t j = 0; j < m; ++j) scratch_[static_cast<Eigen::Index>(j)] = rng.normal();
        for (std::size_t j = 0; j < m; ++j) {
          double acc = 0.0;
          for (std::size_t k = 0; k <= j; ++k) {
            acc += chol_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) *
                   scratch_[static_cast<Eigen::Index>(k)];
          }
          row[j] = mu_[j] + acc;
        }
        break;
    }
  }

 private:
  enum class Mode { kDegenerate, kOneFactor, kCholesky };

  std::vector<double> mu_;
  Mode mode_ = Mode::kDegenerate;
  double common_ = 0.0;
  double idio_ = 0.0;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd scratch_;
};

/// n x m matrix whose rows are i.i.d. N(mu, Sigma).
inline Eigen::MatrixXd sample_potential_outcomes(std::span<const double> mu, double sigma, double rho,
                                                 std::size_t n, Rng& rng) {
  EquicorrelatedSampler sampler(mu, sigma, rho);
  const auto m = static_cast<Eigen::Index>(mu.size());
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> y(static_cast<Eigen::Index>(n), m);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    sampler.draw(rng, std::span<double>(y.row(i).data(), static_cast<std::size_t>(m)));
  }
  return y;
}

// ---------------------------------------------------------------------------
// Simulation.

/// How prediction error enters the estimated outcomes.
enum class NoiseMode {
  kPerCell,        // independent eps for every (individual, arm)
  kPerIndividual,  // one eps_i shared by all arms of individual i
};

struct SimConfig {
  int m = 2;
  std::size_t n_individuals = 10000;
  std::size_t n_replications = 200;
  double sigma = 1.0;
  double rho = 0.0;
  AvgResponseDist dist = NormalMeans{0.0, 0.0};
  double sigma_eps = 0.0;
  NoiseMode noise_mode = NoiseMode::kPerCell;
  std::uint64_t seed = 1;
};

inline void validate(const SimConfig& cfg) {
  if (cfg.m < 2) throw ConfigError("m must be >= 2, got " + std::to_string(cfg.m));
  if (cfg.n_individuals < 1) throw ConfigError("n_individuals must be >= 1");
  if (cfg.n_replications < 1) throw ConfigError("n_replications must be >= 1");
  if (!std::isfinite(cfg.sigma) || cfg.sigma < 0.0) throw ConfigError("sigma must be finite and >= 0");
  if (!std::isfinite(cfg.sigma_eps) || cfg.sigma_eps < 0.0) {
    throw ConfigError("sigma_eps must be finite and >= 0");
  }
  check_rho(cfg.rho, cfg.m);
  validate(cfg.dist, cfg.m);
}

struct SimResult {
  double gain_mean = 0.0;
  double gain_se = 0.0;
  double v_personalized_mean = 0.0;
  double v_uniform_mean = 0.0;
  std::vector<double> per_replication_gains;
};

namespace detail {

struct ReplicationValues {
  double v_personalized = 0.0;
  double v_uniform = 0.0;
};

// First index of the maximum, so ties go to the lowest arm.
inline std::size_t argmax(std::span<const double> xs) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < xs.size(); ++j) {
    if (xs[j] > xs[best]) best = j;
  }
  return best;
}

// Stream keys within one replication.
inline constexpr std::uint64_t kMeansStream = 0;
inline constexpr std::uint64_t kOutcomeStream = 1;
inline constexpr std::uint64_t kErrorStream = 2;

inline ReplicationValues run_replication(const SimConfig& cfg, std::uint64_t rep) {
  Rng mu_rng(cfg.seed, {rep, kMeansStream});
  Rng y_rng(cfg.seed, {rep, kOutcomeStream});
  Rng eps_rng(cfg.seed, {rep, kErrorStream});

  const std::vector<double> mu = sample_mu(cfg.dist, cfg.m, mu_rng);
  EquicorrelatedSampler sampler(mu, cfg.sigma, cfg.rho);

  const auto m = static_cast<std::size_t>(cfg.m);
  std::vector<double> row(m), est(m), sum_true(m, 0.0), sum_est(m, 0.0);
  double sum_personalized = 0.0;
  const bool noisy = cfg.sigma_eps > 0.0;

  for (std::size_t i = 0; i < cfg.n_individuals; ++i) {
    sampler.draw(y_rng, row);
    if (noisy) {
      if (cfg.noise_mode == NoiseMode::kPerCell) {
        for (std::size_t j = 0; j < m; ++j) est[j] = row[j] + cfg.sigma_eps * eps_rng.normal();
      } else {
        const double e = cfg.sigma_eps * eps_rng.normal();
        for (std::size_t j = 0; j < m; ++j) est[j] = row[j] + e;
      }
    } else {
      est = row;
    }
    sum_personalized += row[argmax(est)];
    for (std::size_t j = 0; j < m; ++j) {
      sum_true[j] += row[j];
      sum_est[j] += est[j];
    }
  }

  const double n = static_cast<double>(cfg.n_individuals);
  const std::size_t uniform_arm = argmax(sum_est);
  return {sum_personalized / n, sum_true[uniform_arm] / n};
}

}  // namespace detail

/// Runs cfg.n_replications independent replications and aggregates them.
/// Replication r draws from streams keyed by (seed, r), so the result is
/// bit-identical for every thread count. Replications are reduced in index
/// order.
inline SimResult simulate_gain(const SimConfig& cfg, unsigned threads = 0) {
  validate(cfg);
  const auto reps = parallel_map(cfg.n_replications, threads,
                                 [&](std::size_t r) { return detail::run_replication(cfg, r); });

  SimResult out;
  out.per_replication_gains.reserve(reps.size());
  double sum_p = 0.0, sum_u = 0.0, sum_g = 0.0;
  for (const auto& r : reps) {
    if (!std::isfinite(r.v_personalized) || !std::isfinite(r.v_uniform)) {
      throw InternalError("non-finite value in simulated replication");
    }
    const double g = r.v_personalized - r.v_uniform;
    out.per_replication_gains.push_back(g);
    sum_p += r.v_personalized;
    sum_u += r.v_uniform;
    sum_g += g;
  }
  const double count = static_cast<double>(reps.size());
  out.v_personalized_mean = sum_p / count;
  out.v_uniform_mean = sum_u / count;
  out.gain_mean = out.v_personalized_mean - out.v_uniform_mean;
  if (reps.size() > 1) {
    const double mean_g = sum_g / count;
    double ss = 0.0;
    for (double g : out.per_replication_gains) ss += (g - mean_g) * (g - mean_g);
    out.gain_se = std::sqrt(ss / (count - 1.0) / count);
  }
  return out;
}

struct SweepRow {
  int m = 0;
  double gain_mean = 0.0;
  double gain_se = 0.0;
  double v_personalized_mean = 0.0;
  double v_uniform_mean = 0.0;
};

/// Gain as a function of the number of arms. Every m reuses the template's
/// base seed: replication r of each run draws from the streams keyed by
/// (seed, r), which gives common random numbers across the curve.
inline std::vector<SweepRow> sweep_arms(const SimConfig& base, std::span<const int> m_values,
                                        unsigned threads = 0) {
  if (m_values.empty()) throw ConfigError("m_values must not be empty");
  for (int m : m_values) {
    SimConfig cfg = base;
    cfg.m = m;
    validate(cfg);
  }
  std::vector<SweepRow> rows;
  rows.reserve(m_values.size());
  for (int m : m_values) {
    SimConfig cfg = base;
    cfg.m = m;
    const SimResult r = simulate_gain(cfg, threads);
    rows.push_back({m, r.gain_mean, r.gain_se, r.v_personalized_mean, r.v_uniform_mean});
  }
  return rows;
}

}  // namespace hetgain
