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

// Synthetic experiments with a known linear outcome model
//
//   Y_i^a = h^a(x_i) + eta_ia,   h^a(x) = intercept_a + beta_a . x,
//
// uniform random assignment, and the full potential-outcome matrix kept in a
// separate SealedOutcomes object. Estimation and policy fitting only ever see
// the ExperimentDataset; the sealed matrix is reserved for oracle evaluation.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hetgain/dataset.hpp"
#include "hetgain/errors.hpp"
#include "hetgain/rng.hpp"

namespace hetgain {

struct CovariateSpec {
  enum class Kind { kNormal, kBernoulli };
  std::string name;
  Kind kind = Kind::kNormal;
  double mean = 0.0;  // normal
  double sd = 1.0;    // normal
  double q = 0.5;     // bernoulli success probability

  double expectation() const { return kind == Kind::kNormal ? mean : q; }
  double variance() const { return kind == Kind::kNormal ? sd * sd : q * (1.0 - q); }
};

enum class OutcomeKind {
  kGaussian,        // Y = h + eta
  kBernoulliLatent  // Y ~ Bernoulli(clamp(h + eta, 0, 1))
};

struct SynthDGP {
  std::vector<std::string> arm_names;
  std::vector<CovariateSpec> covariates;
  std::vector<double> intercepts;  // m
  Eigen::MatrixXd beta;            // m x p
  double noise_sd = 0.0;
  OutcomeKind outcome_kind = OutcomeKind::kGaussian;

  int arms() const { return static_cast<int>(intercepts.size()); }
  std::size_t covariate_count() const { return covariates.size(); }
};

inline void validate(const SynthDGP& dgp) {
  const int m = dgp.arms();
  if (m < 1) throw ConfigError("DGP needs at least one arm");
  if (dgp.covariates.empty()) throw ConfigError("DGP needs at least one covariate (p = 0)");
  if (static_cast<int>(dgp.arm_names.size()) != m) throw ConfigError("arm_names length must equal intercepts length");
  if (dgp.beta.rows() != m || dgp.beta.cols() != static_cast<Eigen::Index>(dgp.covariates.size())) {
    throw ConfigError("beta must be m x p = " + std::to_string(m) + " x " + std::to_string(dgp.covariates.size()));
  }
  if (!dgp.beta.allFinite()) throw ConfigError("beta must be finite");
  if (!(dgp.noise_sd >= 0.0) || !std::isfinite(dgp.noise_sd)) throw ConfigError("noise_sd must be finite and >= 0");
  for (const auto& c : dgp.covariates) {
    if (c.kind == CovariateSpec::Kind::kNormal && !(c.sd >= 0.0)) throw ConfigError("covariate sd must be >= 0");
    if (c.kind == CovariateSpec::Kind::kBernoulli && !(c.q >= 0.0 && c.q <= 1.0)) {
      throw ConfigError("covariate q must lie in [0, 1]");
    }
  }
}

/// Population moments of h implied by a DGP (covariates are independent).
struct GroundTruth {
  std::vector<double> arm_means;   // E h^a
  std::vector<double> arm_sigmas;  // SD h^a
  double sigma = 0.0;              // mean of arm_sigmas
  Eigen::MatrixXd rho;             // corr(h^a, h^b); 0 where an SD is 0
  double rho_mean = 0.0;           // mean over a < b
  double s = 0.0;                  // SD of arm_means, denominator m - 1
};

inline GroundTruth ground_truth(const SynthDGP& dgp) {
  validate(dgp);
  const int m = dgp.arms();
  const auto p = static_cast<Eigen::Index>(dgp.covariate_count());
  Eigen::VectorXd ex(p), var(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    ex[j] = dgp.covariates[static_cast<std::size_t>(j)].expectation();
    var[j] = dgp.covariates[static_cast<std::size_t>(j)].variance();
  }
  const Eigen::MatrixXd cov = dgp.beta * var.asDiagonal() * dgp.beta.transpose();

  GroundTruth t;
  t.rho = Eigen::MatrixXd::Identity(m, m);
  for (int a = 0; a < m; ++a) {
    t.arm_means.push_back(dgp.intercepts[static_cast<std::size_t>(a)] + dgp.beta.row(a).dot(ex));
    t.arm_sigmas.push_back(std::sqrt(cov(a, a)));
  }
  double rho_sum = 0.0;
  for (int a = 0; a < m; ++a) {
    for (int b = a + 1; b < m; ++b) {
      const double denom = t.arm_sigmas[static_cast<std::size_t>(a)] * t.arm_sigmas[static_cast<std::size_t>(b)];
      const double r = denom > 0.0 ? cov(a, b) / denom : 0.0;
      t.rho(a, b) = t.rho(b, a) = r;
      rho_sum += r;
    }
  }
  for (double s : t.arm_sigmas) t.sigma += s;
  t.sigma /= m;
  t.rho_mean = m > 1 ? rho_sum / (m * (m - 1) / 2.0) : 1.0;
  if (m > 1) {
    double mean = 0.0;
    for (double x : t.arm_means) mean += x;
    mean /= m;
    double ss = 0.0;
    for (double x : t.arm_means) ss += (x - mean) * (x - mean);
    t.s = std::sqrt(ss / (m - 1));
  }
  return t;
}

/// m-arm DGP with p = m + 1 standard-normal covariates x0 (shared) and
/// x1..xm (one per arm):
///
///   h^a(x) = intercept_a + sigma (sqrt(rho) x0 + sqrt(1 - rho) x_{a+1}),
///
/// so Var h^a = sigma^2 and corr(h^a, h^b) = rho exactly. Requires rho >= 0.
inline SynthDGP one_factor_dgp(int m, double sigma, double rho, std::vector<double> intercepts, double noise_sd) {
  if (m < 2) throw ConfigError("one-factor DGP needs m >= 2");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("one-factor DGP needs rho in [0, 1]");
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
  if (static_cast<int>(intercepts.size()) != m) throw ConfigError("intercepts must have length m");
  SynthDGP dgp;
  for (int a = 0; a < m; ++a) dgp.arm_names.push_back("arm" + std::to_string(a));
  for (int j = 0; j <= m; ++j) dgp.covariates.push_back({"x" + std::to_string(j), CovariateSpec::Kind::kNormal, 0.0, 1.0, 0.5});
  dgp.intercepts = std::move(intercepts);
  dgp.beta = Eigen::MatrixXd::Zero(m, m + 1);
  for (int a = 0; a < m; ++a) {
    dgp.beta(a, 0) = sigma * std::sqrt(rho);
    dgp.beta(a, a + 1) = sigma * std::sqrt(1.0 - rho);
  }
  dgp.noise_sd = noise_sd;
  return dgp;
}

/// Full potential outcomes of a synthetic sample, keyed by unit.
class SealedOutcomes {
 public:
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  SealedOutcomes() = default;
  SealedOutcomes(DatasetSchema schema, std::vector<std::string> unit_ids, Matrix covariates, Matrix outcomes)
      : schema_(std::move(schema)),
        unit_ids_(std::move(unit_ids)),
        covariates_(std::move(covariates)),
        outcomes_(std::move(outcomes)) {
    const auto n = static_cast<Eigen::Index>(unit_ids_.size());
    if (covariates_.rows() != n || outcomes_.rows() != n ||
        outcomes_.cols() != static_cast<Eigen::Index>(schema_.arms()) ||
        covariates_.cols() != static_cast<Eigen::Index>(schema_.covariate_count())) {
      throw ConfigError("sealed outcome matrix shape does not match schema");
    }
  }

  bool empty() const { return unit_ids_.empty(); }
  std::size_t size() const { return unit_ids_.size(); }
  int arms() const { return schema_.arms(); }
  const DatasetSchema& schema() const { return schema_; }
  const std::string& unit_id(std::size_t i) const { return unit_ids_[i]; }
  std::span<const double> covariates(std::size_t i) const {
    return {covariates_.row(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(covariates_.cols())};
  }
  double outcome(std::size_t i, int arm) const { return outcomes_(static_cast<Eigen::Index>(i), arm); }
  const Matrix& outcome_matrix() const { return outcomes_; }

  SealedOutcomes subset(std::span<const std::size_t> rows) const {
    std::vector<std::string> ids;
    Matrix x(static_cast<Eigen::Index>(rows.size()), covariates_.cols());
    Matrix y(static_cast<Eigen::Index>(rows.size()), outcomes_.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      ids.push_back(unit_ids_[rows[k]]);
      x.row(static_cast<Eigen::Index>(k)) = covariates_.row(static_cast<Eigen::Index>(rows[k]));
      y.row(static_cast<Eigen::Index>(k)) = outcomes_.row(static_cast<Eigen::Index>(rows[k]));
    }
    return {schema_, std::move(ids), std::move(x), std::move(y)};
  }

 private:
  DatasetSchema schema_;
  std::vector<std::string> unit_ids_;
  Matrix covariates_;
  Matrix outcomes_;
};

struct SyntheticData {
  ExperimentDataset dataset;
  SealedOutcomes sealed;
  GroundTruth truth;
};

inline std::string synthetic_unit_id(std::size_t i, std::size_t n) {
  std::string digits = std::to_string(i);
  const std::size_t width = std::max<std::size_t>(6, std::to_string(n > 0 ? n - 1 : 0).size());
  return "u" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

inline DatasetSchema schema_of(const SynthDGP& dgp) {
  DatasetSchema schema;
  schema.arm_names = dgp.arm_names;
  for (const auto& c : dgp.covariates) {
    schema.covariates.push_back(
        {c.name, c.kind == CovariateSpec::Kind::kBernoulli ? CovariateKind::kBinary : CovariateKind::kContinuous});
  }
  return schema;
}

/// Uniform random assignment of the sealed units (propensity 1/m). Covariates
/// and potential outcomes stay fixed; only the observed arm changes with seed.
inline ExperimentDataset assign_uniformly(const SealedOutcomes& sealed, std::uint64_t seed) {
  const int m = sealed.arms();
  Rng rng(seed, {0x61737369676eULL});
  ExperimentDataset data(sealed.schema());
  data.reserve(sealed.size());
  const double e = 1.0 / m;
  for (std::size_t i = 0; i < sealed.size(); ++i) {
    const int arm = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
    data.add_row(sealed.unit_id(i), sealed.covariates(i), arm, sealed.outcome(i, arm), e);
  }
  return data;
}

/// Draws n units from the DGP. Covariates, noise and assignment come from
/// separate streams of \p seed.
inline SyntheticData generate_synthetic(const SynthDGP& dgp, std::size_t n, std::uint64_t seed) {
  validate(dgp);
  if (n == 0) throw ConfigError("n must be positive");
  const int m = dgp.arms();
  const auto p = static_cast<Eigen::Index>(dgp.covariate_count());

  Rng cov_rng(seed, {0x636f76ULL});
  Rng noise_rng(seed, {0x6e6f697365ULL});
  SealedOutcomes::Matrix x(static_cast<Eigen::Index>(n), p);
  SealedOutcomes::Matrix y(static_cast<Eigen::Index>(n), m);
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto& c = dgp.covariates[static_cast<std::size_t>(j)];
      x(r, j) = c.kind == CovariateSpec::Kind::kNormal ? c.mean + c.sd * cov_rng.normal()
                                                       : (cov_rng.bernoulli(c.q) ? 1.0 : 0.0);
    }
    for (int a = 0; a < m; ++a) {
      double h = dgp.intercepts[static_cast<std::size_t>(a)];
      for (Eigen::Index j = 0; j < p; ++j) h += dgp.beta(a, j) * x(r, j);
      const double latent = h + dgp.noise_sd * noise_rng.normal();
      if (dgp.outcome_kind == OutcomeKind::kGaussian) {
        y(r, a) = latent;
      } else {
        y(r, a) = noise_rng.bernoulli(std::clamp(latent, 0.0, 1.0)) ? 1.0 : 0.0;
      }
    }
    ids.push_back(synthetic_unit_id(i, n));
  }

  SyntheticData out;
  out.sealed = SealedOutcomes(schema_of(dgp), std::move(ids), std::move(x), std::move(y));
  out.dataset = assign_uniformly(out.sealed, seed);
  out.truth = ground_truth(dgp);
  return out;
}

/// Covariate-explained part h^a(x) for every unit and arm (n x m); used by
/// tests to check the ground-truth moments empirically.
inline Eigen::MatrixXd explained_outcomes(const SynthDGP& dgp, const SealedOutcomes& sealed) {
  Eigen::MatrixXd h(static_cast<Eigen::Index>(sealed.size()), dgp.arms());
  for (std::size_t i = 0; i < sealed.size(); ++i) {
    const auto x = sealed.covariates(i);
    for (int a = 0; a < dgp.arms(); ++a) {
      double v = dgp.intercepts[static_cast<std::size_t>(a)];
      for (std::size_t j = 0; j < x.size(); ++j) v += dgp.beta(a, static_cast<Eigen::Index>(j)) * x[j];
      h(static_cast<Eigen::Index>(i), a) = v;
    }
  }
  return h;
}

}  // namespace hetgain
