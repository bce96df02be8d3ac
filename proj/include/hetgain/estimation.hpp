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

// Moment estimation from a randomized multi-arm experiment:
//
//  * s       - SD of the per-arm mean outcomes;
//  * sigma_e - SD of holdout residuals of a per-arm outcome model;
//  * sigma, rho - stratified estimator. Holdout units are binned into
//    prediction quantiles of each arm's model; bin means of the *observed*
//    outcomes of units assigned to that arm average away the idiosyncratic
//    noise, so their spread tracks Var h^a(x) rather than Var Y^a or the
//    (noise-inflated) Var of the predictions.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hetgain/dataset.hpp"
#include "hetgain/errors.hpp"
#include "hetgain/linear_model.hpp"

namespace hetgain {

/// Per-arm outcome model h^a(x).
class OutcomePredictor {
 public:
  virtual ~OutcomePredictor() = default;
  virtual int arms() const = 0;
  virtual double predict(int arm, std::span<const double> covariates) const = 0;
};

/// T-learner with one ordinary least-squares fit (with intercept) per arm,
/// each trained only on that arm's training rows.
class LinearTLearner final : public OutcomePredictor {
 public:
  explicit LinearTLearner(std::vector<Eigen::VectorXd> coefficients) : coef_(std::move(coefficients)) {}

  int arms() const override { return static_cast<int>(coef_.size()); }
  double predict(int arm, std::span<const double> covariates) const override {
    return predict_affine(coef_[static_cast<std::size_t>(arm)], covariates);
  }
  /// Intercept followed by one slope per covariate.
  const Eigen::VectorXd& coefficients(int arm) const { return coef_[static_cast<std::size_t>(arm)]; }

 private:
  std::vector<Eigen::VectorXd> coef_;
};

inline LinearTLearner fit_predictor(const ExperimentDataset& data, const TrainTestSplit& split) {
  const int m = data.arms();
  const std::size_t p = data.covariate_count();
  std::vector<std::vector<std::size_t>> rows(static_cast<std::size_t>(m));
  for (std::size_t i : split.train) rows[static_cast<std::size_t>(data.arm(i))].push_back(i);

  std::vector<Eigen::VectorXd> coef;
  for (int a = 0; a < m; ++a) {
    const auto& r = rows[static_cast<std::size_t>(a)];
    if (r.empty()) throw DomainError("fit_predictor: arm '" + data.arm_names()[static_cast<std::size_t>(a)] + "' has no training rows");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(p + 1));
    Eigen::VectorXd y(static_cast<Eigen::Index>(r.size()));
    for (std::size_t k = 0; k < r.size(); ++k) {
      const auto row = static_cast<Eigen::Index>(k);
      x(row, 0) = 1.0;
      const auto cov = data.covariates(r[k]);
      for (std::size_t j = 0; j < p; ++j) x(row, static_cast<Eigen::Index>(j + 1)) = cov[j];
      y[row] = data.outcome(r[k]);
    }
    coef.push_back(least_squares(x, y).coef);
  }
  return LinearTLearner(std::move(coef));
}

/// Sample SD (denominator m - 1) of the per-arm mean outcomes.
inline double estimate_s(const ExperimentDataset& data) {
  const int m = data.arms();
  if (m < 2) throw DomainError("estimate_s needs m >= 2");
  require_nonempty_arms(data, "estimate_s");
  const auto counts = data.arm_counts();
  std::vector<double> sums(static_cast<std::size_t>(m), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) sums[static_cast<std::size_t>(data.arm(i))] += data.outcome(i);
  double mean = 0.0;
  for (int a = 0; a < m; ++a) {
    sums[static_cast<std::size_t>(a)] /= static_cast<double>(counts[static_cast<std::size_t>(a)]);
    mean += sums[static_cast<std::size_t>(a)];
  }
  mean /= m;
  double ss = 0.0;
  for (double x : sums) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (m - 1));
}

/// SD (denominator n - 1) of holdout residuals y_i - h^{T_i}(x_i), pooled over arms.
inline double estimate_sigma_eps(const ExperimentDataset& data, const TrainTestSplit& split,
                                 const OutcomePredictor& predictor) {
  if (split.test.empty()) throw DomainError("estimate_sigma_eps: holdout is empty");
  double mean = 0.0, m2 = 0.0;
  std::size_t k = 0;
  for (std::size_t i : split.test) {
    const double r = data.outcome(i) - predictor.predict(data.arm(i), data.covariates(i));
    ++k;
    const double delta = r - mean;
    mean += delta / static_cast<double>(k);
    m2 += delta * (r - mean);
  }
  return k > 1 ? std::sqrt(m2 / static_cast<double>(k - 1)) : 0.0;
}

struct QuantileCell {
  std::size_t units = 0;     // holdout units in the bin (all arms)
  std::size_t assigned = 0;  // of which assigned to the scoring arm
  double mean_outcome = 0.0; // mean observed outcome of the assigned units
};

struct StratifiedEstimates {
  double sigma_hat = 0.0;               // mean of per_arm_sigma
  std::vector<double> per_arm_sigma;    // SD over bins of the bin means (denominator Q - 1)
  Eigen::MatrixXd rho_matrix;           // symmetric, unit diagonal
  double rho_mean = 0.0;                // mean over the m(m-1)/2 pairs
  std::vector<double> naive_sigma;      // SD of the holdout predictions, per arm
  std::vector<std::vector<QuantileCell>> cells;  // [arm][bin]
  std::vector<std::string> warnings;
};

inline constexpr std::size_t kMinCellWarning = 30;

namespace detail {

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

/// Stratified estimate of sigma and rho on the holdout.
///
/// For each arm a every holdout unit is scored with h^a and the units are
/// cut into n_quantiles equal-count bins (sizes differ by at most one; ties
/// broken by unit_id). Within a bin, the observed outcomes of the units that
/// were assigned to a are averaged. sigma_a is the SD of these bin means. For
/// rho each unit carries, for every arm, the bin mean of its bin; rho^{ab} is
/// the Pearson correlation of those values across units.
inline StratifiedEstimates estimate_sigma_rho(const ExperimentDataset& data, const TrainTestSplit& split,
                                              const OutcomePredictor& predictor, std::size_t n_quantiles = 10) {
  if (n_quantiles < 2) throw ConfigError("n_quantiles must be >= 2");
  const std::vector<std::size_t>& hold = split.test;
  const std::size_t h = hold.size();
  if (h < n_quantiles) throw DomainError("holdout has fewer units than quantile bins");
  const int m = data.arms();
  const auto um = static_cast<std::size_t>(m);

  StratifiedEstimates out;
  out.cells.assign(um, std::vector<QuantileCell>(n_quantiles));
  std::vector<std::vector<double>> assigned_value(um, std::vector<double>(h));
  std::vector<std::string> empty_cells;

  std::vector<double> pred(h);
  std::vector<std::size_t> order(h), bin_of(h);
  for (int a = 0; a < m; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    for (std::size_t k = 0; k < h; ++k) pred[k] = predictor.predict(a, data.covariates(hold[k]));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
      if (pred[l] != pred[r]) return pred[l] < pred[r];
      const auto& il = data.unit_id(hold[l]);
      const auto& ir = data.unit_id(hold[r]);
      if (il != ir) return il < ir;
      return l < r;
    });
    for (std::size_t rank = 0; rank < h; ++rank) bin_of[order[rank]] = rank * n_quantiles / h;

    auto& cells = out.cells[ua];
    std::vector<double> sums(n_quantiles, 0.0);
    for (std::size_t k = 0; k < h; ++k) {
      auto& cell = cells[bin_of[k]];
      ++cell.units;
      if (data.arm(hold[k]) == a) {
        ++cell.assigned;
        sums[bin_of[k]] += data.outcome(hold[k]);
      }
    }
    std::vector<double> bin_means(n_quantiles, 0.0);
    for (std::size_t b = 0; b < n_quantiles; ++b) {
      if (cells[b].assigned == 0) {
        empty_cells.push_back("(" + data.arm_names()[ua] + ", bin " + std::to_string(b) + ")");
        continue;
      }
      if (cells[b].assigned < kMinCellWarning) {
        out.warnings.push_back("cell (" + data.arm_names()[ua] + ", bin " + std::to_string(b) + ") has only " +
                               std::to_string(cells[b].assigned) + " assigned units");
      }
      cells[b].mean_outcome = sums[b] / static_cast<double>(cells[b].assigned);
      bin_means[b] = cells[b].mean_outcome;
    }
    out.per_arm_sigma.push_back(detail::sample_sd(bin_means));
    out.naive_sigma.push_back(detail::sample_sd(pred));
    for (std::size_t k = 0; k < h; ++k) assigned_value[ua][k] = bin_means[bin_of[k]];
  }
  if (!empty_cells.empty()) {
    std::string msg = "empty (arm, quantile) cells on the holdout:";
    for (const auto& c : empty_cells) msg += " " + c;
    throw DomainError(msg);
  }

  out.sigma_hat = std::accumulate(out.per_arm_sigma.begin(), out.per_arm_sigma.end(), 0.0) / m;
  out.rho_matrix = Eigen::MatrixXd::Identity(m, m);
  double rho_sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < um; ++a) {
    for (std::size_t b = a + 1; b < um; ++b) {
      double r = detail::pearson(assigned_value[a], assigned_value[b]);
      if (std::isnan(r)) {
        out.warnings.push_back("correlation of arms '" + data.arm_names()[a] + "' and '" + data.arm_names()[b] +
                               "' undefined (constant bin means); reported as 0");
        r = 0.0;
      }
      out.rho_matrix(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = r;
      out.rho_matrix(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = r;
      rho_sum += r;
      ++pairs;
    }
  }
  out.rho_mean = pairs > 0 ? rho_sum / static_cast<double>(pairs) : 1.0;
  return out;
}

struct MomentEstimates {
  double s_hat = 0.0;
  double sigma_hat = 0.0;
  Eigen::MatrixXd rho_hat_matrix;
  double rho_hat_mean = 0.0;
  double sigma_eps_hat = 0.0;
  std::vector<double> per_arm_means;
  std::size_t n_quantiles = 10;
  StratifiedEstimates stratified;  // per-arm sigma, naive sigma, cell diagnostics, warnings
};

inline std::vector<double> arm_means(const ExperimentDataset& data) {
  require_nonempty_arms(data, "arm_means");
  const auto counts = data.arm_counts();
  std::vector<double> sums(static_cast<std::size_t>(data.arms()), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) sums[static_cast<std::size_t>(data.arm(i))] += data.outcome(i);
  for (std::size_t a = 0; a < sums.size(); ++a) sums[a] /= static_cast<double>(counts[a]);
  return sums;
}

/// The full pipeline: s on all rows, the per-arm model on the training side,
/// sigma_eps, sigma and rho on the holdout.
inline MomentEstimates estimate_moments(const ExperimentDataset& data, const TrainTestSplit& split,
                                        std::size_t n_quantiles = 10) {
  MomentEstimates est;
  est.s_hat = estimate_s(data);
  est.per_arm_means = arm_means(data);
  const LinearTLearner predictor = fit_predictor(data, split);
  est.sigma_eps_hat = estimate_sigma_eps(data, split, predictor);
  est.stratified = estimate_sigma_rho(data, split, predictor, n_quantiles);
  est.sigma_hat = est.stratified.sigma_hat;
  est.rho_hat_matrix = est.stratified.rho_matrix;
  est.rho_hat_mean = est.stratified.rho_mean;
  est.n_quantiles = n_quantiles;
  return est;
}

}  // namespace hetgain
