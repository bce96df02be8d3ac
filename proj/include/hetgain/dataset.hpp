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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hetgain/errors.hpp"
#include "hetgain/rng.hpp"

namespace hetgain {

enum class CovariateKind { kContinuous, kBinary };

struct CovariateColumn {
  std::string name;
  CovariateKind kind = CovariateKind::kContinuous;

  friend bool operator==(const CovariateColumn&, const CovariateColumn&) = default;
};

/// Arm labels plus the ordered covariate columns shared by every row.
struct DatasetSchema {
  std::vector<std::string> arm_names;
  std::vector<CovariateColumn> covariates;

  int arms() const { return static_cast<int>(arm_names.size()); }
  std::size_t covariate_count() const { return covariates.size(); }
  int arm_index(std::string_view name) const {
    for (std::size_t a = 0; a < arm_names.size(); ++a) {
      if (arm_names[a] == name) return static_cast<int>(a);
    }
    return -1;
  }

  friend bool operator==(const DatasetSchema&, const DatasetSchema&) = default;
};

/// Rows of a randomized multi-arm experiment, stored column-wise. Immutable
/// once built; add_row validates every field.
class ExperimentDataset {
 public:
  ExperimentDataset() = default;
  explicit ExperimentDataset(DatasetSchema schema) : schema_(std::move(schema)) {
    if (schema_.arm_names.empty()) throw ConfigError("dataset needs at least one arm");
  }

  void reserve(std::size_t n) {
    unit_ids_.reserve(n);
    arms_.reserve(n);
    outcomes_.reserve(n);
    propensities_.reserve(n);
    covariates_.reserve(n * schema_.covariate_count());
  }

  void add_row(std::string unit_id, std::span<const double> covariates, int arm, double outcome,
               double propensity) {
    const std::size_t row = size();
    if (covariates.size() != schema_.covariate_count()) {
      throw ConfigError("row " + std::to_string(row) + ": expected " +
                        std::to_string(schema_.covariate_count()) + " covariates, got " +
                        std::to_string(covariates.size()));
    }
    if (arm < 0 || arm >= arms()) {
      throw ConfigError("row " + std::to_string(row) + ": arm index " + std::to_string(arm) + " out of range");
    }
    if (!(propensity > 0.0 && propensity <= 1.0)) {
      throw ConfigError("row " + std::to_string(row) + ": propensity must lie in (0, 1]");
    }
    if (!std::isfinite(outcome)) throw ConfigError("row " + std::to_string(row) + ": outcome is not finite");
    for (double x : covariates) {
      if (!std::isfinite(x)) throw ConfigError("row " + std::to_string(row) + ": covariate is not finite");
    }
    unit_ids_.push_back(std::move(unit_id));
    covariates_.insert(covariates_.end(), covariates.begin(), covariates.end());
    arms_.push_back(arm);
    outcomes_.push_back(outcome);
    propensities_.push_back(propensity);
  }

  const DatasetSchema& schema() const { return schema_; }
  const std::vector<std::string>& arm_names() const { return schema_.arm_names; }
  int arms() const { return schema_.arms(); }
  std::size_t covariate_count() const { return schema_.covariate_count(); }
  std::size_t size() const { return arms_.size(); }
  bool empty() const { return arms_.empty(); }

  const std::string& unit_id(std::size_t i) const { return unit_ids_[i]; }
  int arm(std::size_t i) const { return arms_[i]; }
  double outcome(std::size_t i) const { return outcomes_[i]; }
  double propensity(std::size_t i) const { return propensities_[i]; }
  std::span<const double> covariates(std::size_t i) const {
    const std::size_t p = covariate_count();
    return {covariates_.data() + i * p, p};
  }

  std::span<const double> outcomes() const { return outcomes_; }
  std::span<const int> arm_column() const { return arms_; }

  std::vector<std::size_t> arm_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(arms()), 0);
    for (int a : arms_) ++counts[static_cast<std::size_t>(a)];
    return counts;
  }

  /// Copy of the given rows, in the given order.
  ExperimentDataset subset(std::span<const std::size_t> rows) const {
    ExperimentDataset out(schema_);
    out.reserve(rows.size());
    for (std::size_t i : rows) out.add_row(unit_ids_[i], covariates(i), arms_[i], outcomes_[i], propensities_[i]);
    return out;
  }

  /// Same rows with the outcome column replaced.
  ExperimentDataset with_outcomes(std::vector<double> outcomes) const {
    if (outcomes.size() != size()) throw ConfigError("outcome column length mismatch");
    ExperimentDataset out = *this;
    out.outcomes_ = std::move(outcomes);
    return out;
  }

  /// Checks the randomized-known design: the propensity of a row depends only
  /// on its arm, and the per-arm propensities sum to 1 within tol.
  void check_randomized_design(double tol = 1e-9) const {
    std::vector<double> per_arm(static_cast<std::size_t>(arms()), -1.0);
    for (std::size_t i = 0; i < size(); ++i) {
      double& e = per_arm[static_cast<std::size_t>(arms_[i])];
      if (e < 0.0) {
        e = propensities_[i];
      } else if (std::abs(e - propensities_[i]) > tol) {
        throw ConfigError("propensity varies within arm '" + schema_.arm_names[static_cast<std::size_t>(arms_[i])] +
                          "'; design is not randomized-known");
      }
    }
    double total = 0.0;
    for (std::size_t a = 0; a < per_arm.size(); ++a) {
      if (per_arm[a] < 0.0) throw ConfigError("arm '" + schema_.arm_names[a] + "' has no rows");
      total += per_arm[a];
    }
    if (std::abs(total - 1.0) > tol) throw ConfigError("per-arm propensities sum to " + std::to_string(total));
  }

  friend bool operator==(const ExperimentDataset&, const ExperimentDataset&) = default;

 private:
  DatasetSchema schema_;
  std::vector<std::string> unit_ids_;
  std::vector<double> covariates_;  // row-major n x p
  std::vector<int> arms_;
  std::vector<double> outcomes_;
  std::vector<double> propensities_;
};

/// Throws naming the first arm with no rows.
inline void require_nonempty_arms(const ExperimentDataset& data, std::string_view context) {
  const auto counts = data.arm_counts();
  for (std::size_t a = 0; a < counts.size(); ++a) {
    if (counts[a] == 0) {
      throw DomainError(std::string(context) + ": arm '" + data.arm_names()[a] + "' has no rows");
    }
  }
}

// ---------------------------------------------------------------------------

struct TrainTestSplit {
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
  std::vector<std::size_t> train;  // ascending row indices
  std::vector<std::size_t> test;   // ascending row indices
};

/// Shuffled train/test partition, stratified by arm. The total train size is
/// round(fraction * n); it is spread over arms by largest remainder, so each
/// arm's train count is within one row of fraction * n_a.
inline TrainTestSplit split(const ExperimentDataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
  const std::size_t n = data.size();
  const auto m = static_cast<std::size_t>(data.arms());

  std::vector<std::vector<std::size_t>> by_arm(m);
  for (std::size_t i = 0; i < n; ++i) by_arm[static_cast<std::size_t>(data.arm(i))].push_back(i);

  const auto target = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> quota(m);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t a = 0; a < m; ++a) {
    const double exact = train_fraction * static_cast<double>(by_arm[a].size());
    quota[a] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[a];
    remainders.emplace_back(exact - std::floor(exact), a);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& l, const auto& r) { return l.first > r.first; });
  for (std::size_t k = 0; assigned < target && k < remainders.size(); ++k) {
    const std::size_t a = remainders[k].second;
    if (quota[a] < by_arm[a].size()) {
      ++quota[a];
      ++assigned;
    }
  }

  TrainTestSplit out;
  out.train_fraction = train_fraction;
  out.seed = seed;
  for (std::size_t a = 0; a < m; ++a) {
    Rng rng(seed, {0x73706c6974ULL, a});
    auto& rows = by_arm[a];
    shuffle(std::span<std::size_t>(rows), rng);
    out.train.insert(out.train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(quota[a]));
    out.test.insert(out.test.end(), rows.begin() + static_cast<std::ptrdiff_t>(quota[a]), rows.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  if (out.train.empty() || out.test.empty()) {
    throw ConfigError("train fraction " + std::to_string(train_fraction) + " leaves an empty " +
                      (out.train.empty() ? "training" : "test") + " side for n = " + std::to_string(n));
  }
  return out;
}

// ---------------------------------------------------------------------------

struct BalanceRow {
  std::string covariate;
  std::vector<double> arm_means;
  double max_abs_z = 0.0;  // largest pairwise standardized mean difference
  bool balanced = true;    // max_abs_z < threshold
};

/// Randomization check: for every covariate, the largest pairwise difference
/// in arm means, in units of its standard error.
inline std::vector<BalanceRow> balance_check(const ExperimentDataset& data, double threshold = 4.0) {
  const auto m = static_cast<std::size_t>(data.arms());
  const std::size_t p = data.covariate_count();
  const auto counts = data.arm_counts();
  std::vector<BalanceRow> rows;
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> sum(m, 0.0), sum2(m, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double x = data.covariates(i)[j];
      const auto a = static_cast<std::size_t>(data.arm(i));
      sum[a] += x;
      sum2[a] += x * x;
    }
    BalanceRow row;
    row.covariate = data.schema().covariates[j].name;
    std::vector<double> var(m, 0.0);
    for (std::size_t a = 0; a < m; ++a) {
      const double n = static_cast<double>(counts[a]);
      row.arm_means.push_back(n > 0 ? sum[a] / n : 0.0);
      var[a] = n > 1 ? (sum2[a] - sum[a] * sum[a] / n) / (n - 1.0) : 0.0;
    }
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) {
        if (counts[a] == 0 || counts[b] == 0) continue;
        const double se = std::sqrt(var[a] / static_cast<double>(counts[a]) + var[b] / static_cast<double>(counts[b]));
        const double diff = std::abs(row.arm_means[a] - row.arm_means[b]);
        if (se > 0.0) {
          row.max_abs_z = std::max(row.max_abs_z, diff / se);
        } else if (diff > 0.0) {
          row.max_abs_z = std::numeric_limits<double>::infinity();  // constant within arms, different across
        }
      }
    }
    row.balanced = row.max_abs_z < threshold;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace hetgain
