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

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "hetgain/dataset.hpp"
#include "hetgain/errors.hpp"
#include "hetgain/linear_model.hpp"
#include "hetgain/parallel.hpp"
#include "hetgain/rng.hpp"
#include "hetgain/synth.hpp"

namespace hetgain {

struct UniformPolicy {
  int arm = 0;
};

/// argmax_a of [1, x] . coef.row(a); coef is m x (p + 1).
struct LinearInteractionPolicy {
  Eigen::MatrixXd coef;
};

/// Explicit unit -> arm table; units not in the table get fallback_arm.
struct TabularPolicy {
  std::map<std::string, int, std::less<>> table;
  int fallback_arm = 0;
};

/// Per-unit argmax of the sealed potential outcomes.
struct OraclePolicy {
  TabularPolicy assignment;
};

/// A total, deterministic map from (unit id, covariates) to an arm.
class Policy {
 public:
  using Kind = std::variant<UniformPolicy, LinearInteractionPolicy, TabularPolicy, OraclePolicy>;

  Policy(std::string name, int arms, Kind kind) : name_(std::move(name)), arms_(arms), kind_(std::move(kind)) {
    if (arms_ < 1) throw ConfigError("policy needs at least one arm");
    if (const auto* u = std::get_if<UniformPolicy>(&kind_); u && (u->arm < 0 || u->arm >= arms_)) {
      throw ConfigError("uniform policy arm out of range");
    }
    if (const auto* l = std::get_if<LinearInteractionPolicy>(&kind_); l && l->coef.rows() != arms_) {
      throw ConfigError("linear policy needs one coefficient row per arm");
    }
  }

  const std::string& name() const { return name_; }
  int arms() const { return arms_; }
  const Kind& kind() const { return kind_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

  int assign(std::string_view unit_id, std::span<const double> covariates) const {
    struct Visitor {
      std::string_view id;
      std::span<const double> x;
      int operator()(const UniformPolicy& u) const { return u.arm; }
      int operator()(const LinearInteractionPolicy& l) const {
        int best = 0;
        double best_v = 0.0;
        for (Eigen::Index a = 0; a < l.coef.rows(); ++a) {
          double v = l.coef(a, 0);
          for (std::size_t j = 0; j < x.size(); ++j) v += l.coef(a, static_cast<Eigen::Index>(j + 1)) * x[j];
          if (a == 0 || v > best_v) {
            best = static_cast<int>(a);
            best_v = v;
          }
        }
        return best;
      }
      int operator()(const TabularPolicy& t) const {
        const auto it = t.table.find(id);
        return it == t.table.end() ? t.fallback_arm : it->second;
      }
      int operator()(const OraclePolicy& o) const { return (*this)(o.assignment); }
    };
    return std::visit(Visitor{unit_id, covariates}, kind_);
  }

 private:
  std::string name_;
  int arms_;
  Kind kind_;
  std::vector<std::string> warnings_;
};

// ---------------------------------------------------------------------------
// Fitting.

/// Uniform policy on the arm with the highest training mean (lowest index on ties).
inline Policy best_uniform(const ExperimentDataset& train) {
  require_nonempty_arms(train, "best_uniform");
  const auto counts = train.arm_counts();
  std::vector<double> sums(static_cast<std::size_t>(train.arms()), 0.0);
  for (std::size_t i = 0; i < train.size(); ++i) sums[static_cast<std::size_t>(train.arm(i))] += train.outcome(i);
  int best = 0;
  double best_mean = sums[0] / static_cast<double>(counts[0]);
  for (int a = 1; a < train.arms(); ++a) {
    const double mean = sums[static_cast<std::size_t>(a)] / static_cast<double>(counts[static_cast<std::size_t>(a)]);
    if (mean > best_mean) {
      best = a;
      best_mean = mean;
    }
  }
  return Policy("best_uniform", train.arms(), UniformPolicy{best});
}

/// One regression of the outcome on covariates, arm dummies and all
/// arm x covariate interactions (arm 0 is the reference level):
///
///   Y = b0 + b.x + sum_{a>0} (g_a + d_a.x) 1{T = a} + e.
///
/// The fit is solved from accumulated normal equations, minimum-norm when the
/// design is singular (with a warning). The policy assigns argmax over arms
/// of the fitted Y^a.
inline Policy fit_ols_policy(const ExperimentDataset& train) {
  const int m = train.arms();
  const auto p = static_cast<Eigen::Index>(train.covariate_count());
  const Eigen::Index block = p + 1;
  const Eigen::Index k = block * m;  // [b0, b | g_1, d_1 | ... | g_{m-1}, d_{m-1}]
  if (train.empty()) throw DomainError("fit_ols_policy: empty training set");

  // X_i = E_a u_i with u_i = [1, x_i]; accumulate per-arm Gram blocks first.
  std::vector<Eigen::MatrixXd> gram(static_cast<std::size_t>(m), Eigen::MatrixXd::Zero(block, block));
  std::vector<Eigen::VectorXd> rhs(static_cast<std::size_t>(m), Eigen::VectorXd::Zero(block));
  Eigen::VectorXd u(block);
  for (std::size_t i = 0; i < train.size(); ++i) {
    u[0] = 1.0;
    const auto x = train.covariates(i);
    for (Eigen::Index j = 0; j < p; ++j) u[j + 1] = x[static_cast<std::size_t>(j)];
    const auto a = static_cast<std::size_t>(train.arm(i));
    gram[a].selfadjointView<Eigen::Lower>().rankUpdate(u);
    rhs[a] += train.outcome(i) * u;
  }
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(k);
  for (int a = 0; a < m; ++a) {
    Eigen::MatrixXd g = gram[static_cast<std::size_t>(a)].selfadjointView<Eigen::Lower>();
    const auto& r = rhs[static_cast<std::size_t>(a)];
    xtx.topLeftCorner(block, block) += g;
    xty.head(block) += r;
    if (a > 0) {
      const Eigen::Index off = block * a;
      xtx.block(off, off, block, block) += g;
      xtx.block(0, off, block, block) += g;
      xtx.block(off, 0, block, block) += g;
      xty.segment(off, block) += r;
    }
  }
  const LeastSquaresFit fit = least_squares_gram(xtx, xty);

  LinearInteractionPolicy lin;
  lin.coef.resize(m, block);
  for (int a = 0; a < m; ++a) {
    Eigen::VectorXd c = fit.coef.head(block);
    if (a > 0) c += fit.coef.segment(block * a, block);
    lin.coef.row(a) = c.transpose();
  }
  Policy policy("ols", m, std::move(lin));
  if (!fit.full_rank()) {
    policy.add_warning("singular OLS design (rank " + std::to_string(fit.rank) + " of " + std::to_string(k) +
                       "); using the minimum-norm fit");
  }
  return policy;
}

/// Oracle policy from sealed potential outcomes (synthetic data only).
inline Policy oracle_policy(const SealedOutcomes& sealed) {
  if (sealed.empty()) throw DomainError("oracle policy requires sealed potential outcomes (synthetic data only)");
  OraclePolicy o;
  for (std::size_t i = 0; i < sealed.size(); ++i) {
    int best = 0;
    for (int a = 1; a < sealed.arms(); ++a) {
      if (sealed.outcome(i, a) > sealed.outcome(i, best)) best = a;
    }
    o.assignment.table.emplace(sealed.unit_id(i), best);
  }
  return Policy("oracle", sealed.arms(), std::move(o));
}

// ---------------------------------------------------------------------------
// Evaluation.

struct IpwEstimate {
  double value = 0.0;
  double se = 0.0;
  std::size_t n_matched = 0;
  double match_rate = 0.0;
  std::vector<std::string> warnings;
};

/// Per-row IPW terms 1{pi(x_i) = T_i} Y_i / e(T_i | x_i).
inline std::vector<double> ipw_terms(const Policy& policy, const ExperimentDataset& holdout) {
  std::vector<double> t(holdout.size(), 0.0);
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    if (policy.assign(holdout.unit_id(i), holdout.covariates(i)) == holdout.arm(i)) {
      t[i] = holdout.outcome(i) / holdout.propensity(i);
    }
  }
  return t;
}

/// IPW(pi) = (1/n) sum_i 1{pi(x_i) = T_i} Y_i / e(T_i | x_i) over the holdout;
/// SE is the SD of the per-row terms over sqrt(n).
inline IpwEstimate evaluate_ipw(const Policy& policy, const ExperimentDataset& holdout) {
  if (holdout.empty()) throw DomainError("evaluate_ipw: holdout is empty");
  IpwEstimate est;
  const std::size_t n = holdout.size();
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double term = 0.0;
    if (policy.assign(holdout.unit_id(i), holdout.covariates(i)) == holdout.arm(i)) {
      term = holdout.outcome(i) / holdout.propensity(i);
      ++est.n_matched;
    }
    const double delta = term - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (term - mean);
  }
  est.value = mean;
  est.se = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
  est.match_rate = static_cast<double>(est.n_matched) / static_cast<double>(n);
  if (est.n_matched == 0) {
    est.value = 0.0;
    est.warnings.push_back("policy '" + policy.name() + "' matched no holdout rows; IPW value is 0");
  }
  return est;
}

/// mean_i Y_i^{pi(x_i)} over the sealed units. Exact.
inline double evaluate_oracle(const Policy& policy, const SealedOutcomes& sealed) {
  if (sealed.empty()) throw DomainError("oracle evaluation requires sealed potential outcomes (synthetic data only)");
  if (policy.arms() != sealed.arms()) throw ConfigError("policy and sealed outcomes disagree on the arm count");
  double sum = 0.0;
  for (std::size_t i = 0; i < sealed.size(); ++i) sum += sealed.outcome(i, policy.assign(sealed.unit_id(i), sealed.covariates(i)));
  return sum / static_cast<double>(sealed.size());
}

// ---------------------------------------------------------------------------
// Reporting.

struct GainReportRow {
  std::string policy;
  double ipw_value = 0.0;
  double ipw_se = 0.0;          // analytic, from evaluate_ipw
  double bootstrap_se = 0.0;    // resampling holdout rows
  double abs_improvement = 0.0; // vs best_uniform IPW
  double rel_improvement = 0.0; // abs_improvement / |best_uniform IPW|
  double diff_bootstrap_se = 0.0;  // paired bootstrap SE of the improvement
  double match_rate = 0.0;
};

struct GainReportOptions {
  std::size_t bootstrap_reps = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

/// IPW value of best_uniform (fitted on the training rows) and of each given
/// policy on the holdout, with paired bootstrap SEs. The first row is always
/// the best_uniform benchmark.
inline std::vector<GainReportRow> gain_report(const std::vector<Policy>& policies, const ExperimentDataset& data,
                                              const TrainTestSplit& split, const GainReportOptions& opts = {}) {
  const ExperimentDataset train = data.subset(split.train);
  const ExperimentDataset holdout = data.subset(split.test);
  std::vector<Policy> all;
  all.push_back(best_uniform(train));
  all.insert(all.end(), policies.begin(), policies.end());

  const std::size_t n = holdout.size();
  std::vector<std::vector<double>> terms;
  std::vector<IpwEstimate> point;
  for (const auto& p : all) {
    terms.push_back(ipw_terms(p, holdout));
    point.push_back(evaluate_ipw(p, holdout));
  }

  // boot[b][k]: resample b's IPW value for policy k
  const auto boot = parallel_map(opts.bootstrap_reps, opts.threads, [&](std::size_t b) {
    Rng rng(opts.seed, {0x626f6f74ULL, b});
    std::vector<double> sums(all.size(), 0.0);
    for (std::size_t draw = 0; draw < n; ++draw) {
      const auto i = static_cast<std::size_t>(rng.below(n));
      for (std::size_t k = 0; k < all.size(); ++k) sums[k] += terms[k][i];
    }
    for (double& s : sums) s /= static_cast<double>(n);
    return sums;
  });

  auto sd = [&](auto&& value_of) {
    const std::size_t reps = boot.size();
    if (reps < 2) return 0.0;
    double mean = 0.0;
    for (std::size_t b = 0; b < reps; ++b) mean += value_of(b);
    mean /= static_cast<double>(reps);
    double ss = 0.0;
    for (std::size_t b = 0; b < reps; ++b) ss += (value_of(b) - mean) * (value_of(b) - mean);
    return std::sqrt(ss / static_cast<double>(reps - 1));
  };

  std::vector<GainReportRow> rows;
  const double base = point[0].value;
  for (std::size_t k = 0; k < all.size(); ++k) {
    GainReportRow r;
    r.policy = all[k].name();
    r.ipw_value = point[k].value;
    r.ipw_se = point[k].se;
    r.match_rate = point[k].match_rate;
    r.bootstrap_se = sd([&](std::size_t b) { return boot[b][k]; });
    r.abs_improvement = point[k].value - base;
    r.rel_improvement = base != 0.0 ? r.abs_improvement / std::abs(base) : 0.0;
    r.diff_bootstrap_se = sd([&](std::size_t b) { return boot[b][k] - boot[b][0]; });
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace hetgain
