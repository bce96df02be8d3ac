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

#include <gtest/gtest.h>

#include <cmath>

#include "hetgain/policy.hpp"
#include "hetgain/synth.hpp"

namespace {

using hetgain::CovariateKind;
using hetgain::DatasetSchema;
using hetgain::ExperimentDataset;

hetgain::SynthDGP motivating(double a0, double b0) {
  hetgain::SynthDGP dgp;
  dgp.arm_names = {"A", "B"};
  dgp.covariates = {{"x", hetgain::CovariateSpec::Kind::kNormal, 5.0, 1.5, 0.5}};
  dgp.intercepts = {a0, b0};
  dgp.beta.resize(2, 1);
  dgp.beta << 0.5, -1.5;
  dgp.noise_sd = 1.0;
  return dgp;
}

TEST(BestUniform, PicksHighestMeanLowestIndexOnTies) {
  DatasetSchema schema{{"a", "b", "c"}, {}};
  ExperimentDataset data(schema);
  const std::vector<double> none;
  data.add_row("1", none, 0, 1.0, 1.0 / 3);
  data.add_row("2", none, 1, 3.0, 1.0 / 3);
  data.add_row("3", none, 2, 3.0, 1.0 / 3);
  const auto p = hetgain::best_uniform(data);
  EXPECT_EQ(p.assign("x", none), 1);
  EXPECT_EQ(p.name(), "best_uniform");
}

TEST(OlsPolicy, RecoversCrossoverThreshold) {
  const auto synth = hetgain::generate_synthetic(motivating(22, 34), 20000, 3);
  const auto policy = hetgain::fit_ols_policy(synth.dataset);
  EXPECT_TRUE(policy.warnings().empty());
  const auto& lin = std::get<hetgain::LinearInteractionPolicy>(policy.kind());
  EXPECT_NEAR(lin.coef(0, 0), 22.0, 0.1);
  EXPECT_NEAR(lin.coef(0, 1), 0.5, 0.02);
  EXPECT_NEAR(lin.coef(1, 0), 34.0, 0.1);
  EXPECT_NEAR(lin.coef(1, 1), -1.5, 0.02);
  // crossover at x = 6
  EXPECT_EQ(policy.assign("u", std::vector<double>{5.5}), 1);
  EXPECT_EQ(policy.assign("u", std::vector<double>{6.5}), 0);
}

TEST(OlsPolicy, MatchesPerArmRegressions) {
  const auto synth = hetgain::generate_synthetic(hetgain::one_factor_dgp(3, 1.0, 0.3, {0, 1, 2}, 0.5), 3000, 8);
  const auto policy = hetgain::fit_ols_policy(synth.dataset);
  const auto& lin = std::get<hetgain::LinearInteractionPolicy>(policy.kind());
  // the fully interacted model equals separate per-arm least squares
  for (int a = 0; a < 3; ++a) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < synth.dataset.size(); ++i) {
      if (synth.dataset.arm(i) == a) rows.push_back(i);
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), 5);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      x(static_cast<Eigen::Index>(k), 0) = 1.0;
      for (int j = 0; j < 4; ++j) x(static_cast<Eigen::Index>(k), j + 1) = synth.dataset.covariates(rows[k])[static_cast<std::size_t>(j)];
      y[static_cast<Eigen::Index>(k)] = synth.dataset.outcome(rows[k]);
    }
    const Eigen::VectorXd direct = x.colPivHouseholderQr().solve(y);
    EXPECT_LT((lin.coef.row(a).transpose() - direct).norm(), 1e-6);
  }
}

TEST(OlsPolicy, SingularDesignWarns) {
  DatasetSchema schema{{"a", "b"}, {{"x", CovariateKind::kContinuous}, {"x2", CovariateKind::kContinuous}}};
  ExperimentDataset data(schema);
  for (int i = 0; i < 40; ++i) {
    const double x = i * 0.1;
    data.add_row("u" + std::to_string(i), std::vector<double>{x, 2 * x}, i % 2, x, 0.5);
  }
  const auto policy = hetgain::fit_ols_policy(data);
  ASSERT_EQ(policy.warnings().size(), 1u);
  EXPECT_NE(policy.warnings()[0].find("minimum-norm"), std::string::npos);
}

TEST(Ipw, HandComputedValue) {
  DatasetSchema schema{{"a", "b"}, {}};
  ExperimentDataset data(schema);
  const std::vector<double> none;
  data.add_row("1", none, 0, 2.0, 0.5);
  data.add_row("2", none, 1, 4.0, 0.25);
  data.add_row("3", none, 0, 6.0, 0.5);
  data.add_row("4", none, 1, 8.0, 0.25);
  const hetgain::Policy always_b("b", 2, hetgain::UniformPolicy{1});
  const auto est = hetgain::evaluate_ipw(always_b, data);
  EXPECT_DOUBLE_EQ(est.value, (4.0 / 0.25 + 8.0 / 0.25) / 4.0);
  EXPECT_EQ(est.n_matched, 2u);
  EXPECT_DOUBLE_EQ(est.match_rate, 0.5);
  // terms 0, 16, 0, 32 -> SD / sqrt(4)
  const double mean = 12.0, var = ((144.0) + 16.0 + 144.0 + 400.0) / 3.0;
  EXPECT_NEAR(est.se, std::sqrt(var / 4.0), 1e-12);
  (void)mean;
}

TEST(Ipw, NoMatchesYieldsZeroWithWarning) {
  DatasetSchema schema{{"a", "b"}, {}};
  ExperimentDataset data(schema);
  data.add_row("1", std::vector<double>{}, 0, 2.0, 0.5);
  const hetgain::Policy always_b("b", 2, hetgain::UniformPolicy{1});
  const auto est = hetgain::evaluate_ipw(always_b, data);
  EXPECT_EQ(est.value, 0.0);
  EXPECT_EQ(est.warnings.size(), 1u);
}

TEST(Ipw, UnbiasedOverRerandomization) {
  const auto dgp = hetgain::one_factor_dgp(3, 1.0, 0.2, {0.0, 0.3, 0.1}, 0.5);
  const auto synth = hetgain::generate_synthetic(dgp, 4000, 12);
  const auto policy = hetgain::fit_ols_policy(synth.dataset);
  const double truth = hetgain::evaluate_oracle(policy, synth.sealed);
  double sum = 0.0, sum2 = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const double v = hetgain::evaluate_ipw(policy, hetgain::assign_uniformly(synth.sealed, 1000 + r)).value;
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / reps;
  const double sd = std::sqrt((sum2 - reps * mean * mean) / (reps - 1));
  EXPECT_NEAR(mean, truth, 3 * sd / std::sqrt(double(reps)));
}

TEST(Oracle, DominatesEveryPolicy) {
  const auto synth = hetgain::generate_synthetic(motivating(22, 34), 5000, 2);
  const auto oracle = hetgain::oracle_policy(synth.sealed);
  const double best = hetgain::evaluate_oracle(oracle, synth.sealed);
  EXPECT_GE(best, hetgain::evaluate_oracle(hetgain::fit_ols_policy(synth.dataset), synth.sealed));
  for (int a = 0; a < 2; ++a) {
    EXPECT_GE(best, hetgain::evaluate_oracle(hetgain::Policy("u", 2, hetgain::UniformPolicy{a}), synth.sealed));
  }
  EXPECT_THROW(hetgain::oracle_policy(hetgain::SealedOutcomes{}), hetgain::DomainError);
}

TEST(GainReport, BenchmarkFirstAndDeterministic) {
  const auto synth = hetgain::generate_synthetic(motivating(22, 34), 6000, 4);
  const auto sp = hetgain::split(synth.dataset, 0.7, 9);
  const std::vector<hetgain::Policy> policies{hetgain::fit_ols_policy(synth.dataset.subset(sp.train))};
  hetgain::GainReportOptions opts;
  opts.bootstrap_reps = 200;
  opts.threads = 1;
  const auto a = hetgain::gain_report(policies, synth.dataset, sp, opts);
  opts.threads = 3;
  const auto b = hetgain::gain_report(policies, synth.dataset, sp, opts);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].policy, "best_uniform");
  EXPECT_EQ(a[0].abs_improvement, 0.0);
  EXPECT_EQ(a[0].diff_bootstrap_se, 0.0);
  EXPECT_GT(a[1].abs_improvement, 0.0);
  EXPECT_GT(a[1].bootstrap_se, 0.0);
  EXPECT_NEAR(a[1].bootstrap_se, a[1].ipw_se, 0.3 * a[1].ipw_se);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].ipw_value, b[k].ipw_value);
    EXPECT_EQ(a[k].bootstrap_se, b[k].bootstrap_se);
    EXPECT_EQ(a[k].diff_bootstrap_se, b[k].diff_bootstrap_se);
  }
}

}  // namespace
