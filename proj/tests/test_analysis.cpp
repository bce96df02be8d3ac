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

#include "hetgain/analysis.hpp"
#include "hetgain/serialization.hpp"
#include "support.hpp"

namespace {

using hetgain::Parameter;
using hetgain::StudyProfile;

StudyProfile toy_profile() {
  StudyProfile p;
  p.name = "toy";
  p.s = 0.1;
  p.sigma = 0.5;
  p.rho = 0.5;
  p.sigma_eps = 0.2;
  p.m = 4;
  return p;
}

hetgain::SimSettings fast() {
  hetgain::SimSettings s;
  s.n_individuals = 2000;
  s.n_replications = 40;
  s.seed = 3;
  return s;
}

TEST(Profile, ValidationAndParameterAccess) {
  StudyProfile p = toy_profile();
  EXPECT_NO_THROW(hetgain::validate(p));
  EXPECT_EQ(hetgain::get_parameter(p, Parameter::kRho), 0.5);
  EXPECT_EQ(hetgain::with_parameter(p, Parameter::kM, 7).m, 7);
  EXPECT_THROW(hetgain::with_parameter(p, Parameter::kM, 2.5), hetgain::ConfigError);
  EXPECT_THROW(hetgain::with_parameter(p, Parameter::kRho, -0.5), hetgain::ConfigError);
  EXPECT_THROW(hetgain::with_parameter(p, Parameter::kSigma, -1), hetgain::ConfigError);
  EXPECT_THROW(hetgain::parse_parameter("tau"), hetgain::ConfigError);
  EXPECT_EQ(hetgain::parse_parameter("sigma_eps"), Parameter::kSigmaEps);
  p.sigma_eps = NAN;
  EXPECT_THROW(hetgain::validate(p), hetgain::ConfigError);
}

TEST(Profile, ChangingSUpdatesMeansDistribution) {
  StudyProfile p = toy_profile();
  p.dist = hetgain::spike_slab_with_variance(0.5, 0.0, 0.02);
  const auto q = hetgain::with_parameter(p, Parameter::kS, 0.3);
  EXPECT_NEAR(hetgain::variance(hetgain::means_distribution(q)), 0.09, 1e-12);
  p.dist = hetgain::FixedMeans{{0, 0, 0, 0}};
  EXPECT_THROW(hetgain::with_parameter(p, Parameter::kS, 0.3), hetgain::ConfigError);
}

TEST(Profile, JsonRoundTripAndRequiredSigmaEps) {
  const StudyProfile p = toy_profile();
  const auto back = hetgain::profile_from_json(hetgain::to_json(p));
  EXPECT_EQ(hetgain::to_json(back).dump(), hetgain::to_json(p).dump());
  auto doc = hetgain::to_json(p);
  doc.erase("sigma_eps");
  try {
    hetgain::profile_from_json(doc);
    FAIL();
  } catch (const hetgain::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("sigma_eps"), std::string::npos);
  }
}

TEST(Profile, ShippedProfilesLoad) {
  for (const char* file : {"profiles/penn_geisinger_like.json", "profiles/walmart_like.json"}) {
    const auto doc = hetgain::json::parse(hetgain::read_file(hetgain::testing::source_path(file)));
    const auto p = hetgain::profile_from_json(doc);
    EXPECT_EQ(p.s, 0.007);
    EXPECT_NE(doc.at("sigma_eps_status").get<std::string>().find("assumed"), std::string::npos);
  }
}

TEST(Sensitivity, SortedGridAndMonotoneInSigma) {
  const auto r = hetgain::sensitivity_sweep(toy_profile(), Parameter::kSigma, {1.0, 0.25, 0.5, 2.0}, fast());
  EXPECT_EQ(r.grid, (std::vector<double>{0.25, 0.5, 1.0, 2.0}));
  ASSERT_TRUE(r.baseline_index.has_value());
  EXPECT_EQ(*r.baseline_index, 1u);
  for (std::size_t k = 1; k < r.grid.size(); ++k) EXPECT_GT(r.gain_mean[k], r.gain_mean[k - 1]);
  EXPECT_EQ(r.gain_mean[1], hetgain::predict_gain(toy_profile(), fast()).gain_mean);
}

TEST(Sensitivity, MonotoneDecreasingInRhoAndSigmaEps) {
  for (Parameter param : {Parameter::kRho, Parameter::kSigmaEps}) {
    const auto r = hetgain::sensitivity_sweep(toy_profile(), param, {0.0, 0.3, 0.6, 0.9}, fast());
    for (std::size_t k = 1; k < r.grid.size(); ++k) EXPECT_LT(r.gain_mean[k], r.gain_mean[k - 1]);
  }
}

TEST(Sensitivity, InvalidGridPointFailsBeforeSimulating) {
  EXPECT_THROW(hetgain::sensitivity_sweep(toy_profile(), Parameter::kRho, {0.1, 1.5}, fast()), hetgain::ConfigError);
  EXPECT_THROW(hetgain::sensitivity_sweep(toy_profile(), Parameter::kRho, {}, fast()), hetgain::ConfigError);
}

TEST(Counterfactual, SwapsOneParameter) {
  StudyProfile a = toy_profile();
  StudyProfile b = toy_profile();
  b.name = "other";
  b.rho = 0.9;
  const auto rows = hetgain::counterfactual_swap(a, b, Parameter::kRho, fast());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].original_value, 0.5);
  EXPECT_EQ(rows[0].swapped_value, 0.9);
  EXPECT_LT(rows[0].swapped_gain, rows[0].baseline_gain);
  EXPECT_GT(rows[1].swapped_gain, rows[1].baseline_gain);
  // swapping into the other profile gives that profile's gain (common random numbers)
  EXPECT_EQ(rows[0].swapped_gain, rows[1].baseline_gain);
  EXPECT_THROW(hetgain::counterfactual_swap(a, b, Parameter::kS, fast()), hetgain::ConfigError);
}

TEST(Elasticity, RowsAndRhoStepModes) {
  const auto t = hetgain::elasticity_table(toy_profile(), fast());
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_EQ(t.rows[0].label, "1% lower s");
  EXPECT_EQ(t.rows[1].label, "1% higher sigma");
  EXPECT_EQ(t.rows[2].label, "1% lower rho");
  EXPECT_EQ(t.rows[3].label, "1% lower sigma_eps");
  EXPECT_NEAR(t.rows[2].value, 0.49, 1e-15);
  for (const auto& r : t.rows) EXPECT_GT(r.change, 0.0) << r.label;

  StudyProfile zero = toy_profile();
  zero.rho = 0.0;
  const auto rel = hetgain::elasticity_table(zero, fast(), 0.01, hetgain::RhoStep::kRelative);
  EXPECT_EQ(rel.rows[2].value, 0.0);
  EXPECT_EQ(rel.rows[2].change, 0.0);
  EXPECT_THROW(hetgain::elasticity_table(toy_profile(), fast(), 1.5), hetgain::ConfigError);
}

}  // namespace
