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

// What-if analyses on top of the simulator: predicted gain for a study
// profile, one-parameter sensitivity curves, cross-study parameter swaps and
// small-step elasticities. Every run in one analysis shares the base seed, so
// grid points and cells are compared under common random numbers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hetgain/errors.hpp"
#include "hetgain/format.hpp"
#include "hetgain/sim_engine.hpp"

namespace hetgain {

struct StudyProfile {
  std::string name;
  double s = 0.0;
  double sigma = 0.0;
  double rho = 0.0;
  double sigma_eps = 0.0;
  int m = 2;
  double grand_mean = 0.0;
  /// Distribution of arm means; Normal(grand_mean, s) when unset.
  std::optional<AvgResponseDist> dist;
  std::string outcome_scale_note;
};

inline AvgResponseDist means_distribution(const StudyProfile& p) {
  if (p.dist) return *p.dist;
  return NormalMeans{p.grand_mean, p.s};
}

inline void validate(const StudyProfile& p) {
  if (!(p.s >= 0.0) || !(p.sigma >= 0.0) || !(p.sigma_eps >= 0.0)) {
    throw ConfigError("profile '" + p.name + "': s, sigma and sigma_eps must be >= 0");
  }
  if (p.m < 2) throw ConfigError("profile '" + p.name + "': m must be >= 2");
  check_rho(p.rho, p.m);
  validate(means_distribution(p), p.m);
}

struct SimSettings {
  std::size_t n_individuals = 10000;
  std::size_t n_replications = 200;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  NoiseMode noise_mode = NoiseMode::kPerCell;
};

inline SimConfig to_sim_config(const StudyProfile& p, const SimSettings& settings) {
  SimConfig cfg;
  cfg.m = p.m;
  cfg.n_individuals = settings.n_individuals;
  cfg.n_replications = settings.n_replications;
  cfg.sigma = p.sigma;
  cfg.rho = p.rho;
  cfg.dist = means_distribution(p);
  cfg.sigma_eps = p.sigma_eps;
  cfg.noise_mode = settings.noise_mode;
  cfg.seed = settings.seed;
  return cfg;
}

struct GainPrediction {
  double gain_mean = 0.0;
  double gain_se = 0.0;
  double v_personalized_mean = 0.0;
  double v_uniform_mean = 0.0;
};

/// Expected gain over the best uniform arm implied by the profile, with
/// prediction error sigma_eps.
inline GainPrediction predict_gain(const StudyProfile& profile, const SimSettings& settings) {
  validate(profile);
  const SimResult r = simulate_gain(to_sim_config(profile, settings), settings.threads);
  return {r.gain_mean, r.gain_se, r.v_personalized_mean, r.v_uniform_mean};
}

// ---------------------------------------------------------------------------

enum class Parameter { kS, kSigma, kRho, kSigmaEps, kM };

inline std::string_view parameter_name(Parameter p) {
  switch (p) {
    case Parameter::kS: return "s";
    case Parameter::kSigma: return "sigma";
    case Parameter::kRho: return "rho";
    case Parameter::kSigmaEps: return "sigma_eps";
    case Parameter::kM: return "m";
  }
  return "?";
}

inline Parameter parse_parameter(std::string_view name) {
  for (Parameter p : {Parameter::kS, Parameter::kSigma, Parameter::kRho, Parameter::kSigmaEps, Parameter::kM}) {
    if (parameter_name(p) == name) return p;
  }
  throw ConfigError("unknown parameter '" + std::string(name) + "' (expected s, sigma, rho, sigma_eps or m)");
}

inline double get_parameter(const StudyProfile& p, Parameter which) {
  switch (which) {
    case Parameter::kS: return p.s;
    case Parameter::kSigma: return p.sigma;
    case Parameter::kRho: return p.rho;
    case Parameter::kSigmaEps: return p.sigma_eps;
    case Parameter::kM: return p.m;
  }
  return 0.0;
}

/// Copy of \p p with one parameter replaced. Changing s also rescales an
/// explicit Normal or spike-and-slab means distribution so that its total SD
/// equals the new s.
inline StudyProfile with_parameter(StudyProfile p, Parameter which, double value) {
  switch (which) {
    case Parameter::kS:
      if (!(value >= 0.0)) throw ConfigError("s = " + format_double(value) + " violates s >= 0");
      p.s = value;
      if (p.dist) {
        if (auto* n = std::get_if<NormalMeans>(&*p.dist)) {
          n->s = value;
        } else if (auto* ss = std::get_if<SpikeSlabMeans>(&*p.dist)) {
          *ss = spike_slab_with_variance(ss->pi_spike, ss->grand_mean, value * value);
        } else {
          throw ConfigError("cannot vary s for a profile with fixed arm means");
        }
      }
      break;
    case Parameter::kSigma:
      if (!(value >= 0.0)) throw ConfigError("sigma = " + format_double(value) + " violates sigma >= 0");
      p.sigma = value;
      break;
    case Parameter::kRho:
      check_rho(value, p.m);
      p.rho = value;
      break;
    case Parameter::kSigmaEps:
      if (!(value >= 0.0)) throw ConfigError("sigma_eps = " + format_double(value) + " violates sigma_eps >= 0");
      p.sigma_eps = value;
      break;
    case Parameter::kM:
      if (value != std::floor(value) || value < 2.0) {
        throw ConfigError("m = " + format_double(value) + " must be an integer >= 2");
      }
      p.m = static_cast<int>(value);
      check_rho(p.rho, p.m);
      break;
  }
  return p;
}

struct SensitivityResult {
  Parameter parameter = Parameter::kSigma;
  std::vector<double> grid;  // ascending
  std::vector<double> gain_mean;
  std::vector<double> gain_se;
  double baseline_value = 0.0;
  std::optional<std::size_t> baseline_index;  // grid point equal to the baseline, if any
  bool common_random_numbers = true;
};

/// Gain along a grid of one parameter, the others held at the profile's
/// values. The grid is sorted ascending; every point is validated before any
/// simulation runs.
inline SensitivityResult sensitivity_sweep(const StudyProfile& profile, Parameter parameter, std::vector<double> grid,
                                           const SimSettings& settings) {
  validate(profile);
  if (grid.empty()) throw ConfigError("sensitivity grid must not be empty");
  std::sort(grid.begin(), grid.end());
  std::vector<StudyProfile> points;
  for (double v : grid) points.push_back(with_parameter(profile, parameter, v));

  SensitivityResult out;
  out.parameter = parameter;
  out.grid = grid;
  out.baseline_value = get_parameter(profile, parameter);
  for (std::size_t k = 0; k < points.size(); ++k) {
    const GainPrediction g = predict_gain(points[k], settings);
    out.gain_mean.push_back(g.gain_mean);
    out.gain_se.push_back(g.gain_se);
    if (grid[k] == out.baseline_value && !out.baseline_index) out.baseline_index = k;
  }
  return out;
}

struct CounterfactualRow {
  std::string study;
  Parameter parameter = Parameter::kSigma;
  double original_value = 0.0;
  double swapped_value = 0.0;
  double baseline_gain = 0.0;
  double baseline_se = 0.0;
  double swapped_gain = 0.0;
  double swapped_se = 0.0;
};

/// Each study's gain with \p parameter replaced by the other study's value
/// (two rows, four cells: baseline and swapped gain per study).
inline std::vector<CounterfactualRow> counterfactual_swap(const StudyProfile& a, const StudyProfile& b,
                                                          Parameter parameter, const SimSettings& settings) {
  if (parameter == Parameter::kS) throw ConfigError("counterfactual swaps support sigma, rho, sigma_eps and m");
  validate(a);
  validate(b);
  std::vector<CounterfactualRow> rows;
  for (const auto* pair : {&a, &b}) {
    const StudyProfile& self = *pair;
    const StudyProfile& other = pair == &a ? b : a;
    CounterfactualRow row;
    row.study = self.name;
    row.parameter = parameter;
    row.original_value = get_parameter(self, parameter);
    row.swapped_value = get_parameter(other, parameter);
    const GainPrediction base = predict_gain(self, settings);
    const GainPrediction swapped = predict_gain(with_parameter(self, parameter, row.swapped_value), settings);
    row.baseline_gain = base.gain_mean;
    row.baseline_se = base.gain_se;
    row.swapped_gain = swapped.gain_mean;
    row.swapped_se = swapped.gain_se;
    rows.push_back(row);
  }
  return rows;
}

/// How "1% lower rho" is applied.
enum class RhoStep {
  kAbsolute,  // rho - delta (one percentage point of correlation)
  kRelative,  // rho * (1 - delta)
};

struct ElasticityRow {
  std::string label;
  Parameter parameter = Parameter::kSigma;
  double value = 0.0;
  double gain_mean = 0.0;
  double gain_se = 0.0;
  double change = 0.0;  // gain_mean - baseline gain
};

struct ElasticityTable {
  std::string study;
  double delta = 0.01;
  RhoStep rho_step = RhoStep::kAbsolute;
  double baseline_gain = 0.0;
  double baseline_se = 0.0;
  std::vector<ElasticityRow> rows;  // s down, sigma up, rho down, sigma_eps down
  std::string best;                 // label of the row with the largest gain
};

/// Gain after a small improvement of one parameter at a time: s and
/// sigma_eps lowered and sigma raised by the fraction delta of their current
/// value; rho lowered by delta (absolute, default) or by delta * rho.
inline ElasticityTable elasticity_table(const StudyProfile& profile, const SimSettings& settings, double delta = 0.01,
                                        RhoStep rho_step = RhoStep::kAbsolute) {
  validate(profile);
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  ElasticityTable t;
  t.study = profile.name;
  t.delta = delta;
  t.rho_step = rho_step;
  const GainPrediction base = predict_gain(profile, settings);
  t.baseline_gain = base.gain_mean;
  t.baseline_se = base.gain_se;

  const std::string pct = std::to_string(static_cast<int>(std::lround(delta * 100.0))) + "%";
  const double rho_new = rho_step == RhoStep::kAbsolute ? profile.rho - delta : profile.rho * (1.0 - delta);
  const struct {
    std::string label;
    Parameter parameter;
    double value;
  } steps[] = {
      {pct + " lower s", Parameter::kS, profile.s * (1.0 - delta)},
      {pct + " higher sigma", Parameter::kSigma, profile.sigma * (1.0 + delta)},
      {pct + " lower rho", Parameter::kRho, rho_new},
      {pct + " lower sigma_eps", Parameter::kSigmaEps, profile.sigma_eps * (1.0 - delta)},
  };
  double best_gain = 0.0;
  for (const auto& step : steps) {
    const GainPrediction g = predict_gain(with_parameter(profile, step.parameter, step.value), settings);
    t.rows.push_back({step.label, step.parameter, step.value, g.gain_mean, g.gain_se, g.gain_mean - base.gain_mean});
    if (t.best.empty() || g.gain_mean > best_gain) {
      t.best = step.label;
      best_gain = g.gain_mean;
    }
  }
  return t;
}

}  // namespace hetgain
