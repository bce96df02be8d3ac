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

// JSON documents and CSV tables exchanged by the command-line tool.

#include <json.hpp>

#include <string>
#include <string_view>
#include <vector>

#include "hetgain/analysis.hpp"
#include "hetgain/csv.hpp"
#include "hetgain/dataset.hpp"
#include "hetgain/errors.hpp"
#include "hetgain/estimation.hpp"
#include "hetgain/format.hpp"
#include "hetgain/policy.hpp"
#include "hetgain/sim_engine.hpp"
#include "hetgain/synth.hpp"

namespace hetgain {

using json = nlohmann::ordered_json;

namespace detail {

template <typename T>
T field(const json& doc, std::string_view key, const T& fallback) {
  const auto it = doc.find(key);
  if (it == doc.end()) return fallback;
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config field '" + std::string(key) + "' has the wrong type");
  }
}

template <typename T>
T required(const json& doc, std::string_view key) {
  if (!doc.contains(key)) throw ConfigError("config field '" + std::string(key) + "' is required");
  return field<T>(doc, key, T{});
}

inline json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

// --- means distribution -----------------------------------------------------

inline json dist_to_json(const AvgResponseDist& dist) {
  if (const auto* f = std::get_if<FixedMeans>(&dist)) return {{"kind", "fixed"}, {"mu", f->mu}};
  if (const auto* n = std::get_if<NormalMeans>(&dist)) return {{"kind", "normal"}, {"M", n->grand_mean}, {"s", n->s}};
  const auto& p = std::get<SpikeSlabMeans>(dist);
  return {{"kind", "spike_slab"}, {"pi", p.pi_spike}, {"M", p.grand_mean}, {"s", p.s}};
}

/// Accepts {"kind": "fixed", "mu": [...]}, {"kind": "normal", "M", "s"} and
/// {"kind": "spike_slab", "pi", "M", "s" | "variance"} where variance is the
/// total (1 - pi) s^2.
inline AvgResponseDist dist_from_json(const json& doc) {
  const auto kind = detail::required<std::string>(doc, "kind");
  if (kind == "fixed") return FixedMeans{detail::required<std::vector<double>>(doc, "mu")};
  if (kind == "normal") return NormalMeans{detail::field(doc, "M", 0.0), detail::required<double>(doc, "s")};
  if (kind == "spike_slab") {
    const double pi = detail::required<double>(doc, "pi");
    const double grand = detail::field(doc, "M", 0.0);
    if (doc.contains("variance")) return spike_slab_with_variance(pi, grand, detail::required<double>(doc, "variance"));
    return SpikeSlabMeans{pi, grand, detail::required<double>(doc, "s")};
  }
  throw ConfigError("config field 'dist.kind' must be fixed, normal or spike_slab, got '" + kind + "'");
}

// --- simulation ---------------------------------------------------------------

inline std::string_view noise_mode_name(NoiseMode m) { return m == NoiseMode::kPerCell ? "per_cell" : "per_individual"; }

inline NoiseMode parse_noise_mode(std::string_view s) {
  if (s == "per_cell") return NoiseMode::kPerCell;
  if (s == "per_individual") return NoiseMode::kPerIndividual;
  throw ConfigError("config field 'noise_mode' must be per_cell or per_individual");
}

inline json to_json(const SimConfig& c) {
  return {{"m", c.m},
          {"n_individuals", c.n_individuals},
          {"n_replications", c.n_replications},
          {"sigma", c.sigma},
          {"rho", c.rho},
          {"dist", dist_to_json(c.dist)},
          {"sigma_eps", c.sigma_eps},
          {"noise_mode", noise_mode_name(c.noise_mode)},
          {"seed", c.seed}};
}

inline SimConfig sim_config_from_json(const json& doc) {
  SimConfig c;
  c.m = detail::field(doc, "m", c.m);
  c.n_individuals = detail::field(doc, "n_individuals", c.n_individuals);
  c.n_replications = detail::field(doc, "n_replications", c.n_replications);
  c.sigma = detail::required<double>(doc, "sigma");
  c.rho = detail::required<double>(doc, "rho");
  if (!doc.contains("dist")) throw ConfigError("config field 'dist' is required");
  c.dist = dist_from_json(doc.at("dist"));
  c.sigma_eps = detail::field(doc, "sigma_eps", c.sigma_eps);
  c.noise_mode = parse_noise_mode(detail::field<std::string>(doc, "noise_mode", "per_cell"));
  c.seed = detail::field(doc, "seed", c.seed);
  return c;
}

inline json to_json(const SimResult& r) {
  return {{"gain_mean", r.gain_mean},
          {"gain_se", r.gain_se},
          {"v_personalized_mean", r.v_personalized_mean},
          {"v_uniform_mean", r.v_uniform_mean},
          {"per_replication_gains", r.per_replication_gains}};
}

inline std::string replications_csv(const SimResult& r) {
  std::string out = "replication,gain\n";
  for (std::size_t k = 0; k < r.per_replication_gains.size(); ++k) {
    out += std::to_string(k) + "," + format_double(r.per_replication_gains[k]) + "\n";
  }
  return out;
}

inline std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "m,gain_mean,gain_se,v_personalized_mean,v_uniform_mean\n";
  for (const auto& r : rows) {
    out += std::to_string(r.m) + "," + format_double(r.gain_mean) + "," + format_double(r.gain_se) + "," +
           format_double(r.v_personalized_mean) + "," + format_double(r.v_uniform_mean) + "\n";
  }
  return out;
}

// --- datasets -------------------------------------------------------------------

inline json to_json(const DatasetSchema& s) {
  json covs = json::array();
  for (const auto& c : s.covariates) {
    covs.push_back({{"name", c.name}, {"kind", c.kind == CovariateKind::kBinary ? "binary" : "continuous"}});
  }
  return {{"arm_names", s.arm_names}, {"covariates", covs}};
}

inline DatasetSchema schema_from_json(const json& doc) {
  DatasetSchema s;
  s.arm_names = detail::required<std::vector<std::string>>(doc, "arm_names");
  if (doc.contains("covariates")) {
    for (const auto& c : doc.at("covariates")) {
      const auto kind = detail::field<std::string>(c, "kind", "continuous");
      if (kind != "continuous" && kind != "binary") throw ConfigError("covariate kind must be continuous or binary");
      s.covariates.push_back({detail::required<std::string>(c, "name"),
                              kind == "binary" ? CovariateKind::kBinary : CovariateKind::kContinuous});
    }
  }
  return s;
}

inline SynthDGP dgp_from_json(const json& doc) {
  if (doc.contains("one_factor")) {
    const json& f = doc.at("one_factor");
    const int m = detail::required<int>(f, "m");
    SynthDGP dgp = one_factor_dgp(m, detail::required<double>(f, "sigma"), detail::required<double>(f, "rho"),
                                  detail::field(f, "intercepts", std::vector<double>(static_cast<std::size_t>(m), 0.0)),
                                  detail::field(f, "noise_sd", 0.0));
    if (f.contains("arm_names")) dgp.arm_names = detail::required<std::vector<std::string>>(f, "arm_names");
    if (detail::field<std::string>(f, "outcome_kind", "gaussian") == "bernoulli_latent") {
      dgp.outcome_kind = OutcomeKind::kBernoulliLatent;
    }
    validate(dgp);
    return dgp;
  }
  SynthDGP dgp;
  dgp.intercepts = detail::required<std::vector<double>>(doc, "intercepts");
  const std::size_t m = dgp.intercepts.size();
  if (doc.contains("arm_names")) {
    dgp.arm_names = detail::required<std::vector<std::string>>(doc, "arm_names");
  } else {
    for (std::size_t a = 0; a < m; ++a) dgp.arm_names.push_back("arm" + std::to_string(a));
  }
  if (!doc.contains("covariates")) throw ConfigError("config field 'covariates' is required");
  for (const auto& c : doc.at("covariates")) {
    CovariateSpec spec;
    spec.name = detail::required<std::string>(c, "name");
    const auto kind = detail::field<std::string>(c, "kind", "normal");
    if (kind == "normal") {
      spec.kind = CovariateSpec::Kind::kNormal;
      spec.mean = detail::field(c, "mean", 0.0);
      spec.sd = detail::field(c, "sd", 1.0);
    } else if (kind == "bernoulli") {
      spec.kind = CovariateSpec::Kind::kBernoulli;
      spec.q = detail::required<double>(c, "q");
    } else {
      throw ConfigError("config field 'covariates[].kind' must be normal or bernoulli");
    }
    dgp.covariates.push_back(spec);
  }
  const auto beta = detail::required<std::vector<std::vector<double>>>(doc, "beta");
  if (beta.size() != m) throw ConfigError("config field 'beta' must have one row per arm");
  dgp.beta.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(dgp.covariates.size()));
  for (std::size_t a = 0; a < m; ++a) {
    if (beta[a].size() != dgp.covariates.size()) throw ConfigError("config field 'beta' rows must have p entries");
    for (std::size_t j = 0; j < beta[a].size(); ++j) {
      dgp.beta(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) = beta[a][j];
    }
  }
  dgp.noise_sd = detail::field(doc, "noise_sd", 0.0);
  const auto kind = detail::field<std::string>(doc, "outcome_kind", "gaussian");
  if (kind == "bernoulli_latent") {
    dgp.outcome_kind = OutcomeKind::kBernoulliLatent;
  } else if (kind != "gaussian") {
    throw ConfigError("config field 'outcome_kind' must be gaussian or bernoulli_latent");
  }
  validate(dgp);
  return dgp;
}

inline json to_json(const GroundTruth& t) {
  return {{"s", t.s},
          {"sigma", t.sigma},
          {"rho_mean", t.rho_mean},
          {"arm_means", t.arm_means},
          {"arm_sigmas", t.arm_sigmas},
          {"rho_matrix", detail::matrix_json(t.rho)}};
}

/// Sealed file: unit_id, covariates, then one "potential:<arm>" column per arm.
inline std::string sealed_csv(const SealedOutcomes& sealed) {
  std::string out = "unit_id";
  for (const auto& c : sealed.schema().covariates) out += "," + csv::quote(c.name);
  for (const auto& a : sealed.schema().arm_names) out += "," + csv::quote("potential:" + a);
  out += '\n';
  for (std::size_t i = 0; i < sealed.size(); ++i) {
    out += csv::quote(sealed.unit_id(i));
    for (double x : sealed.covariates(i)) out += "," + format_double(x);
    for (int a = 0; a < sealed.arms(); ++a) out += "," + format_double(sealed.outcome(i, a));
    out += '\n';
  }
  return out;
}

inline SealedOutcomes parse_sealed_csv(std::string_view text, const DatasetSchema& schema) {
  const auto records = csv::parse_records(text);
  if (records.empty()) throw ParseError("missing header row", 1);
  const std::size_t p = schema.covariate_count();
  const auto m = static_cast<std::size_t>(schema.arms());
  const std::size_t width = 1 + p + m;
  if (records[0].size() != width) throw ParseError("sealed file header does not match the schema", 1);
  const std::size_t n = records.size() - 1;
  SealedOutcomes::Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  SealedOutcomes::Matrix y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  std::vector<std::string> ids;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != width) throw ParseError("wrong field count", r + 1);
    ids.push_back(rec[0]);
    for (std::size_t k = 1; k < width; ++k) {
      double v = 0.0;
      if (!parse_double(rec[k], v)) throw ParseError("non-numeric value '" + rec[k] + "'", r + 1);
      if (k <= p) {
        x(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(k - 1)) = v;
      } else {
        y(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(k - 1 - p)) = v;
      }
    }
  }
  return {schema, std::move(ids), std::move(x), std::move(y)};
}

// --- estimation -----------------------------------------------------------------

inline json to_json(const MomentEstimates& e, const std::vector<std::string>& arm_names) {
  json cells = json::array();
  for (std::size_t a = 0; a < e.stratified.cells.size(); ++a) {
    json bins = json::array();
    for (const auto& c : e.stratified.cells[a]) {
      bins.push_back({{"units", c.units}, {"assigned", c.assigned}, {"mean_outcome", c.mean_outcome}});
    }
    cells.push_back({{"arm", arm_names[a]}, {"bins", bins}});
  }
  return {{"s_hat", e.s_hat},
          {"sigma_hat", e.sigma_hat},
          {"rho_hat_mean", e.rho_hat_mean},
          {"sigma_eps_hat", e.sigma_eps_hat},
          {"arm_names", arm_names},
          {"per_arm_means", e.per_arm_means},
          {"per_arm_sigma", e.stratified.per_arm_sigma},
          {"naive_sigma", e.stratified.naive_sigma},
          {"rho_hat_matrix", detail::matrix_json(e.rho_hat_matrix)},
          {"n_quantiles", e.n_quantiles},
          {"quantile_diagnostics", cells},
          {"warnings", e.stratified.warnings}};
}

// --- policies -------------------------------------------------------------------

inline json to_json(const Policy& p, const std::vector<std::string>& arm_names) {
  json doc = {{"name", p.name()}, {"arms", arm_names}};
  struct Visitor {
    json& doc;
    void operator()(const UniformPolicy& u) const {
      doc["kind"] = "uniform";
      doc["arm"] = u.arm;
    }
    void operator()(const LinearInteractionPolicy& l) const {
      doc["kind"] = "linear_interaction";
      doc["coefficients"] = detail::matrix_json(l.coef);
    }
    void operator()(const TabularPolicy& t) const {
      doc["kind"] = "tabular";
      doc["fallback_arm"] = t.fallback_arm;
      doc["assignment"] = t.table;
    }
    void operator()(const OraclePolicy& o) const {
      doc["kind"] = "oracle";
      doc["fallback_arm"] = o.assignment.fallback_arm;
      doc["assignment"] = o.assignment.table;
    }
  };
  std::visit(Visitor{doc}, p.kind());
  doc["warnings"] = p.warnings();
  return doc;
}

inline std::string gain_report_csv(std::span<const GainReportRow> rows) {
  std::string out =
      "policy,ipw_value,ipw_se,bootstrap_se,abs_improvement,rel_improvement,diff_bootstrap_se,match_rate\n";
  for (const auto& r : rows) {
    out += csv::quote(r.policy) + "," + format_double(r.ipw_value) + "," + format_double(r.ipw_se) + "," +
           format_double(r.bootstrap_se) + "," + format_double(r.abs_improvement) + "," +
           format_double(r.rel_improvement) + "," + format_double(r.diff_bootstrap_se) + "," +
           format_double(r.match_rate) + "\n";
  }
  return out;
}

// --- analysis -------------------------------------------------------------------

inline json to_json(const StudyProfile& p) {
  json doc = {{"name", p.name},          {"s", p.s},   {"sigma", p.sigma}, {"rho", p.rho},
              {"sigma_eps", p.sigma_eps}, {"m", p.m}, {"M", p.grand_mean}};
  if (p.dist) doc["dist"] = dist_to_json(*p.dist);
  doc["outcome_scale_note"] = p.outcome_scale_note;
  return doc;
}

inline StudyProfile profile_from_json(const json& doc) {
  StudyProfile p;
  p.name = detail::field<std::string>(doc, "name", "study");
  p.s = detail::required<double>(doc, "s");
  p.sigma = detail::required<double>(doc, "sigma");
  p.rho = detail::required<double>(doc, "rho");
  if (!doc.contains("sigma_eps") || doc.at("sigma_eps").is_null()) {
    throw ConfigError("config field 'sigma_eps' is required (profiles must state an assumed prediction error)");
  }
  p.sigma_eps = detail::required<double>(doc, "sigma_eps");
  p.m = detail::required<int>(doc, "m");
  p.grand_mean = detail::field(doc, "M", 0.0);
  if (doc.contains("dist")) p.dist = dist_from_json(doc.at("dist"));
  p.outcome_scale_note = detail::field<std::string>(doc, "outcome_scale_note", "");
  validate(p);
  return p;
}

inline json to_json(const SimSettings& s) {
  return {{"n_individuals", s.n_individuals},
          {"n_replications", s.n_replications},
          {"seed", s.seed},
          {"noise_mode", noise_mode_name(s.noise_mode)}};
}

inline SimSettings settings_from_json(const json& doc, SimSettings s = {}) {
  s.n_individuals = detail::field(doc, "n_individuals", s.n_individuals);
  s.n_replications = detail::field(doc, "n_replications", s.n_replications);
  s.seed = detail::field(doc, "seed", s.seed);
  s.noise_mode = parse_noise_mode(detail::field<std::string>(doc, "noise_mode", std::string(noise_mode_name(s.noise_mode))));
  if (s.n_individuals < 1 || s.n_replications < 1) throw ConfigError("n_individuals and n_replications must be >= 1");
  return s;
}

inline std::string sensitivity_csv(const SensitivityResult& r) {
  std::string out = "parameter,value,gain_mean,gain_se,is_baseline,common_random_numbers\n";
  for (std::size_t k = 0; k < r.grid.size(); ++k) {
    out += std::string(parameter_name(r.parameter)) + "," + format_double(r.grid[k]) + "," +
           format_double(r.gain_mean[k]) + "," + format_double(r.gain_se[k]) + "," +
           (r.baseline_index == k ? "1" : "0") + "," + (r.common_random_numbers ? "1" : "0") + "\n";
  }
  return out;
}

inline std::string counterfactual_csv(std::span<const CounterfactualRow> rows) {
  std::string out = "study,parameter,original_value,swapped_value,baseline_gain,baseline_se,swapped_gain,swapped_se\n";
  for (const auto& r : rows) {
    out += csv::quote(r.study) + "," + std::string(parameter_name(r.parameter)) + "," + format_double(r.original_value) +
           "," + format_double(r.swapped_value) + "," + format_double(r.baseline_gain) + "," +
           format_double(r.baseline_se) + "," + format_double(r.swapped_gain) + "," + format_double(r.swapped_se) + "\n";
  }
  return out;
}

inline std::string elasticity_csv(const ElasticityTable& t) {
  std::string out = "study,label,parameter,value,gain_mean,gain_se,change\n";
  out += csv::quote(t.study) + ",original,,," + format_double(t.baseline_gain) + "," + format_double(t.baseline_se) + ",0\n";
  for (const auto& r : t.rows) {
    out += csv::quote(t.study) + "," + csv::quote(r.label) + "," + std::string(parameter_name(r.parameter)) + "," +
           format_double(r.value) + "," + format_double(r.gain_mean) + "," + format_double(r.gain_se) + "," +
           format_double(r.change) + "\n";
  }
  return out;
}

}  // namespace hetgain
