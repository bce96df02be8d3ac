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

// Command-line front end. Every subcommand reads an optional JSON config,
// applies flag overrides on top of it, writes its outputs atomically into the
// output directory and records the resolved config next to them.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hetgain/hetgain.hpp"

namespace fs = std::filesystem;
using hetgain::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

json load_json(const std::string& path) {
  try {
    return json::parse(hetgain::read_file(path));
  } catch (const json::parse_error& e) {
    throw hetgain::ConfigError("malformed JSON in " + path + ": " + e.what());
  }
}

/// Shared plumbing for one subcommand: config file, flag overrides, output
/// directory and thread count.
class Command {
 public:
  Command(CLI::App& app, std::string name, std::string description)
      : name_(std::move(name)), sub_(app.add_subcommand(name_, std::move(description))) {
    sub_->add_option("--config,-c", config_path_, "JSON config file (a resolved_config.json is accepted too)");
    sub_->add_option("--out-dir,-o", out_dir_, "output directory (default: $HETGAIN_OUT_DIR or .)");
    sub_->add_option("--threads", threads_, "worker threads; 0 = all cores")->check(CLI::NonNegativeNumber);
  }

  CLI::App* app() const { return sub_; }
  const std::string& name() const { return name_; }
  unsigned threads() const { return threads_; }

  /// Flag whose value, when given, is written into the config at \p pointer.
  template <typename T>
  CLI::Option* override(const std::string& flag, const std::string& pointer, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = sub_->add_option(flag, *value, help);
    overrides_.push_back([opt, value, pointer](json& doc) {
      if (opt->count() > 0) doc[json::json_pointer(pointer)] = *value;
    });
    return opt;
  }

  /// Flag taking a JSON file whose parsed contents land at \p pointer.
  CLI::Option* file_override(const std::string& flag, const std::string& pointer, const std::string& help) {
    auto value = std::make_shared<std::string>();
    CLI::Option* opt = sub_->add_option(flag, *value, help);
    overrides_.push_back([opt, value, pointer](json& doc) {
      if (opt->count() > 0) doc[json::json_pointer(pointer)] = load_json(*value);
    });
    return opt;
  }

  /// Repeatable flag of JSON files collected into an array at \p pointer.
  CLI::Option* files_override(const std::string& flag, const std::string& pointer, const std::string& help) {
    auto value = std::make_shared<std::vector<std::string>>();
    CLI::Option* opt = sub_->add_option(flag, *value, help);
    overrides_.push_back([opt, value, pointer](json& doc) {
      if (opt->count() == 0) return;
      json arr = json::array();
      for (const auto& path : *value) arr.push_back(load_json(path));
      doc[json::json_pointer(pointer)] = arr;
    });
    return opt;
  }

  json config() const {
    json doc = json::object();
    if (!config_path_.empty()) {
      doc = load_json(config_path_);
      if (!doc.is_object()) throw hetgain::ConfigError("config file must hold a JSON object");
      if (doc.contains("command") && doc.contains("config")) {
        if (doc.at("command") != name_) {
          throw hetgain::ConfigError("config was recorded for command '" + doc.at("command").get<std::string>() + "'");
        }
        json inner = doc.at("config");
        doc = inner;
      }
    }
    for (const auto& apply : overrides_) apply(doc);
    return doc;
  }

  fs::path out_dir() const {
    if (!out_dir_.empty()) return out_dir_;
    if (const char* env = std::getenv("HETGAIN_OUT_DIR"); env != nullptr && *env != '\0') return env;
    return ".";
  }

  void write(const std::string& file, std::string_view contents) {
    hetgain::write_file_atomic(out_dir() / file, contents);
    outputs_.push_back(file);
    std::cout << "wrote " << (out_dir() / file).string() << "\n";
  }

  void write_json(const std::string& file, const json& doc) { write(file, doc.dump(2) + "\n"); }

  /// Records the resolved config; call last so the output list is complete.
  void finish(const json& resolved, std::uint64_t seed) {
    outputs_.push_back("resolved_config.json");
    const json doc = {{"command", name_},
                      {"version", HETGAIN_VERSION},
                      {"seed", seed},
                      {"outputs", outputs_},
                      {"config", resolved}};
    hetgain::write_file_atomic(out_dir() / "resolved_config.json", doc.dump(2) + "\n");
  }

 private:
  std::string name_;
  CLI::App* sub_;
  std::string config_path_;
  std::string out_dir_;
  unsigned threads_ = 0;
  std::vector<std::function<void(json&)>> overrides_;
  std::vector<std::string> outputs_;
};

template <typename T>
T get_or(const json& doc, std::string_view key, const T& fallback) {
  return hetgain::detail::field(doc, key, fallback);
}

template <typename T>
T get_required(const json& doc, std::string_view key) {
  return hetgain::detail::required<T>(doc, key);
}

const json& required_object(const json& doc, const std::string& key) {
  if (!doc.contains(key) || !doc.at(key).is_object()) {
    throw hetgain::ConfigError("config field '" + key + "' is required and must be an object");
  }
  return doc.at(key);
}

// --- gain -----------------------------------------------------------------------

void register_gain(CLI::App& app, std::vector<std::function<void()>>& handlers) {
  auto cmd = std::make_shared<Command>(app, "gain", "two-arm gain from personalization");
  cmd->override<double>("--mu-a", "/mu_a", "average response of arm A");
  cmd->override<double>("--mu-b", "/mu_b", "average response of arm B");
  cmd->override<double>("--sigma", "/sigma", "within-treatment heterogeneity");
  cmd->override<double>("--rho", "/rho", "cross-treatment correlation");
  cmd->override<double>("--s", "/s", "SD of average responses; adds the expected gain over means");
  cmd->override<std::string>("--backend", "/backend", "quadrature or monte_carlo")
      ->check(CLI::IsMember({"quadrature", "monte_carlo"}));
  auto* quad = cmd->app()->add_flag("--quadrature", "shorthand for --backend quadrature");
  cmd->override<std::size_t>("--draws", "/n_draws", "Monte Carlo draws");
  cmd->override<std::uint64_t>("--seed", "/seed", "Monte Carlo seed");

  cmd->app()->callback([cmd, quad, &handlers] {
    handlers.push_back([cmd, quad] {
      json doc = cmd->config();
      if (quad->count() > 0) doc["backend"] = "quadrature";
      const hetgain::TwoArmParams p{get_required<double>(doc, "mu_a"), get_required<double>(doc, "mu_b"),
                                    get_required<double>(doc, "sigma"), get_required<double>(doc, "rho")};
      hetgain::validate(p);
      json resolved = {{"mu_a", p.mu_a}, {"mu_b", p.mu_b}, {"sigma", p.sigma}, {"rho", p.rho}};
      json out = {{"gain", hetgain::gain_two_arm(p)}};
      if (hetgain::effective_scale(p.sigma, p.rho) > 0.0) {
        out["dgain_dsigma"] = hetgain::dgain_dsigma(p);
        out["dgain_drho"] = hetgain::dgain_drho(p);
      }
      std::cout << "gain " << hetgain::format_double(out["gain"].get<double>()) << "\n";

      std::uint64_t seed = get_or<std::uint64_t>(doc, "seed", 1);
      if (doc.contains("s")) {
        hetgain::ExpectedGainOptions opts;
        const auto backend = get_or<std::string>(doc, "backend", "quadrature");
        if (backend != "quadrature" && backend != "monte_carlo") {
          throw hetgain::ConfigError("config field 'backend' must be quadrature or monte_carlo");
        }
        opts.backend = backend == "quadrature" ? hetgain::MeansBackend::kQuadrature : hetgain::MeansBackend::kMonteCarlo;
        opts.n_draws = get_or<std::size_t>(doc, "n_draws", opts.n_draws);
        opts.seed = seed;
        const double s = get_required<double>(doc, "s");
        const hetgain::Estimate e = hetgain::expected_gain_over_means(p.sigma, p.rho, s, opts);
        out["expected_gain"] = {{"value", e.value}, {"se", e.se}};
        resolved["s"] = s;
        resolved["backend"] = backend;
        resolved["n_draws"] = opts.n_draws;
        std::cout << "expected_gain " << hetgain::format_double(e.value) << " se " << hetgain::format_double(e.se)
                  << "\n";
      }
      resolved["seed"] = seed;
      cmd->write_json("gain.json", out);
      cmd->finish(resolved, seed);
    });
  });
}

// --- simulate / sweep -----------------------------------------------------------

void add_sim_overrides(Command& cmd) {
  cmd.override<int>("--m", "/m", "number of arms");
  cmd.override<int>("--n", "/n_individuals", "individuals per replication");
  cmd.override<int>("--reps", "/n_replications", "replications");
  cmd.override<double>("--sigma", "/sigma", "within-treatment heterogeneity");
  cmd.override<double>("--rho", "/rho", "cross-treatment correlation");
  cmd.override<double>("--sigma-eps", "/sigma_eps", "prediction error SD");
  cmd.override<std::string>("--noise-mode", "/noise_mode", "per_cell or per_individual");
  cmd.override<std::uint64_t>("--seed", "/seed", "master seed");
  cmd.override<std::string>("--dist-kind", "/dist/kind", "fixed, normal or spike_slab");
  cmd.override<double>("--s", "/dist/s", "SD of average responses");
  cmd.override<double>("--grand-mean", "/dist/M", "grand mean of average responses");
  cmd.override<double>("--pi", "/dist/pi", "spike probability");
}

void register_simulate(CLI::App& app, std::vector<std::function<void()>>& handlers) {
  auto cmd = std::make_shared<Command>(app, "simulate", "Monte Carlo gain from personalization");
  add_sim_overrides(*cmd);
  cmd->app()->callback([cmd, &handlers] {
    handlers.push_back([cmd] {
      const hetgain::SimConfig cfg = hetgain::sim_config_from_json(cmd->config());
      hetgain::validate(cfg);
      const hetgain::SimResult r = hetgain::simulate_gain(cfg, cmd->threads());
      std::cout << "gain " << hetgain::format_double(r.gain_mean) << " se " << hetgain::format_double(r.gain_se)
                << "\n";
      cmd->write_json("sim_result.json", hetgain::to_json(r));
      cmd->write("replications.csv", hetgain::replications_csv(r));
      cmd->finish(hetgain::to_json(cfg), cfg.seed);
    });
  });
}

void register_sweep(CLI::App& app, std::vector<std::function<void()>>& handlers) {
  auto cmd = std::make_shared<Command>(app, "sweep", "gain as a function of the number of arms");
  add_sim_overrides(*cmd);
  cmd->override<std::vector<int>>("--m-values", "/m_values", "comma-separated arm counts")->delimiter(',');
  cmd->app()->callback([cmd, &handlers] {
    handlers.push_back([cmd] {
      json doc = cmd->config();
      const auto m_values = get_required<std::vector<int>>(doc, "m_values");
      if (!doc.contains("m") && !m_values.empty()) doc["m"] = m_values.front();
      const hetgain::SimConfig cfg = hetgain::sim_config_from_json(doc);
      const auto rows = hetgain::sweep_arms(cfg, m_values, cmd->threads());
      cmd->write("sweep.csv", hetgain::sweep_csv(rows));
      json resolved = hetgain::to_json(cfg);
      resolved.erase("m");
      resolved["m_values"] = m_values;
      cmd->finish(resolved, cfg.seed);
    });
  });
}

// --- synth ----------------------------------------------------------------------

void register_synth(CLI::App& app, std::vector<std::function<void()>>& handlers) {
  auto cmd = std::make_shared<Command>(app, "synth", "synthetic experiment with sealed potential outcomes");
  cmd->file_override("--dgp", "/dgp", "JSON file describing the data-generating process");
  cmd->override<std::size_t>("--n", "/n", "number of units");
  cmd->override<std::uint64_t>("--seed", "/seed", "seed");
  cmd->override<std::string>("--prefix", "/prefix", "output file prefix (default: data)");
  cmd->app()->callback([cmd, &handlers] {
    handlers.push_back([cmd] {
      const json doc = cmd->config();
      const hetgain::SynthDGP dgp = hetgain::dgp_from_json(required_object(doc, "dgp"));
      const auto n = get_required<std::size_t>(doc, "n");
      const auto seed = get_or<std::uint64_t>(doc, "seed", 1);
      const auto prefix = get_or<std::string>(doc, "prefix", "data");
      const hetgain::SyntheticData synth = hetgain::generate_synthetic(dgp, n, seed);
      cmd->write(prefix + ".csv", hetgain::to_csv(synth.dataset));
      cmd->write_json(prefix + ".schema.json", hetgain::to_json(synth.dataset.schema()));
      cmd->write(prefix + ".sealed.csv", hetgain::sealed_csv(synth.sealed));
      cmd->write_json(prefix + ".truth.json", hetgain::to_json(synth.truth));
      json resolved = {{"dgp", doc.at("dgp")}, {"n", n}, {"seed", seed}, {"prefix", prefix}};
      cmd->finish(resolved, seed);
    });
  });
}

// --- estimate / evaluate --------------------------------------------------------

void add_data_overrides(Command& cmd) {
  cmd.override<std::string>("--data", "/data", "experiment CSV");
  cmd.override<std::string>("--schema", "/schema", "schema JSON (arm order and covariate kinds)");
  cmd.override<std::vector<std::string>>("--arms", "/arms", "comma-separated arm names")->delimiter(',');
  cmd.override<double>("--train-frac", "/train_frac", "training fraction");
  cmd.override<std::uint64_t>("--seed", "/seed", "split seed");
}

hetgain::ExperimentDataset load_dataset(const json& doc, const std::string& context) {
  const auto path = get_required<std::string>(doc, "data");
  const std::string text = hetgain::read_file(path);
  hetgain::DatasetSchema schema;
  if (doc.contains("schema")) {
    schema = hetgain::schema_from_json(load_json(get_required<std::string>(doc, "schema")));
  } else {
    schema = hetgain::infer_schema(text);
  }
  if (doc.contains("arms")) {
    schema.arm_names = get_required<std::vector<std::string>>(doc, "arms");
    if (schema.arm_names.size() < 2) throw hetgain::ConfigError("config field 'arms' needs at least two arms");
  }
  hetgain::ExperimentDataset data = hetgain::parse_csv(text, schema);
  hetgain::require_nonempty_arms(data, context);
  return data;
}

json data_resolved(const json& doc) {
  json out = {{"data", get_required<std::string>(doc, "data")}};
  if (doc.contains("schema")) out["schema"] = doc.at("schema");
  if (doc.contains("arms")) out["arms"] = doc.at("arms");
  return out;
}

void register_estimate(CLI::App& app, std::vector<std::function<void()>>& handlers) {
  auto cmd = std::make_shared<Command>(app, "estimate", "moment estimates from an experiment CSV");
  add_data_overrides(*cmd);
  cmd->override<std::size_t>("--quantiles", "/quantiles", "strata per arm");
  cmd->app()->callback([cmd, &handlers] {
    handlers.push_back([cmd] {
      const json doc = cmd->config();
      const hetgain::ExperimentDataset data = load_dataset(doc, "estimate");
      const auto frac = get_or(doc, "train_frac", 0.7);
      const auto seed = get_or<std::uint64_t>(doc, "seed", 1);
      const auto nq = get_or<std::size_t>(doc, "quantiles", 10);
      const hetgain::TrainTestSplit sp = hetgain::split(data, frac, seed);
      const hetgain::MomentEstimates est = hetgain::estimate_moments(data, sp, nq);
      for (const auto& w : est.stratified.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "sigma_hat " << hetgain::format_double(est.sigma_hat) << " rho_hat "
                << hetgain::format_double(est.rho_hat_mean) << " s_hat " << hetgain::format_double(est.s_hat)
                << "\n";
      cmd->write_json("moments.json", hetgain::to_json(est, data.arm_names()));
      json resolved = data_resolved(doc);
      resolved["train_frac"] = frac;
      resolved["quantiles"] = nq;
      resolved["seed"] = seed;
      cmd->finish(resolved, seed);
    });
  });
}

void register_evaluate(CLI::App& app, std::vector<std::function<void()>>& handlers) {
  auto cmd = std::make_shared<Command>(app, "evaluate", "IPW evaluation of personalization policies");
  add_data_overrides(*cmd);
  cmd->override<std::vector<std::string>>("--policies", "/policies", "comma-separated: uniform, ols, oracle")
      ->delimiter(',');
  cmd->override<std::string>("--sealed", "/sealed", "sealed potential outcomes from synth");
  cmd->override<std::size_t>("--bootstrap", "/bootstrap_reps", "bootstrap replications");
  cmd->app()->callback([cmd, &handlers] {
    handlers.push_back([cmd] {
      const json doc = cmd->config();
      const hetgain::ExperimentDataset data = load_dataset(doc, "evaluate");
      const auto frac = get_or(doc, "train_frac", 0.7);
      const auto seed = get_or<std::uint64_t>(doc, "seed", 1);
      const auto names = get_or<std::vector<std::string>>(doc, "policies", {"uniform", "ols"});
      const auto reps = get_or<std::size_t>(doc, "bootstrap_reps", 1000);

      std::optional<hetgain::SealedOutcomes> sealed;
      if (doc.contains("sealed")) {
        sealed = hetgain::parse_sealed_csv(hetgain::read_file(get_required<std::string>(doc, "sealed")),
                                           data.schema());
      }
      const hetgain::TrainTestSplit sp = hetgain::split(data, frac, seed);
      const hetgain::ExperimentDataset train = data.subset(sp.train);

      std::vector<hetgain::Policy> policies;
      for (const auto& name : names) {
        if (name == "uniform") continue;  // always reported as the benchmark row
        if (name == "ols") {
          policies.push_back(hetgain::fit_ols_policy(train));
        } else if (name == "oracle") {
          if (!sealed) throw hetgain::ConfigError("policy 'oracle' needs config field 'sealed'");
          policies.push_back(hetgain::oracle_policy(*sealed));
        } else {
          throw hetgain::ConfigError("config field 'policies': unknown policy '" + name + "'");
        }
      }
      hetgain::GainReportOptions opts;
      opts.bootstrap_reps = reps;
      opts.seed = seed;
      opts.threads = cmd->threads();
      const auto rows = hetgain::gain_report(policies, data, sp, opts);
      cmd->write("gain_report.csv", hetgain::gain_report_csv(rows));

      std::vector<hetgain::Policy> all{hetgain::best_uniform(train)};
      all.insert(all.end(), policies.begin(), policies.end());
      json pol = json::array();
      for (const auto& p : all) pol.push_back(hetgain::to_json(p, data.arm_names()));
      cmd->write_json("policies.json", pol);

      if (sealed) {
        std::map<std::string, std::size_t, std::less<>> index;
        for (std::size_t i = 0; i < sealed->size(); ++i) index.emplace(sealed->unit_id(i), i);
        std::vector<std::size_t> rows_in_test;
        for (std::size_t i : sp.test) {
          const auto it = index.find(data.unit_id(i));
          if (it == index.end()) throw hetgain::ConfigError("sealed file lacks unit '" + data.unit_id(i) + "'");
          rows_in_test.push_back(it->second);
        }
        const hetgain::SealedOutcomes holdout = sealed->subset(rows_in_test);
        std::string csv = "policy,oracle_value\n";
        for (const auto& p : all) {
          csv += hetgain::csv::quote(p.name()) + "," + hetgain::format_double(hetgain::evaluate_oracle(p, holdout)) +
                 "\n";
        }
        cmd->write("oracle_values.csv", csv);
      }
      for (const auto& r : rows) {
        std::cout << r.policy << " ipw " << hetgain::format_double(r.ipw_value) << " improvement "
                  << hetgain::format_double(r.abs_improvement) << "\n";
      }
      json resolved = data_resolved(doc);
      if (doc.contains("sealed")) resolved["sealed"] = doc.at("sealed");
      resolved["policies"] = names;
      resolved["train_frac"] = frac;
      resolved["bootstrap_reps"] = reps;
      resolved["seed"] = seed;
      cmd->finish(resolved, seed);
    });
  });
}

// --- analysis -------------------------------------------------------------------

void add_settings_overrides(Command& cmd) {
  cmd.override<int>("--n", "/settings/n_individuals", "individuals per replication");
  cmd.override<int>("--reps", "/settings/n_replications", "replications");
  cmd.override<std::uint64_t>("--seed", "/settings/seed", "master seed");
  cmd.override<std::string>("--noise-mode", "/settings/noise_mode", "per_cell or per_individual");
}

void add_profile_overrides(Command& cmd) {
  cmd.file_override("--profile", "/profile", "study profile JSON");
  cmd.override<double>("--sigma", "/profile/sigma", "override the profile's sigma");
  cmd.override<double>("--rho", "/profile/rho", "override the profile's rho");
  cmd.override<double>("--s", "/profile/s", "override the profile's s");
  cmd.override<double>("--sigma-eps", "/profile/sigma_eps", "override the profile's sigma_eps");
  cmd.override<int>("--m", "/profile/m", "override the profile's number of arms");
}

hetgain::SimSettings settings_of(const json& doc, const Command& cmd) {
  hetgain::SimSettings s;
  if (doc.contains("settings")) s = hetgain::settings_from_json(doc.at("settings"));
  s.threads = cmd.threads();
  return s;
}

std::vector<hetgain::StudyProfile> profiles_of(const json& doc) {
  std::vector<hetgain::StudyProfile> out;
  if (doc.contains("profile")) out.push_back(hetgain::profile_from_json(required_object(doc, "profile")));
  if (doc.contains("profiles")) {
    if (!doc.at("profiles").is_array()) throw hetgain::ConfigError("config field 'profiles' must be an array");
    for (const auto& p : doc.at("profiles")) out.push_back(hetgain::profile_from_json(p));
  }
  if (out.empty()) throw hetgain::ConfigError("config field 'profile' is required");
  return out;
}

json profiles_json(const std::vector<hetgain::StudyProfile>& ps) {
  json arr = json::array();
  for (const auto& p : ps) arr.push_back(hetgain::to_json(p));
  return arr;
}

void register_predict(CLI::App& app, std::vector<std::function<void()>>& handlers) {
  auto cmd = std::make_shared<Command>(app, "predict", "simulated gain for study profiles");
  add_profile_overrides(*cmd);
  add_settings_overrides(*cmd);
  cmd->app()->callback([cmd, &handlers] {
    handlers.push_back([cmd] {
      const json doc = cmd->config();
      const auto profiles = profiles_of(doc);
      const hetgain::SimSettings settings = settings_of(doc, *cmd);
      std::string csv = "study,gain_mean,gain_se,v_personalized_mean,v_uniform_mean\n";
      json out = json::array();
      for (const auto& p : profiles) {
        const hetgain::GainPrediction g = hetgain::predict_gain(p, settings);
        csv += hetgain::csv::quote(p.name) + "," + hetgain::format_double(g.gain_mean) + "," +
               hetgain::format_double(g.gain_se) + "," + hetgain::format_double(g.v_personalized_mean) + "," +
               hetgain::format_double(g.v_uniform_mean) + "\n";
        out.push_back({{"study", p.name},
                       {"gain_mean", g.gain_mean},
                       {"gain_se", g.gain_se},
                       {"v_personalized_mean", g.v_personalized_mean},
                       {"v_uniform_mean", g.v_uniform_mean}});
        std::cout << p.name << " gain " << hetgain::format_double(g.gain_mean) << " se "
                  << hetgain::format_double(g.gain_se) << "\n";
      }
      cmd->write("prediction.csv", csv);
      cmd->write_json("prediction.json", out);
      cmd->finish({{"profiles", profiles_json(profiles)}, {"settings", hetgain::to_json(settings)}}, settings.seed);
    });
  });
}

void register_sensitivity(CLI::App& app, std::vector<std::function<void()>>& handlers) {
  auto cmd = std::make_shared<Command>(app, "sensitivity", "gain along a grid of one parameter");
  add_profile_overrides(*cmd);
  add_settings_overrides(*cmd);
  cmd->override<std::string>("--parameter", "/parameter", "s, sigma, rho, sigma_eps or m");
  cmd->override<std::vector<double>>("--grid", "/grid", "comma-separated parameter values")->delimiter(',');
  cmd->app()->callback([cmd, &handlers] {
    handlers.push_back([cmd] {
      const json doc = cmd->config();
      const auto profiles = profiles_of(doc);
      if (profiles.size() != 1) throw hetgain::ConfigError("sensitivity takes exactly one profile");
      const hetgain::SimSettings settings = settings_of(doc, *cmd);
      const auto param = hetgain::parse_parameter(get_required<std::string>(doc, "parameter"));
      const auto grid = get_required<std::vector<double>>(doc, "grid");
      const hetgain::SensitivityResult r = hetgain::sensitivity_sweep(profiles.front(), param, grid, settings);
      cmd->write("sensitivity.csv", hetgain::sensitivity_csv(r));
      cmd->finish({{"profile", hetgain::to_json(profiles.front())},
                   {"settings", hetgain::to_json(settings)},
                   {"parameter", hetgain::parameter_name(param)},
                   {"grid", r.grid}},
                  settings.seed);
    });
  });
}

void register_counterfactual(CLI::App& app, std::vector<std::function<void()>>& handlers) {
  auto cmd = std::make_shared<Command>(app, "counterfactual", "swap one parameter between two studies");
  cmd->files_override("--profile", "/profiles", "study profile JSON (give exactly two)");
  add_settings_overrides(*cmd);
  cmd->override<std::vector<std::string>>("--parameters", "/parameters", "comma-separated parameters to swap")
      ->delimiter(',');
  cmd->app()->callback([cmd, &handlers] {
    handlers.push_back([cmd] {
      const json doc = cmd->config();
      const auto profiles = profiles_of(doc);
      if (profiles.size() != 2) throw hetgain::ConfigError("config field 'profiles' must hold exactly two profiles");
      const hetgain::SimSettings settings = settings_of(doc, *cmd);
      const auto names = get_or<std::vector<std::string>>(doc, "parameters", {"sigma", "rho"});
      std::vector<hetgain::CounterfactualRow> rows;
      for (const auto& name : names) {
        const auto part = hetgain::counterfactual_swap(profiles[0], profiles[1], hetgain::parse_parameter(name), settings);
        rows.insert(rows.end(), part.begin(), part.end());
      }
      cmd->write("counterfactual.csv", hetgain::counterfactual_csv(rows));
      cmd->finish({{"profiles", profiles_json(profiles)}, {"settings", hetgain::to_json(settings)}, {"parameters", names}},
                  settings.seed);
    });
  });
}

void register_elasticity(CLI::App& app, std::vector<std::function<void()>>& handlers) {
  auto cmd = std::make_shared<Command>(app, "elasticity", "gain after a small improvement of each parameter");
  cmd->files_override("--profile", "/profiles", "study profile JSON (repeatable)");
  add_settings_overrides(*cmd);
  cmd->override<double>("--delta", "/delta", "relative step (default 0.01)");
  cmd->override<std::string>("--rho-step", "/rho_step", "absolute (rho - delta) or relative (rho * (1 - delta))");
  cmd->app()->callback([cmd, &handlers] {
    handlers.push_back([cmd] {
      const json doc = cmd->config();
      const auto profiles = profiles_of(doc);
      const hetgain::SimSettings settings = settings_of(doc, *cmd);
      const auto delta = get_or(doc, "delta", 0.01);
      const auto step_name = get_or<std::string>(doc, "rho_step", "absolute");
      if (step_name != "absolute" && step_name != "relative") {
        throw hetgain::ConfigError("config field 'rho_step' must be absolute or relative");
      }
      const auto step = step_name == "absolute" ? hetgain::RhoStep::kAbsolute : hetgain::RhoStep::kRelative;
      std::string csv;
      json out = json::array();
      for (const auto& p : profiles) {
        const hetgain::ElasticityTable t = hetgain::elasticity_table(p, settings, delta, step);
        std::string part = hetgain::elasticity_csv(t);
        csv += csv.empty() ? part : part.substr(part.find('\n') + 1);
        out.push_back({{"study", t.study}, {"baseline_gain", t.baseline_gain}, {"best", t.best}});
        std::cout << t.study << " largest gain after: " << t.best << "\n";
      }
      cmd->write("elasticity.csv", csv);
      cmd->write_json("elasticity.json", out);
      cmd->finish({{"profiles", profiles_json(profiles)},
                   {"settings", hetgain::to_json(settings)},
                   {"delta", delta},
                   {"rho_step", step_name}},
                  settings.seed);
    });
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hetgain: when is treatment-effect heterogeneity worth personalizing?"};
  app.set_version_flag("--version", HETGAIN_VERSION);
  app.require_subcommand(1);
  std::vector<std::function<void()>> handlers;
  register_gain(app, handlers);
  register_simulate(app, handlers);
  register_sweep(app, handlers);
  register_synth(app, handlers);
  register_estimate(app, handlers);
  register_evaluate(app, handlers);
  register_predict(app, handlers);
  register_sensitivity(app, handlers);
  register_counterfactual(app, handlers);
  register_elasticity(app, handlers);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  try {
    for (const auto& run : handlers) run();
  } catch (const std::invalid_argument& e) {  // ConfigError, DomainError
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const hetgain::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const json::exception& e) {
    std::cerr << "error: invalid config: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
