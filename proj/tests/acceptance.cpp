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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hetgain/hetgain.hpp"
#include "support.hpp"

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, x);
  return buf;
}

// 1. simulate_gain (m = 2, fixed means, no prediction error) vs the closed form.
Outcome analytic_vs_simulation() {
  hetgain::Rng rng(20240101);
  int ok = 0;
  std::string worst;
  double worst_z = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double mu_a = rng.uniform() * 20 - 10, mu_b = rng.uniform() * 20 - 10;
    const double sigma = 0.5 + rng.uniform() * 4.5, rho = rng.uniform() * 1.8 - 0.9;
    hetgain::SimConfig cfg;
    cfg.m = 2;
    cfg.n_individuals = 10000;
    cfg.n_replications = 500;
    cfg.sigma = sigma;
    cfg.rho = rho;
    cfg.dist = hetgain::FixedMeans{{mu_a, mu_b}};
    cfg.seed = 1000 + static_cast<std::uint64_t>(k);
    const auto r = hetgain::simulate_gain(cfg, 0);
    const double g = hetgain::gain_two_arm({mu_a, mu_b, sigma, rho});
    const double err = std::abs(r.gain_mean - g);
    // the floor covers cases where both values underflow to 0 with zero SE
    if (err <= 3 * r.gain_se + 1e-12) ++ok;
    const double z = r.gain_se > 0 ? err / r.gain_se : 0.0;
    if (z > worst_z) {
      worst_z = z;
      worst = "analytic " + fmt(g) + " vs MC " + fmt(r.gain_mean) + " +/- " + fmt(r.gain_se, 2);
    }
  }
  return {ok >= 19, std::to_string(ok) + "/20 within 3 SE; worst |z| = " + fmt(worst_z, 3) + " (" + worst + ")"};
}

// 2. analytic derivatives vs central differences, h = 1e-6.
Outcome derivative_checks() {
  hetgain::Rng rng(77);
  const double h = 1e-6;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const hetgain::TwoArmParams p{rng.uniform() * 4 - 2, rng.uniform() * 4 - 2, 0.2 + rng.uniform() * 2.8,
                                  rng.uniform() * 1.9 - 0.95};
    auto g = [&](double sigma, double rho) { return hetgain::gain_two_arm({p.mu_a, p.mu_b, sigma, rho}); };
    const double fd_s = (g(p.sigma + h, p.rho) - g(p.sigma - h, p.rho)) / (2 * h);
    const double fd_r = (g(p.sigma, p.rho + h) - g(p.sigma, p.rho - h)) / (2 * h);
    worst = std::max(worst, std::abs(hetgain::dgain_dsigma(p) - fd_s) / std::abs(fd_s));
    worst = std::max(worst, std::abs(hetgain::dgain_drho(p) - fd_r) / std::abs(fd_r));
  }
  return {worst <= 1e-6, "max relative error " + fmt(worst, 3) + " over 100 points"};
}

// 3. exact orderings in sigma, rho (analytic) and s (quadrature).
Outcome monotonicity() {
  hetgain::Rng rng(5);
  int violations = 0, checks = 0;
  const std::vector<double> sigmas{0.25, 0.5, 1.0, 2.0, 4.0};
  const std::vector<double> rhos{-0.9, -0.5, 0.0, 0.5, 0.9, 0.95};
  for (int k = 0; k < 50; ++k) {
    const double a = rng.uniform() * 4 - 2, b = rng.uniform() * 4 - 2;
    for (std::size_t i = 1; i < sigmas.size(); ++i) {
      ++checks;
      violations += !(hetgain::gain_two_arm({a, b, sigmas[i], 0.3}) > hetgain::gain_two_arm({a, b, sigmas[i - 1], 0.3}));
    }
    for (std::size_t i = 1; i < rhos.size(); ++i) {
      ++checks;
      violations += !(hetgain::gain_two_arm({a, b, 1.0, rhos[i]}) < hetgain::gain_two_arm({a, b, 1.0, rhos[i - 1]}));
    }
  }
  const std::vector<double> ss{0.0, 0.5, 1.0, 2.0, 5.0};
  for (double sigma : {0.5, 1.0, 3.0}) {
    for (double rho : {-0.5, 0.0, 0.8}) {
      for (std::size_t i = 1; i < ss.size(); ++i) {
        ++checks;
        violations += !(hetgain::expected_gain_over_means(sigma, rho, ss[i]).value <
                        hetgain::expected_gain_over_means(sigma, rho, ss[i - 1]).value);
      }
    }
  }
  return {violations == 0, std::to_string(checks - violations) + "/" + std::to_string(checks) + " orderings hold"};
}

// 4. number-of-arms curves.
Outcome arms_curves() {
  const std::vector<int> ms{2, 5, 10, 25, 50, 100};
  hetgain::SimConfig base;
  base.n_individuals = 10000;
  base.n_replications = 400;
  base.sigma = 10.0;
  base.seed = 6;
  std::map<double, std::vector<hetgain::SweepRow>> normal;
  base.dist = hetgain::NormalMeans{0.0, std::sqrt(10.0)};
  for (double rho : {0.0, 0.5, 0.9}) {
    base.rho = rho;
    normal[rho] = hetgain::sweep_arms(base, ms, 0);
  }
  bool increasing = true, ordered = true;
  for (const auto& [rho, rows] : normal) {
    for (std::size_t i = 1; i < rows.size(); ++i) increasing = increasing && rows[i].gain_mean > rows[i - 1].gain_mean;
  }
  for (std::size_t i = 0; i < ms.size(); ++i) {
    if (ms[i] < 10) continue;
    const auto& g0 = normal[0.0][i];
    const auto& g5 = normal[0.5][i];
    const auto& g9 = normal[0.9][i];
    ordered = ordered && g0.gain_mean - g5.gain_mean > 2 * std::hypot(g0.gain_se, g5.gain_se) &&
              g5.gain_mean - g9.gain_mean > 2 * std::hypot(g5.gain_se, g9.gain_se);
  }

  base.rho = 0.9;
  base.dist = hetgain::spike_slab_with_variance(0.9, 0.0, 50.0);
  const auto spike = hetgain::sweep_arms(base, ms, 0);
  const auto& last = spike.back();
  int peak = -1;
  double peak_margin = -INFINITY;
  for (std::size_t i = 1; i + 1 < spike.size(); ++i) {
    const double margin = (spike[i].gain_mean - last.gain_mean) / std::hypot(spike[i].gain_se, last.gain_se);
    if (margin > peak_margin) {
      peak_margin = margin;
      peak = spike[i].m;
    }
  }
  std::string curve;
  for (const auto& r : spike) curve += " " + std::to_string(r.m) + ":" + fmt(r.gain_mean, 3);
  const bool inverse_u = peak_margin >= 2.0;
  return {increasing && ordered && inverse_u,
          std::string("normal: increasing in m ") + (increasing ? "yes" : "no") + ", rho ordering " +
              (ordered ? "yes" : "no") + "; spike-and-slab peak at m = " + std::to_string(peak) + " exceeds m = 100 by " +
              fmt(peak_margin, 3) + " SE;" + curve};
}

// 5. stratified estimator recovery on nine DGPs.
Outcome estimator_recovery() {
  const double noise_sd = 0.2;
  int ok = 0;
  double worst_sigma = 0.0, worst_rho = 0.0, worst_eps = 0.0;
  std::uint64_t seed = 500;
  for (double sigma : {0.05, 0.1, 0.25}) {
    for (double rho : {0.0, 0.5, 0.8}) {
      const auto dgp = hetgain::one_factor_dgp(5, sigma, rho, {0.0, 0.01, 0.02, 0.03, 0.04}, noise_sd);
      const auto synth = hetgain::generate_synthetic(dgp, 200000, ++seed);
      const auto sp = hetgain::split(synth.dataset, 0.7, seed);
      const auto est = hetgain::estimate_moments(synth.dataset, sp, 10);
      const double es = std::abs(est.sigma_hat / sigma - 1.0);
      const double er = std::abs(est.rho_hat_mean - rho);
      const double ee = std::abs(est.sigma_eps_hat / noise_sd - 1.0);
      worst_sigma = std::max(worst_sigma, es);
      worst_rho = std::max(worst_rho, er);
      worst_eps = std::max(worst_eps, ee);
      ok += es <= 0.15 && er <= 0.07 && ee <= 0.05;
    }
  }
  return {ok == 9, std::to_string(ok) + "/9 DGPs; worst sigma rel. error " + fmt(worst_sigma, 3) + ", worst rho error " +
                       fmt(worst_rho, 3) + ", worst sigma_eps rel. error " + fmt(worst_eps, 3)};
}

// 6. IPW over re-randomized assignments vs the exact oracle value.
Outcome ipw_unbiasedness() {
  const auto dgp = hetgain::one_factor_dgp(3, 1.0, 0.3, {0.0, 0.2, 0.4}, 1.0);
  const auto synth = hetgain::generate_synthetic(dgp, 20000, 66);
  const auto sp = hetgain::split(synth.dataset, 0.5, 66);
  const auto policy = hetgain::fit_ols_policy(synth.dataset.subset(sp.train));
  const double truth = hetgain::evaluate_oracle(policy, synth.sealed);
  const int reps = 500;
  std::vector<double> values(reps);
  for (int r = 0; r < reps; ++r) {
    values[static_cast<std::size_t>(r)] =
        hetgain::evaluate_ipw(policy, hetgain::assign_uniformly(synth.sealed, 9000 + static_cast<std::uint64_t>(r))).value;
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= reps;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double se = std::sqrt(ss / (reps - 1) / reps);
  const double z = std::abs(mean - truth) / se;
  return {z <= 2.0, "mean IPW " + fmt(mean, 6) + " vs oracle " + fmt(truth, 6) + " (" + fmt(z, 3) + " SE)"};
}

// 7. study ordering and elasticity ranking.
Outcome study_ordering() {
  const auto load = [](const char* file) {
    return hetgain::profile_from_json(
        hetgain::json::parse(hetgain::read_file(hetgain::testing::source_path(file))));
  };
  const auto pg = load("profiles/penn_geisinger_like.json");
  const auto wm = load("profiles/walmart_like.json");
  hetgain::SimSettings settings;  // n = 10,000, 200 replications
  bool ok = true;
  std::string detail;
  for (double eps : {0.1, 0.2, 0.4}) {
    const auto a = hetgain::with_parameter(pg, hetgain::Parameter::kSigmaEps, eps);
    const auto b = hetgain::with_parameter(wm, hetgain::Parameter::kSigmaEps, eps);
    const auto ga = hetgain::predict_gain(a, settings);
    const auto gb = hetgain::predict_gain(b, settings);
    const double ratio = ga.gain_mean / gb.gain_mean;
    ok = ok && gb.gain_mean > 0 && ratio >= 4.0;
    detail += "eps " + fmt(eps, 2) + ": ratio " + fmt(ratio, 3) + "; ";
    for (const auto& p : {a, b}) {
      const auto t = hetgain::elasticity_table(p, settings);
      ok = ok && t.best == "1% lower rho";
      detail += p.name + " best: " + t.best + "; ";
    }
  }
  return {ok, detail};
}

// 8. two-arm motivating example, evaluated on sealed potential outcomes.
Outcome motivating_example() {
  auto experiment = [](double a0, double b0) {
    hetgain::SynthDGP dgp;
    dgp.arm_names = {"A", "B"};
    dgp.covariates = {{"x", hetgain::CovariateSpec::Kind::kNormal, 5.0, 1.5, 0.5}};
    dgp.intercepts = {a0, b0};
    dgp.beta.resize(2, 1);
    dgp.beta << 0.5, -1.5;
    dgp.noise_sd = 1.0;
    const auto synth = hetgain::generate_synthetic(dgp, 50000, 8);
    const auto personalized = hetgain::evaluate_oracle(hetgain::fit_ols_policy(synth.dataset), synth.sealed);
    const auto uniform = hetgain::evaluate_oracle(hetgain::best_uniform(synth.dataset), synth.sealed);
    return std::pair{personalized, uniform};
  };
  const auto [p1, u1] = experiment(22, 34);
  const auto [p2, u2] = experiment(17, 39);
  const bool ok = std::abs(p1 - 26.9) <= 0.1 && std::abs(u1 - 26.5) <= 0.1 && std::abs((p1 - u1) - 0.4) <= 0.1 &&
                  std::abs(p2 - u2) <= 0.1;
  return {ok, "experiment 1: personalized " + fmt(p1) + ", uniform " + fmt(u1) + ", gain " + fmt(p1 - u1, 3) +
                  "; experiment 2: personalized " + fmt(p2) + ", uniform " + fmt(u2) + ", gain " + fmt(p2 - u2, 3)};
}

// 9. every CLI command twice (1 and 4 threads) into separate directories.
Outcome cli_determinism() {
  using hetgain::testing::run_cli;
  hetgain::testing::TempDir dir("acceptance_cli");
  const auto src = [](const std::string& rel) { return hetgain::testing::source_path(rel); };
  const std::string data = dir.str("data");
  if (run_cli("synth -c " + src("configs/synth_one_factor.json") + " --n 20000 -o " + data).exit_code != 0) {
    return {false, "synth failed"};
  }
  const std::string csv = data + "/data.csv --schema " + data + "/data.schema.json";
  const std::string pg = src("profiles/penn_geisinger_like.json");
  const std::string wm = src("profiles/walmart_like.json");
  const std::string fast = " --n 2000 --reps 20";
  const std::vector<std::pair<std::string, std::string>> commands{
      {"gain", "gain --mu-a 0 --mu-b 1 --sigma 1 --rho 0.2 --s 0.5 --backend monte_carlo --draws 20000"},
      {"simulate", "simulate -c " + src("configs/simulate.json") + " --n 2000 --reps 20"},
      {"sweep", "sweep -c " + src("configs/sweep_spike_slab.json") + " --m-values 2,5,10 --n 1000 --reps 20"},
      {"synth", "synth -c " + src("configs/synth_motivating.json") + " --n 5000"},
      {"estimate", "estimate --data " + csv},
      {"evaluate", "evaluate --data " + csv + " --sealed " + data + "/data.sealed.csv --policies uniform,ols,oracle --bootstrap 100"},
      {"predict", "predict --profile " + pg + fast},
      {"sensitivity", "sensitivity --profile " + pg + " -c " + src("configs/sensitivity_rho.json") + fast},
      {"counterfactual", "counterfactual --profile " + pg + " --profile " + wm + fast},
      {"elasticity", "elasticity --profile " + pg + " --profile " + wm + fast},
  };
  int identical = 0;
  std::string failures;
  for (const auto& [name, args] : commands) {
    const std::string a = dir.str(name + "_t1"), b = dir.str(name + "_t4");
    const auto ra = run_cli(args + " --threads 1 -o " + a);
    const auto rb = run_cli(args + " --threads 4 -o " + b);
    bool same = ra.exit_code == 0 && rb.exit_code == 0;
    std::size_t files = 0;
    if (same) {
      for (const auto& e : fs::directory_iterator(a)) {
        ++files;
        const auto other = fs::path(b) / e.path().filename();
        same = same && fs::exists(other) && hetgain::read_file(e.path()) == hetgain::read_file(other);
      }
      std::size_t files_b = 0;
      for ([[maybe_unused]] const auto& e : fs::directory_iterator(b)) ++files_b;
      same = same && files == files_b && files > 1;
    }
    if (same) {
      ++identical;
    } else {
      failures += " " + name;
    }
  }
  return {identical == static_cast<int>(commands.size()),
          std::to_string(identical) + "/" + std::to_string(commands.size()) + " commands byte-identical across runs" +
              (failures.empty() ? "" : "; differing:" + failures)};
}

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "analytic vs Monte Carlo gain", 60, analytic_vs_simulation},
      {2, "derivatives vs finite differences", 1, derivative_checks},
      {3, "monotonicity in sigma, rho and s", 60, monotonicity},
      {4, "number-of-arms curves", 600, arms_curves},
      {5, "stratified estimator recovery", 300, estimator_recovery},
      {6, "IPW unbiasedness", 120, ipw_unbiasedness},
      {7, "study ordering and elasticity ranking", 120, study_ordering},
      {8, "motivating example end to end", 60, motivating_example},
      {9, "CLI determinism", 600, cli_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s criterion %d (%s): %s [%.2f s of %.0f s]%s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.c_str(), secs, c.budget_s, in_time ? "" : " over time budget");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
