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

// Closed-form two-arm gain from personalization and its sensitivities.
//
// With potential outcomes (Y_A, Y_B) bivariate normal, common SD sigma and
// correlation rho, the optimal individual policy beats the best uniform arm
// by E[max(Y_A - Y_B, 0)] (labels chosen so mu_B >= mu_A). Y_A - Y_B is
// N(-d, v^2) with d = |mu_B - mu_A| and v = sigma * sqrt(2 (1 - rho)), so
// the gain is the mean of a rectified normal:
//
//   gain = -d * (1 - Phi(d / v)) + v * phi(d / v).

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hetgain/errors.hpp"
#include "hetgain/format.hpp"
#include "hetgain/normal.hpp"
#include "hetgain/rng.hpp"

namespace hetgain {

struct TwoArmParams {
  double mu_a = 0.0;
  double mu_b = 0.0;
  double sigma = 0.0;  // within-treatment SD, >= 0
  double rho = 0.0;    // cross-treatment correlation, in [-1, 1]
};

inline void validate(const TwoArmParams& p) {
  if (!std::isfinite(p.mu_a) || !std::isfinite(p.mu_b) || !std::isfinite(p.sigma) ||
      !std::isfinite(p.rho)) {
    throw DomainError("two-arm parameters must be finite");
  }
  if (p.sigma < 0.0) throw DomainError("sigma must be >= 0, got " + format_double(p.sigma));
  if (p.rho < -1.0 || p.rho > 1.0) {
    throw DomainError("rho must lie in [-1, 1], got " + format_double(p.rho));
  }
}

/// SD of Y_A - Y_B: sigma * sqrt(2 (1 - rho)). Zero iff sigma = 0 or rho = 1.
inline double effective_scale(double sigma, double rho) {
  return sigma * std::sqrt(2.0 * (1.0 - rho));
}

namespace detail {

// Rectified-normal mean E[max(X, 0)] for X ~ N(-d, v^2), d >= 0, v > 0.
inline double rectified_gain(double d, double v) {
  const double z = d / v;
  const double g = v * normal_pdf(z) - d * normal_sf(z);
  return g > 0.0 ? g : 0.0;
}

}  // namespace detail

/// Expected gain of the oracle two-arm policy over the best uniform arm.
/// Symmetric in the arm labels; 0 when v = 0 (identical potential outcomes).
inline double gain_two_arm(const TwoArmParams& p) {
  validate(p);
  const double v = effective_scale(p.sigma, p.rho);
  if (v == 0.0) return 0.0;
  return detail::rectified_gain(std::abs(p.mu_b - p.mu_a), v);
}

/// d gain / d sigma = sqrt(2 (1 - rho)) * phi(d / v), strictly positive.
inline double dgain_dsigma(const TwoArmParams& p) {
  validate(p);
  const double t = std::sqrt(2.0 * (1.0 - p.rho));
  const double v = p.sigma * t;
  if (v == 0.0) throw DomainError("dgain_dsigma undefined at v = 0 (sigma = 0 or rho = 1)");
  return t * normal_pdf(std::abs(p.mu_b - p.mu_a) / v);
}

/// d gain / d rho = sigma * phi(d / v) * dt/drho with t = sqrt(2 (1 - rho)),
/// dt/drho = -1 / t. Strictly negative.
inline double dgain_drho(const TwoArmParams& p) {
  validate(p);
  const double t = std::sqrt(2.0 * (1.0 - p.rho));
  const double v = p.sigma * t;
  if (v == 0.0) throw DomainError("dgain_drho undefined at v = 0 (sigma = 0 or rho = 1)");
  return -p.sigma * normal_pdf(std::abs(p.mu_b - p.mu_a) / v) / t;
}

enum class MeansBackend { kQuadrature, kMonteCarlo };

struct ExpectedGainOptions {
  MeansBackend backend = MeansBackend::kQuadrature;
  std::uint64_t n_draws = 100000;  // Monte Carlo only
  std::uint64_t seed = 1;          // Monte Carlo only
};

struct Estimate {
  double value = 0.0;
  double se = 0.0;  // Monte Carlo standard error, or the quadrature error bound
};

/// Expected two-arm gain when mu_A, mu_B are i.i.d. N(M, s^2). Then
/// d = |mu_B - mu_A| is half-normal with scale sqrt(2) s, and the result does
/// not depend on M.
///
/// The quadrature backend integrates gain(sqrt(2) s u) * 2 phi(u) over
/// u in [0, inf) with adaptive Gauss-Kronrod. The Monte Carlo backend draws
/// u = |N(0, 1)| from a seeded stream; reusing the seed across s gives common
/// random numbers, under which the estimate is exactly non-increasing in s.
inline Estimate expected_gain_over_means(double sigma, double rho, double s,
                                         const ExpectedGainOptions& opts = {}) {
  validate(TwoArmParams{0.0, 0.0, sigma, rho});
  if (!std::isfinite(s) || s < 0.0) throw DomainError("s must be finite and >= 0");
  const double v = effective_scale(sigma, rho);
  if (v == 0.0) return {0.0, 0.0};
  if (s == 0.0) return {detail::rectified_gain(0.0, v), 0.0};

  const double scale = std::numbers::sqrt2 * s;
  if (opts.backend == MeansBackend::kQuadrature) {
    auto integrand = [&](double u) { return detail::rectified_gain(scale * u, v) * 2.0 * normal_pdf(u); };
    double err = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        integrand, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-13, &err);
    return {value, err};
  }

  if (opts.n_draws == 0) throw DomainError("n_draws must be positive");
  Rng rng(opts.seed, {0x6d65616e73ULL});
  double mean = 0.0;
  double m2 = 0.0;
  for (std::uint64_t k = 0; k < opts.n_draws; ++k) {
    const double g = detail::rectified_gain(scale * std::abs(rng.normal()), v);
    const double delta = g - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (g - mean);
  }
  const double n = static_cast<double>(opts.n_draws);
  const double se = opts.n_draws > 1 ? std::sqrt(m2 / (n - 1.0) / n) : 0.0;
  return {mean, se};
}

}  // namespace hetgain
