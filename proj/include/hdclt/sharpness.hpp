// Copyright 2026 The hdclt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "hdclt/gaussian_special.hpp"
#include "hdclt/models.hpp"
#include "hdclt/parallel.hpp"
#include "hdclt/rng.hpp"

// Lower-bound machinery for the normalized exponential model. W_1 =
// (Gamma(n) - n)/sqrt(n) has an exact tail, so everything but the
// Monte Carlo cross-check is a deterministic function of (n, d).

namespace hdclt {

/// gamma = E(E - 1)^3 for a standard exponential E.
inline constexpr double kExpSkewness = 2.0;

/// 2 sqrt(2) / (3e): first-order constant of the scaled statistic.
inline double p1_limit_constant() { return std::numbers::sqrt2 * kExpSkewness / (3.0 * std::numbers::e); }

/// Solution of Phi(x)^d = e^{-1}, i.e. the upper quantile at 1 - e^{-1/d}.
inline double x_threshold(double d) {
  if (!(d >= 3.0)) throw std::domain_error("x_threshold: d must be at least 3");
  const double x = std_normal_quantile_upper(-std::expm1(-1.0 / d));
  const double resid = std::exp(d * log_std_normal_cdf(x)) - std::exp(-1.0);
  if (!(std::abs(resid) <= 1e-12)) throw std::runtime_error("x_threshold: residual check failed");
  return x;
}

/// P(W_1 > x) = Q(n, n + x sqrt(n)).
inline double exact_exp_tail(double n, double x) {
  if (!(n >= 1.0)) throw std::domain_error("exact_exp_tail: n must be at least 1");
  const double arg = n + x * std::sqrt(n);
  if (arg <= 0.0) return 1.0;
  return regularized_gamma_q(n, arg);
}

struct SharpnessPoint {
  double n = 0.0;
  double d = 0.0;
  double x_n = 0.0;
  double lambda_n = 0.0;    // d P(W_1 > x_n)
  double gauss_term = 0.0;  // d (1 - Phi(x_n))
  double statistic = 0.0;   // sqrt(n / log^3 d) |e^{-lambda_n} - e^{-gauss_term}|
  double ratio_mdp = 0.0;   // P(W_1 > x_n) / (1 - Phi(x_n))
  double log3d_over_n = 0.0;
  double d_log3d_over_n = 0.0;
  // Poisson-approximation slack d p^2 for both tails.
  double poisson_slack_w = 0.0;
  double poisson_slack_z = 0.0;
};

inline SharpnessPoint p1_statistic(double n, double d) {
  SharpnessPoint p;
  p.n = n;
  p.d = d;
  p.x_n = x_threshold(d);
  const double tw = exact_exp_tail(n, p.x_n);
  const double tz = std_normal_sf(p.x_n);
  p.lambda_n = d * tw;
  p.gauss_term = d * tz;
  const double l3 = std::pow(std::log(d), 3.0);
  p.log3d_over_n = l3 / n;
  p.d_log3d_over_n = d * l3 / n;
  p.statistic = std::sqrt(n / l3) * std::abs(std::exp(-p.lambda_n) - std::exp(-p.gauss_term));
  p.ratio_mdp = tw / tz;
  p.poisson_slack_w = d * tw * tw;
  p.poisson_slack_z = d * tz * tz;
  return p;
}

struct MdpCheck {
  double exact_ratio = 0.0;   // P(W_1 > x) / (1 - Phi(x))
  double cramer_ratio = 0.0;  // exp(gamma x^3 / (6 sqrt n))
  double relative_gap = 0.0;
  bool regime_violated = false;  // x^3 / sqrt(n) not small
};

inline MdpCheck mdp_ratio_at(double n, double x) {
  MdpCheck m;
  m.exact_ratio = exact_exp_tail(n, x) / std_normal_sf(x);
  m.cramer_ratio = std::exp(kExpSkewness * x * x * x / (6.0 * std::sqrt(n)));
  m.relative_gap = std::abs(m.exact_ratio / m.cramer_ratio - 1.0);
  m.regime_violated = x * x * x / std::sqrt(n) > 1.0;
  return m;
}

inline MdpCheck mdp_ratio_check(double n, double d) { return mdp_ratio_at(n, x_threshold(d)); }

enum class CrossCheckEntries { exponential, gaussian };

struct CrossCheckReport {
  double empirical = 0.0;  // P_hat(max_j W_j <= x_n) - e^{-1}
  double se = 0.0;
  double analytic = 0.0;   // e^{-lambda_n} - e^{-d(1-Phi(x_n))} (zero for Gaussian entries)
  double exact = 0.0;      // (1 - p)^d - e^{-1}
  double poisson_slack = 0.0;
  double budget = 0.0;     // 4 se + poisson_slack
  bool agree = false;
  std::size_t reps = 0;
};

/// Simulates max_j W_j for d independent coordinates with the exact law of W_1.
inline CrossCheckReport p1_monte_carlo_cross_check(std::size_t n, std::size_t d, std::size_t reps,
                                                   std::uint64_t seed = 1,
                                                   CrossCheckEntries entries = CrossCheckEntries::exponential) {
  if (d < 3 || n < 1 || reps < 2) throw std::invalid_argument("p1_monte_carlo_cross_check: bad arguments");
  const double dn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  const double x = x_threshold(dd);
  const double rn = std::sqrt(dn);
  const std::vector<double> hit = replicate(reps, [&](std::size_t r) {
    RandomStream rs(seed, r, StreamRole::direct, n);
    for (std::size_t j = 0; j < d; ++j) {
      const double w = entries == CrossCheckEntries::exponential ? (rs.gamma(dn) - dn) / rn : rs.normal();
      if (w > x) return 0.0;
    }
    return 1.0;
  });
  CrossCheckReport c;
  c.reps = reps;
  const McEstimate m = batch_estimate(hit);
  const double e1 = std::exp(-1.0);
  c.empirical = m.value - e1;
  c.se = m.se;
  const double p = entries == CrossCheckEntries::exponential ? exact_exp_tail(dn, x) : std_normal_sf(x);
  c.analytic = std::exp(-dd * p) - std::exp(-dd * std_normal_sf(x));
  c.exact = std::exp(dd * std::log1p(-p)) - e1;
  // |(1-p)^d - e^{-dp}| <= d p^2 for both tails; the Gaussian side is exact in x_n.
  c.poisson_slack = dd * p * p + dd * std_normal_sf(x) * std_normal_sf(x);
  c.budget = 4.0 * c.se + c.poisson_slack;
  c.agree = std::abs(c.empirical - c.analytic) <= c.budget;
  return c;
}

}  // namespace hdclt
