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

#include <gtest/gtest.h>

#include <cmath>

#include "hdclt/sharpness.hpp"
#include "oracles.hpp"

using namespace hdclt;

TEST(Threshold, InvertsMaxCdf) {
  // Phi(2)^d = e^{-1}  <=>  d = -1 / log Phi(2).
  const double d = -1.0 / std::log(oracle::normal_cdf_series(2.0));
  EXPECT_NEAR(x_threshold(d), 2.0, 1e-9);
  const double x = oracle::bisect([](double t) { return 100.0 * std::log(oracle::normal_cdf_series(t)) + 1.0; }, 0.0, 6.0);
  EXPECT_NEAR(x_threshold(100.0), x, 1e-9);
  EXPECT_THROW(x_threshold(2.0), std::domain_error);
}

TEST(ExactTail, Anchors) {
  EXPECT_NEAR(exact_exp_tail(1.0, 0.0), std::exp(-1.0), 1e-15);
  EXPECT_EQ(exact_exp_tail(4.0, -2.0), 1.0);
  EXPECT_EQ(exact_exp_tail(9.0, -5.0), 1.0);
  const double n = 1e4, x = 3.0;
  EXPECT_NEAR(exact_exp_tail(n, x) / oracle::poisson_tail_q(10000, n + x * 100.0), 1.0, 1e-9);
  EXPECT_THROW(exact_exp_tail(0.5, 1.0), std::domain_error);
}

TEST(P1Statistic, GaussTermAndSlack) {
  const SharpnessPoint p = p1_statistic(1e5, 1e6);
  EXPECT_NEAR(p.gauss_term, 1.0, 0.02);
  for (double d : {1e2, 1e3, 1e4, 1e6}) {
    const SharpnessPoint q = p1_statistic(1e5, d);
    EXPECT_LE(q.poisson_slack_z, 2.0 / d);
    EXPECT_GE(q.lambda_n, 0.5);
    EXPECT_LE(q.lambda_n, 2.0);
    EXPECT_GE(q.gauss_term, 0.5);
    EXPECT_LE(q.gauss_term, 2.0);
  }
}

TEST(P1Statistic, StableUnderTailPerturbation) {
  const SharpnessPoint p = p1_statistic(1e5, 1e4);
  const double tw = exact_exp_tail(1e5, p.x_n) * (1.0 + 1e-10);
  const double l3 = std::pow(std::log(1e4), 3.0);
  const double s = std::sqrt(1e5 / l3) * std::abs(std::exp(-1e4 * tw) - std::exp(-p.gauss_term));
  EXPECT_NEAR(s, p.statistic, 1e-6);
  EXPECT_NEAR(p.ratio_mdp, p.lambda_n / p.gauss_term, 1e-12);
}

TEST(Mdp, GapAndLimits) {
  const MdpCheck m = mdp_ratio_check(1e5, 1e4);
  EXPECT_LE(m.relative_gap, 0.05);
  EXPECT_FALSE(m.regime_violated);
  const MdpCheck z = mdp_ratio_at(1e5, 0.0);
  EXPECT_NEAR(z.exact_ratio, 2.0 * regularized_gamma_q(1e5, 1e5), 1e-12);
  EXPECT_LE(std::abs(z.exact_ratio - z.cramer_ratio), 2.0 / std::sqrt(1e5));
  const MdpCheck big = mdp_ratio_at(1e9, 2.0);
  EXPECT_NEAR(big.exact_ratio, 1.0, 1e-3);
  EXPECT_NEAR(big.cramer_ratio, 1.0, 1e-3);
  EXPECT_TRUE(mdp_ratio_at(10.0, 4.0).regime_violated);
}

TEST(CrossCheck, GaussianSurrogateIsNull) {
  const CrossCheckReport c = p1_monte_carlo_cross_check(1000, 100, 100000, 3, CrossCheckEntries::gaussian);
  EXPECT_EQ(c.analytic, 0.0);
  EXPECT_LE(std::abs(c.empirical), 4 * c.se + c.poisson_slack);
}

TEST(CrossCheck, ExponentialAgreesAtSmallScale) {
  const CrossCheckReport c = p1_monte_carlo_cross_check(100, 50, 100000, 5);
  EXPECT_TRUE(c.agree) << c.empirical << " vs " << c.analytic << " budget " << c.budget;
}

TEST(CrossCheck, SeHalvesAtFourTimesReps) {
  // Batch-means SEs are noisy individually; average over seeds.
  double big = 0.0, small = 0.0;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    big += p1_monte_carlo_cross_check(100, 20, 80000, seed).se;
    small += p1_monte_carlo_cross_check(100, 20, 20000, seed + 100).se;
  }
  EXPECT_NEAR(big / small, 0.5, 0.1);
}
