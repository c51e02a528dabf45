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
#include <numbers>
#include <vector>

#include "hdclt/bound_terms.hpp"
#include "hdclt/harness.hpp"
#include "oracles.hpp"

using namespace hdclt;

namespace {
ModelSpec product(Family f, Density dens, std::size_t d, std::size_t n) {
  ModelSpec s;
  s.family = f;
  s.density = dens;
  s.d = d;
  s.n = n;
  return s;
}
}  // namespace

TEST(DeltaW, GaussianIsExactlyZero) {
  ModelSpec s = product(Family::gaussian_affine, Density::gaussian, 4, 10);
  EXPECT_EQ(delta_w(s, 200).value, 0.0);
}

TEST(DeltaW, SingleSummandOracles) {
  const auto e = delta_w(product(Family::product_exponential, Density::exponential, 1, 1), 200000);
  EXPECT_LE(std::abs(e.value - 2.0 / std::numbers::e), 4 * e.se);
  const auto u = delta_w(product(Family::product_custom_1d, Density::uniform, 1, 1), 200000);
  const double r3 = std::sqrt(3.0);
  const double want = oracle::simpson([](double x) { return std::abs(0.5 * (1 - x * x)); }, -r3, r3, 1e-14) / (2 * r3);
  EXPECT_LE(std::abs(u.value - want), 4 * u.se);
}

TEST(DeltaW, RootNRate) {
  std::vector<double> ns{10, 100, 1000, 10000}, vs;
  for (double n : ns)
    vs.push_back(delta_w(product(Family::product_exponential, Density::exponential, 10, static_cast<std::size_t>(n)), 2000).value);
  EXPECT_NEAR(rate_fit(ns, vs, RateTransform::log_log).slope, -0.5, 0.1);
}

TEST(ExchPair, Delta1RateForGaussianRows) {
  std::vector<double> ns{10, 100, 1000, 10000}, vs;
  for (double n : ns)
    vs.push_back(exch_pair_terms(product(Family::gaussian_affine, Density::gaussian, 5, static_cast<std::size_t>(n)), {0.0}, 300).delta1.value);
  EXPECT_NEAR(rate_fit(ns, vs, RateTransform::log_log).slope, -0.5, 0.1);
}

TEST(ExchPair, Delta3VanishesForLargeEtaAndIsMonotone) {
  const ModelSpec s = product(Family::product_custom_1d, Density::uniform, 3, 16);
  const double bound = 2.0 * std::sqrt(3.0) / 4.0;  // 2 max|row| / sqrt(n)
  const ExchPairTerms t = exch_pair_terms(s, {0.0, 0.1, 0.3, 0.6, bound}, 500);
  EXPECT_EQ(t.delta3.back().value, 0.0);
  for (std::size_t e = 1; e < t.delta3.size(); ++e) EXPECT_LE(t.delta3[e].value, t.delta3[e - 1].value);
  EXPECT_NEAR(t.delta3.front().value, t.delta2.value, 1e-15);
}

TEST(ExchPair, Delta2ToyBruteForce) {
  const ModelSpec s = product(Family::product_exponential, Density::exponential, 2, 2);
  const ExchPairTerms t = exch_pair_terms(s, {0.0}, 200000);
  // Independent draws of n ||(xi' - xi_I)/sqrt(n)||^4 with I uniform.
  RandomStream rs(99, 0, StreamRole::auxiliary);
  std::vector<double> v(1000000);
  for (auto& e : v) {
    double x[2][2], xp[2];
    for (auto& row : x)
      for (double& c : row) c = rs.exponential() - 1.0;
    for (double& c : xp) c = rs.exponential() - 1.0;
    const int I = rs.uniform() < 0.5 ? 0 : 1;
    const double m = std::max(std::abs(xp[0] - x[I][0]), std::abs(xp[1] - x[I][1])) / std::sqrt(2.0);
    e = 2.0 * m * m * m * m;
  }
  const auto o = oracle::mean_se(v);
  EXPECT_LE(std::abs(t.delta2.value - o.mean), 4 * std::hypot(t.delta2.se, o.se));
}

TEST(Nonlinear, Delta1ReductionIdentity) {
  const ModelSpec s = product(Family::product_exponential, Density::exponential, 3, 4);
  for (std::uint64_t r = 0; r < 200; ++r) {
    const SampleBatch b = generate(s, r), c = generate(s, r, 0, StreamRole::copy);
    const PerturbedFamily f = perturbed_batches(s, b, c, true);
    EXPECT_LE((delta1_inner_definition(f) - delta1_inner_linear(b.x, c.x)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Nonlinear, ZeroEpsilonReducesToLinear) {
  const ModelSpec lin = product(Family::product_exponential, Density::exponential, 3, 9);
  ModelSpec nl = lin;
  nl.family = Family::nonlinear_quadratic;
  nl.epsilon = 0.0;
  const auto a = nonlinear_terms(lin, {0.0, 0.2}, 300);
  const auto b = nonlinear_terms(nl, {0.0, 0.2}, 300);
  EXPECT_NEAR(a.delta1.value, b.delta1.value, 1e-12);
  EXPECT_NEAR(a.delta2.value, b.delta2.value, 1e-12);
  EXPECT_NEAR(a.delta3[1].value, b.delta3[1].value, 1e-12);
}

TEST(Nonlinear, Delta2InverseNRateForBoundedRows) {
  std::vector<double> ns{10, 30, 100, 300, 1000}, vs;
  for (double n : ns)
    vs.push_back(nonlinear_terms(product(Family::product_custom_1d, Density::uniform, 3, static_cast<std::size_t>(n)), {0.0}, 300).delta2.value);
  EXPECT_NEAR(rate_fit(ns, vs, RateTransform::log_log).slope, -1.0, 0.15);
}

TEST(Nonlinear, Delta3MonotoneAndTruncationMode) {
  ModelSpec s = product(Family::nonlinear_quadratic, Density::exponential, 3, 12);
  s.epsilon = 0.5;
  const auto t = nonlinear_terms(s, {0.0, 0.2, 0.5, 1.0}, 300);
  for (std::size_t e = 1; e < t.delta3.size(); ++e) EXPECT_LE(t.delta3[e].value, t.delta3[e - 1].value);
  const ModelSpec p = product(Family::product_exponential, Density::exponential, 3, 12);
  const Truncation tr = Truncation::rate_choice(3, 12);
  EXPECT_NEAR(tr.kappa, std::sqrt(5.0 * std::log(36.0)), 1e-15);
  const auto tt = nonlinear_terms(p, {0.0}, 200, tr);
  const double m1 = oracle::simpson([](double x) { return x * std::exp(-(x + 1)); }, -1.0, tr.kappa, 1e-14);
  const double m2 = oracle::simpson([](double x) { return x * x * std::exp(-(x + 1)); }, -1.0, tr.kappa, 1e-14);
  EXPECT_NEAR(tt.sigma.diag(0), m2 - m1 * m1, 1e-9);
  EXPECT_THROW(nonlinear_terms(s, {0.0}, 10, tr), std::invalid_argument);
}

TEST(LocalDependence, IidGaussianClosedForm) {
  ModelSpec s;
  s.family = Family::moving_average;
  s.density = Density::gaussian;
  s.d = 1;
  s.n = 25;
  s.ma_coeffs = {1.0};
  const auto e = local_dependence_term(s, 100000);
  const double r = std::sqrt(2.0 / std::numbers::pi);
  EXPECT_LE(std::abs(e.value - (2 * r + r) / 5.0), 4 * e.se);
}

TEST(LocalDependence, IidRate) {
  ModelSpec s;
  s.family = Family::moving_average;
  s.density = Density::uniform;
  s.d = 4;
  s.ma_coeffs = {1.0};
  std::vector<double> ns{10, 100, 1000, 10000}, vs;
  for (double n : ns) {
    s.n = static_cast<std::size_t>(n);
    vs.push_back(local_dependence_term(s, 200).value);
  }
  EXPECT_NEAR(rate_fit(ns, vs, RateTransform::log_log).slope, -0.5, 0.1);
}

TEST(Chaos, ExactValues) {
  ModelSpec s;
  s.family = Family::chaos_q2;
  s.d = 1;
  s.chaos_lambda = Eigen::MatrixXd::Constant(1, 1, 1.0 / std::sqrt(2.0));
  EXPECT_NEAR(chaos_delta_bar(s, 0).exact, std::sqrt(12.0), 1e-14);
  for (int k : {1, 4, 16, 64}) {
    const ModelSpec p = nlohmann::json{{"family", "chaos-q2"}, {"d", 2}, {"chaos_profile", k}}.get<ModelSpec>();
    EXPECT_NEAR(chaos_delta_bar(p, 0).exact, std::sqrt(12.0 / k), 1e-13);
  }
}

TEST(Chaos, MomentRecursionAndModelSe) {
  // Centred chi-square(1): variance 2, third moment 8, fourth 60.
  const auto mu = chaos_raw_moments(Eigen::VectorXd::Ones(1));
  EXPECT_NEAR(mu[1], 0.0, 1e-15);
  EXPECT_NEAR(mu[2], 2.0, 1e-14);
  EXPECT_NEAR(mu[3], 8.0, 1e-13);
  EXPECT_NEAR(mu[4], 60.0, 1e-12);
  // Two equal weights 1/2: W = (chi2(2) - 2)/2 = Exp(1) - 1, so E W^4 = 9.
  EXPECT_NEAR(chaos_raw_moments(Eigen::VectorXd::Constant(2, 0.5))[4], 9.0, 1e-12);
  // Each batch-means SE is noisy; their average should track the exact one.
  const ModelSpec p = nlohmann::json{{"family", "chaos-q2"}, {"d", 10}, {"chaos_profile", 16}}.get<ModelSpec>();
  const ChaosDeltaBar e = chaos_delta_bar(p, 60000);
  double ratio = 0.0;
  for (std::size_t j = 0; j < 10; ++j) ratio += e.mc_sq[j].se / e.model_se[j] / 10.0;
  EXPECT_NEAR(ratio, 1.0, 0.15);
}

TEST(Chaos, GaussianSurrogateFourthMoment) {
  const ModelSpec p = nlohmann::json{{"family", "chaos-q2"}, {"d", 1}, {"chaos_profile", 10000}}.get<ModelSpec>();
  std::vector<double> w4(5000);
  for (std::size_t r = 0; r < w4.size(); ++r) {
    const double w = evaluate_statistic(p, generate(p, r))(0);
    w4[r] = w * w * w * w;
  }
  const auto m = oracle::mean_se(w4);
  EXPECT_LE(std::abs(m.mean - 3.0), 4 * m.se);
}

TEST(Nemirovski, InequalityHolds) {
  for (std::size_t d : {2u, 5u}) {
    const ModelSpec s = product(Family::product_exponential, Density::exponential, d, 50);
    const NemirovskiCheck c = nemirovski_check(s, 2000);
    EXPECT_LE(c.lhs.value, c.rhs + 4 * c.lhs.se);
  }
}

TEST(AssembleBound, ClosedFormFunctionals) {
  const SigmaStats I = SigmaStats::identity(50);
  BoundTerms T;
  T.delta_w = 0.02;
  const double t1 = assemble_bound(Theorem::t1, T, I, 50, 100).value;
  EXPECT_NEAR(t1, 0.02 * std::log(50.0) * std::max(std::abs(std::log(0.02)), 1.0), 1e-15);
  const double c2 = assemble_bound(Theorem::c2, T, I, 50, 1000).value;
  EXPECT_NEAR(c2, std::cbrt(std::pow(std::log(50000.0), 4) / 1000.0), 1e-13);
  T.Delta3 = 0.3;
  const double su = 1.0, sb = 1.0;
  EXPECT_NEAR(simplified_t(0.3, I, 50), std::pow(su / sb * 0.3 * std::log(50.0), 2.0 / 3.0), 1e-15);
  EXPECT_THROW(assemble_bound(Theorem::t2, T, I, 50, 100, 0.01, 10.0), ConstraintViolation);
  EXPECT_NO_THROW(assemble_bound(Theorem::t2, T, I, 50, 100, 0.5, 0.0));
  EXPECT_EQ(theorem_from_string("t2-simplified"), Theorem::t2_simplified);
  EXPECT_THROW(theorem_from_string("t9"), std::invalid_argument);
}
