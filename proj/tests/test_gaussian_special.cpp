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
#include <limits>
#include <numbers>

#include "hdclt/gaussian_special.hpp"
#include "hdclt/quadrature.hpp"
#include "oracles.hpp"

using namespace hdclt;

TEST(NormalCdf, AnchorsAndOracle) {
  EXPECT_EQ(std_normal_cdf(0.0), 0.5);
  EXPECT_EQ(std_normal_cdf(40.0), 1.0);
  const double quad = 0.5 + oracle::simpson(oracle::normal_pdf, 0.0, 1.0, 1e-17);
  EXPECT_NEAR(std_normal_cdf(1.0), quad, 1e-14);
  for (double x = -6.0; x <= 6.0; x += 0.37) EXPECT_NEAR(std_normal_cdf(x), oracle::normal_cdf_series(x), 1e-15);
}

TEST(NormalCdf, Monotone) {
  double prev = 0.0;
  for (double x = -38.0; x <= 9.0; x += 0.01) {
    const double v = std_normal_cdf(x);
    ASSERT_GE(v, prev);
    prev = v;
  }
}

TEST(NormalCdf, LogCdfTails) {
  EXPECT_NEAR(log_std_normal_cdf(0.0), std::log(0.5), 1e-15);
  // Below about -38 Phi underflows; compare with the Mills-ratio series instead.
  for (double x : {40.0, 50.0, 200.0}) {
    const double x2 = x * x;
    const double series = -0.5 * x2 - std::log(x * std::sqrt(2.0 * std::numbers::pi)) +
                          std::log1p(-1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2));
    EXPECT_NEAR(log_std_normal_cdf(-x), series, 1e-9 * std::abs(series)) << x;
  }
  EXPECT_NEAR(log_std_normal_cdf(-20.0), std::log(std_normal_sf(20.0)), 1e-12);
  EXPECT_NEAR(log_std_normal_cdf(10.0), -std_normal_sf(10.0), 1e-30);
}

TEST(NormalQuantile, RoundTripAndOracle) {
  EXPECT_EQ(std_normal_quantile(0.5), 0.0);
  EXPECT_NEAR(std_normal_quantile(std_normal_cdf(2.0)), 2.0, 1e-12);
  for (double p : {1e-300, 1e-20, 1e-5, 0.01, 0.2, 0.7, 0.99, 1.0 - 1e-12}) {
    const double u = std_normal_quantile(p);
    EXPECT_LE(std::abs(std_normal_cdf(u) - p), 1e-14 + 1e-13 * p) << p;
  }
  const double d = 100.0;
  const double x = std_normal_quantile(std::exp(-1.0 / d));
  const double ox = oracle::bisect([&](double t) { return std::pow(oracle::normal_cdf_series(t), d) - std::exp(-1.0); },
                                   0.0, 6.0);
  EXPECT_NEAR(x, ox, 1e-10);
  EXPECT_THROW(std_normal_quantile(0.0), std::domain_error);
  EXPECT_THROW(std_normal_quantile(1.0), std::domain_error);
}

TEST(NormalQuantile, UpperTail) {
  for (double q : {1e-200, 1e-12, 1e-6, 0.3}) EXPECT_NEAR(std_normal_sf(std_normal_quantile_upper(q)) / q, 1.0, 1e-12);
}

TEST(IncompleteGamma, Anchors) {
  for (double x : {0.0, 0.5, 3.0, 40.0}) EXPECT_NEAR(regularized_gamma_q(1.0, x), std::exp(-x), 1e-15);
  EXPECT_EQ(regularized_gamma_q(3.7, 0.0), 1.0);
  EXPECT_NEAR(regularized_gamma_q(5.0, 5.0) / oracle::poisson_tail_q(5, 5.0), 1.0, 1e-13);
}

TEST(IncompleteGamma, PoissonIdentityAcrossRegimes) {
  for (unsigned a : {2u, 10u, 57u, 400u, 10000u}) {
    for (double f : {0.3, 0.9, 1.0, 1.1, 2.0}) {
      const double x = f * a;
      const double exact = oracle::poisson_tail_q(a, x);
      if (exact < 1e-290) continue;
      EXPECT_NEAR(regularized_gamma_q(a, x) / exact, 1.0, 1e-11) << a << " " << x;
    }
  }
  const double n = 10000.0;
  const double x = n + 3.0 * std::sqrt(n);
  EXPECT_NEAR(regularized_gamma_q(n, x) / oracle::poisson_tail_q(10000, x), 1.0, 1e-10);
}

TEST(IncompleteGamma, ComplementAndHalfIntegers) {
  // Q(1/2, x) = erfc(sqrt x).
  for (double x : {0.01, 0.7, 5.0, 30.0}) EXPECT_NEAR(regularized_gamma_q(0.5, x) / std::erfc(std::sqrt(x)), 1.0, 1e-12);
  EXPECT_NEAR(regularized_gamma_p(4.0, 2.0) + regularized_gamma_q(4.0, 2.0), 1.0, 1e-15);
}

TEST(Hermite, RecurrenceMatchesExplicitSum) {
  EXPECT_EQ(hermite_H(0, 3.3), 1.0);
  EXPECT_NEAR(hermite_H(2, 1.0), 0.0, 1e-15);
  EXPECT_NEAR(hermite_H(3, std::sqrt(3.0)), 0.0, 1e-12);
  for (unsigned nu = 0; nu <= 8; ++nu)
    for (double u = -3.0; u <= 3.0; u += 0.5)
      EXPECT_NEAR(hermite_H(nu, u), oracle::hermite_explicit(nu, u), 1e-9 * (1 + std::abs(oracle::hermite_explicit(nu, u))));
}

TEST(Hermite, FamilyRootsAndConstants) {
  EXPECT_NEAR(hermite_family(1).u_nu, 0.0, 1e-12);
  EXPECT_NEAR(hermite_family(2).u_nu, 1.0, 1e-12);
  EXPECT_NEAR(hermite_family(3).u_nu, std::sqrt(3.0), 1e-12);
  double prev = -1.0;
  for (unsigned nu = 1; nu <= 6; ++nu) {
    const auto& f = hermite_family(nu);
    EXPECT_NEAR(hermite_H(nu, f.u_nu), 0.0, 1e-12);
    for (double u = f.u_nu + 0.01; u < f.u_nu + 8; u += 0.05) ASSERT_GT(hermite_H(nu, u), 0.0);
    EXPECT_GT(f.u_nu, prev);
    prev = f.u_nu;
    EXPECT_GE(f.M_nu, 0.0);
    // Grid oracle for M_nu = max_{0<=u<=u_nu} |H_{nu-1}(u)|.
    double m = 0.0;
    for (double u = 0.0; u <= f.u_nu; u += 1e-5) m = std::max(m, std::abs(hermite_H(nu - 1, u)));
    m = std::max(m, std::abs(hermite_H(nu - 1, f.u_nu)));
    EXPECT_NEAR(f.M_nu, m, 1e-6);
  }
  EXPECT_NEAR(hermite_family(2).M_nu, 1.0, 1e-12);
}

TEST(EtaFamily, Values) {
  const EtaContext ctx0{0.0, 10};
  EXPECT_NEAR(hbar_nu(1, 0.0), std::sqrt(2.0 / std::numbers::pi), 1e-15);
  EXPECT_NEAR(std_normal_pdf_over_cdf(0.0), std::sqrt(2.0 / std::numbers::pi), 1e-15);
  for (double u : {0.0, 0.5, 2.0}) {
    EXPECT_NEAR(lambda_eta(ctx0, u), 1.0, 1e-15);
    EXPECT_NEAR(Lambda_eta(ctx0, u), 1.0, 1e-15);
  }
  EXPECT_NEAR(tilde_h_nu(2, 0.5), hermite_family(2).M_nu * std_normal_pdf(0.5), 1e-15);
  EXPECT_NEAR(tilde_h_nu(2, 1.5), h_nu(2, 1.5), 1e-15);
  const EtaContext ctx{1.0, 100};
  EXPECT_NEAR(ctx.eta(), 1.0 / std::sqrt(std::log(100.0)), 1e-15);
  EXPECT_NEAR(Lambda_eta(ctx, 0.3), std_normal_cdf(0.3) / std_normal_cdf(0.3 + 2 * ctx.eta()), 1e-15);
  const auto v = h_family(3, ctx, 2.5);
  EXPECT_NEAR(v.Lambda, Lambda_eta(ctx, 2.5), 1e-15);
  EXPECT_THROW(EtaContext(-1.0, 10), std::invalid_argument);
  EXPECT_THROW(EtaContext(0.0, 2), std::invalid_argument);
}

TEST(Quadrature, AgreesWithSimpson) {
  auto f = [](double x) { return std::exp(-x) * std::sin(3 * x) * x; };
  const auto r = integrate(f, 0.0, 7.0);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, oracle::simpson(f, 0.0, 7.0, 1e-15), 1e-12);
  const auto g = integrate_infinite([](double x) { return std_normal_pdf(x); }, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
  EXPECT_NEAR(g.value, 1.0, 1e-12);
}
