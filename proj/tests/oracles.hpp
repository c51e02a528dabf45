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

// Independent reference computations used only by the tests. Nothing here
// calls into the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// Adaptive Simpson with Richardson correction.
inline double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                          double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-13) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50);
}

/// Phi(x) = 1/2 + phi(x) sum_k x^{2k+1} / (2k+1)!!, accurate for |x| <= 8.
inline double normal_cdf_series(double x) {
  double term = x, sum = x;
  for (int k = 1; k < 500; ++k) {
    term *= x * x / (2.0 * k + 1.0);
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return 0.5 + normal_pdf(x) * sum;
}

template <typename F>
double bisect(F&& f, double lo, double hi, int iters = 200) {
  double flo = f(lo);
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Q(a, x) for integer a via the Poisson identity Q(a, x) = P(Poisson(x) < a), in log space.
inline double poisson_tail_q(unsigned a, double x) {
  // Each log term is formed directly (no running sum) in extended precision.
  const long double lx = std::log(static_cast<long double>(x));
  std::vector<long double> logs(a);
  long double mx = -INFINITY;
  for (unsigned k = 0; k < a; ++k) {
    logs[k] = k * lx - std::lgamma(static_cast<long double>(k) + 1.0L) - x;
    mx = std::max(mx, logs[k]);
  }
  long double s = 0.0L;
  for (long double l : logs) s += std::exp(l - mx);
  return static_cast<double>(std::exp(mx + std::log(s)));
}

/// P(Z1 <= 0, Z2 <= 0) for a standard bivariate normal with correlation rho.
inline double bivariate_orthant(double rho) { return 0.25 + std::asin(rho) / (2.0 * std::numbers::pi); }

/// Probabilists' Hermite polynomial by the explicit sum.
inline double hermite_explicit(unsigned nu, double u) {
  double s = 0.0;
  for (unsigned m = 0; 2 * m <= nu; ++m) {
    const double c = std::tgamma(nu + 1.0) / (std::tgamma(m + 1.0) * std::tgamma(nu - 2.0 * m + 1.0) * std::pow(2.0, m));
    s += (m % 2 ? -c : c) * std::pow(u, nu - 2.0 * m);
  }
  return s;
}

/// Damped fixed-point iteration for u = (d - 1) phi(u) / Phi(u).
inline double ustar_fixed_point(double d) {
  double u = 0.5;
  for (int it = 0; it < 100000; ++it) {
    const double g = (d - 1.0) * normal_pdf(u) / normal_cdf_series(u);
    const double nu = 0.5 * (u + g);
    if (std::abs(nu - u) < 1e-15) return nu;
    u = nu;
  }
  return u;
}

/// Sample mean and standard error.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
  MeanSe m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.se = std::sqrt(ss / (static_cast<double>(v.size()) - 1.0) / static_cast<double>(v.size()));
  return m;
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return best;
}

/// Critical value of the two-sample KS statistic at level alpha.
inline double ks_critical(std::size_t n, std::size_t m, double alpha) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * static_cast<double>(m)));
}

}  // namespace oracle
