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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace hdclt {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343819;
inline constexpr double kLogSqrt2Pi = 0.9189385332046727417803297364056176;

//------------------------------------------------------------------------------
// Standard normal density and distribution function
//------------------------------------------------------------------------------

inline double std_normal_pdf(double u) { return kInvSqrt2Pi * std::exp(-0.5 * u * u); }

inline double log_std_normal_pdf(double u) { return -0.5 * u * u - kLogSqrt2Pi; }

/// Phi(u). Uses erfc on the side of the origin where it does not cancel.
inline double std_normal_cdf(double u) {
  if (std::isinf(u)) return u > 0 ? 1.0 : 0.0;
  return 0.5 * std::erfc(-u * std::numbers::sqrt2 / 2.0);
}

/// 1 - Phi(u) without cancellation for large u.
inline double std_normal_sf(double u) {
  if (std::isinf(u)) return u > 0 ? 0.0 : 1.0;
  return 0.5 * std::erfc(u * std::numbers::sqrt2 / 2.0);
}

/// Phi(b) - Phi(a), evaluated on the side that avoids cancellation.
inline double std_normal_interval_mass(double a, double b) {
  if (!(a < b)) return 0.0;
  if (a > 0.0) return std_normal_sf(a) - std_normal_sf(b);
  return std_normal_cdf(b) - std_normal_cdf(a);
}

/// log Phi(u), accurate in both tails.
inline double log_std_normal_cdf(double u) {
  if (u == -std::numeric_limits<double>::infinity())
    return -std::numeric_limits<double>::infinity();
  if (u > 0) return std::log1p(-std_normal_sf(u));
  if (u > -37.0) return std::log(std_normal_cdf(u));
  // Asymptotic Mills-ratio series.
  const double z2 = 1.0 / (u * u);
  const double series = 1.0 - z2 * (1.0 - 3.0 * z2 * (1.0 - 5.0 * z2));
  return log_std_normal_pdf(u) - std::log(-u) + std::log(series);
}

/// phibar(u) = phi(u) / Phi(u).
inline double std_normal_pdf_over_cdf(double u) {
  if (u > -5.0) return std_normal_pdf(u) / std_normal_cdf(u);
  return std::exp(log_std_normal_pdf(u) - log_std_normal_cdf(u));
}

//------------------------------------------------------------------------------
// Quantile
//------------------------------------------------------------------------------

namespace detail {

// Lower-half quantile, p in (0, 0.5]: rational initial guess (Acklam) then
// two Halley steps on Phi(x) = p.
inline double normal_quantile_lower(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  double x;
  if (p < 0.02425) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    const double e = std_normal_cdf(x) - p;
    const double u = e / std_normal_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

}  // namespace detail

/// Phi^{-1}(p) for p in (0, 1).
inline double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("std_normal_quantile: p must lie in (0, 1), got " +
                            std::to_string(p));
  if (p <= 0.5) return detail::normal_quantile_lower(p);
  return -detail::normal_quantile_lower(1.0 - p);  // 1 - p is exact here
}

/// The u with 1 - Phi(u) = q; keeps full relative precision for tiny q.
inline double std_normal_quantile_upper(double q) {
  if (!(q > 0.0 && q < 1.0))
    throw std::domain_error("std_normal_quantile_upper: q must lie in (0, 1)");
  if (q <= 0.5) return -detail::normal_quantile_lower(q);
  return detail::normal_quantile_lower(1.0 - q);
}

//------------------------------------------------------------------------------
// Regularized incomplete gamma
//------------------------------------------------------------------------------

namespace detail {

// t - log(1 + t) without cancellation near 0.
inline double t_minus_log1p(double t) {
  if (std::abs(t) < 0.1) {
    double term = t * t;
    double sum = 0.0;
    for (int k = 2; k < 60; ++k) {
      const double add = term / k;
      sum += (k % 2 == 0) ? add : -add;
      if (std::abs(add) < 1e-18 * std::abs(sum)) break;
      term *= t;
    }
    return sum;
  }
  return t - std::log1p(t);
}

// log( x^a e^{-x} / Gamma(a) ).
inline double log_gamma_prefactor(double a, double x) {
  if (x == 0.0) return -std::numeric_limits<double>::infinity();
  if (a < 20.0) return a * std::log(x) - x - std::lgamma(a);
  const double ia = 1.0 / a;
  const double ia2 = ia * ia;
  const double stirling =
      ia * (1.0 / 12.0 - ia2 * (1.0 / 360.0 - ia2 * (1.0 / 1260.0 - ia2 / 1680.0)));
  const double t = (x - a) / a;
  return -a * t_minus_log1p(t) + 0.5 * std::log(a / (2.0 * std::numbers::pi)) - stirling;
}

}  // namespace detail

/// Q(a, x) = Gamma(a, x) / Gamma(a): series below a + 1, continued fraction above.
inline double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("regularized_gamma_q: a must be positive");
  if (!(x >= 0.0)) throw std::domain_error("regularized_gamma_q: x must be non-negative");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const double log_pref = detail::log_gamma_prefactor(a, x);
  constexpr double eps = 1e-17;
  if (x < a + 1.0) {
    double term = 1.0;
    double sum = 1.0;
    for (long n = 1; n < 100000000L; ++n) {
      term *= x / (a + static_cast<double>(n));
      sum += term;
      if (term < sum * eps) break;
    }
    const double p = std::exp(log_pref) * sum / a;
    return std::max(0.0, 1.0 - p);
  }
  // Modified Lentz for the Legendre continued fraction.
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (long i = 1; i < 100000000L; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return std::exp(log_pref) * h;
}

inline double regularized_gamma_p(double a, double x) { return 1.0 - regularized_gamma_q(a, x); }

//------------------------------------------------------------------------------
// Probabilists' Hermite polynomials and the h / hbar / lambda / Lambda family
//------------------------------------------------------------------------------

/// He_nu(u) by the three-term recurrence He_{k+1} = u He_k - k He_{k-1}.
inline double hermite_H(unsigned nu, double u) {
  if (nu == 0) return 1.0;
  double prev = 1.0;
  double cur = u;
  for (unsigned k = 1; k < nu; ++k) {
    const double next = u * cur - static_cast<double>(k) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

struct HermiteFamily {
  unsigned nu = 0;
  double u_nu = 0.0;  // largest root of He_nu
  double M_nu = 0.0;  // max of |He_{nu-1}| on [0, u_nu]
};

namespace detail {

inline double bisect_root(auto&& f, double lo, double hi, double tol) {
  double flo = f(lo);
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm <= 0.0) == (flo <= 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline HermiteFamily compute_hermite_family(unsigned nu) {
  HermiteFamily fam;
  fam.nu = nu;
  auto H = [nu](double u) { return hermite_H(nu, u); };
  // He_nu > 0 above its largest root, which is below sqrt(4 nu + 2).
  const double step = 0.25;
  double hi = std::sqrt(4.0 * nu + 2.0) + 0.5;
  double lo = hi - step;
  while (H(lo) > 0.0) {
    hi = lo;
    lo -= step;
  }
  // Root in [lo, hi): H(lo) <= 0 < H(hi).
  fam.u_nu = (H(lo) == 0.0) ? lo : bisect_root(H, lo, hi, 1e-15);
  if (std::abs(fam.u_nu) < 1e-14) fam.u_nu = 0.0;

  auto g = [nu](double u) { return std::abs(hermite_H(nu - 1, u)); };
  if (fam.u_nu <= 0.0) {
    fam.M_nu = g(0.0);
    return fam;
  }
  const double grid = 1e-4;
  const auto steps = static_cast<std::size_t>(std::ceil(fam.u_nu / grid));
  double best_u = 0.0;
  double best = g(0.0);
  for (std::size_t i = 1; i <= steps; ++i) {
    const double u = std::min(fam.u_nu, static_cast<double>(i) * grid);
    const double v = g(u);
    if (v > best) {
      best = v;
      best_u = u;
    }
  }
  // Golden-section refinement inside the bracketing grid cell.
  double a = std::max(0.0, best_u - grid);
  double b = std::min(fam.u_nu, best_u + grid);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  for (int it = 0; it < 100 && b - a > 1e-15; ++it) {
    if (g(c) > g(d)) {
      b = d;
    } else {
      a = c;
    }
    c = b - inv_phi * (b - a);
    d = a + inv_phi * (b - a);
  }
  fam.M_nu = std::max({best, g(0.5 * (a + b)), g(fam.u_nu)});
  return fam;
}

}  // namespace detail

inline constexpr unsigned kMaxHermiteOrder = 12;

/// Cached (u_nu, M_nu) for 1 <= nu <= kMaxHermiteOrder; built once, read-only.
inline const HermiteFamily& hermite_family(unsigned nu) {
  static const std::vector<HermiteFamily> cache = [] {
    std::vector<HermiteFamily> v;
    v.reserve(kMaxHermiteOrder + 1);
    v.push_back(HermiteFamily{});
    for (unsigned k = 1; k <= kMaxHermiteOrder; ++k) v.push_back(detail::compute_hermite_family(k));
    return v;
  }();
  if (nu == 0 || nu > kMaxHermiteOrder)
    throw std::domain_error("hermite_family: order must be in [1, " +
                            std::to_string(kMaxHermiteOrder) + "]");
  return cache[nu];
}

/// Shift eta = K / sqrt(log d) of the inner supremum box.
struct EtaContext {
  double K = 0.0;
  std::size_t d = 3;

  EtaContext() = default;
  EtaContext(double k, std::size_t dim) : K(k), d(dim) {
    if (!(K >= 0.0)) throw std::invalid_argument("EtaContext: K must be non-negative");
    if (d < 3) throw std::invalid_argument("EtaContext: d must be at least 3");
  }

  double eta() const { return K / std::sqrt(std::log(static_cast<double>(d))); }
};

/// h_nu(u) = He_{nu-1}(u) phi(u).
inline double h_nu(unsigned nu, double u) {
  if (std::isinf(u)) return 0.0;
  return hermite_H(nu - 1, u) * std_normal_pdf(u);
}

/// hbar_nu(u) = h_nu(u) / Phi(u).
inline double hbar_nu(unsigned nu, double u) {
  return hermite_H(nu - 1, u) * std_normal_pdf_over_cdf(u);
}

/// Decreasing majorant of |h_nu| on [0, inf).
inline double tilde_h_nu(unsigned nu, double u) {
  if (u < 0.0) throw std::domain_error("tilde_h_nu: defined on [0, inf)");
  const HermiteFamily& fam = hermite_family(nu);
  if (u <= fam.u_nu) return fam.M_nu * std_normal_pdf(u);
  return h_nu(nu, u);
}

/// log lambda(u) = 2 u eta + 2 eta^2; kept in log space.
inline double log_lambda(const EtaContext& ctx, double u) {
  if (u < 0.0) throw std::domain_error("lambda: defined on [0, inf)");
  const double eta = ctx.eta();
  return 2.0 * u * eta + 2.0 * eta * eta;
}

inline double lambda_eta(const EtaContext& ctx, double u) { return std::exp(log_lambda(ctx, u)); }

/// Lambda(u) = Phi(u) / Phi(u + 2 eta).
inline double Lambda_eta(const EtaContext& ctx, double u) {
  if (u < 0.0) throw std::domain_error("Lambda: defined on [0, inf)");
  const double eta = ctx.eta();
  return std::exp(log_std_normal_cdf(u) - log_std_normal_cdf(u + 2.0 * eta));
}

struct HFamilyValues {
  double h = 0.0;
  double hbar = 0.0;
  double tilde_h = 0.0;
  double lambda = 1.0;
  double Lambda = 1.0;
};

inline HFamilyValues h_family(unsigned nu, const EtaContext& ctx, double u) {
  if (nu == 0) throw std::domain_error("h_family: order must be at least 1");
  if (u < 0.0) throw std::domain_error("h_family: lambda and Lambda need u >= 0");
  return {h_nu(nu, u), hbar_nu(nu, u), tilde_h_nu(nu, u), lambda_eta(ctx, u), Lambda_eta(ctx, u)};
}

}  // namespace hdclt
