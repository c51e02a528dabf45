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
#include <stdexcept>
#include <string>
#include <vector>

#include "hdclt/gaussian_special.hpp"
#include "hdclt/rectangle.hpp"

namespace hdclt {

struct SupremumResult {
  std::size_t d = 0;
  unsigned r = 1;  // derivative order, or Hermite order nu for the F^beta G problem
  double beta = 1.0;
  double value = 0.0;
  double log_value = -std::numeric_limits<double>::infinity();
  double maximizer_u = 0.0;
  std::size_t m_star = 0;
};

namespace detail {

// Bisection on a bracket with f(lo) and f(hi) of opposite sign, run until
// the midpoint no longer moves.
template <typename F>
double bisect_sign_change(F&& f, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Maximum of a continuous g on [lo, hi]: uniform scan, then golden section
// inside the best cell.
template <typename G>
double maximize_on_interval(G&& g, double lo, double hi, int grid = 64, double* argmax = nullptr) {
  if (hi <= lo) {
    if (argmax) *argmax = lo;
    return g(lo);
  }
  const double h = (hi - lo) / grid;
  int best_i = 0;
  double best = g(lo);
  for (int i = 1; i <= grid; ++i) {
    const double v = g(i == grid ? hi : lo + i * h);
    if (v > best) {
      best = v;
      best_i = i;
    }
  }
  double a = std::max(lo, lo + (best_i - 1) * h);
  double b = std::min(hi, lo + (best_i + 1) * h);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double dd = a + inv_phi * (b - a);
  double gc = g(c);
  double gd = g(dd);
  for (int it = 0; it < 80 && b - a > 1e-14 * (1.0 + std::abs(a)); ++it) {
    if (gc > gd) {
      b = dd;
      dd = c;
      gd = gc;
      c = b - inv_phi * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = dd;
      gc = gd;
      dd = a + inv_phi * (b - a);
      gd = g(dd);
    }
  }
  double best_u = lo + best_i * h;
  if (gc > best) {
    best = gc;
    best_u = c;
  }
  if (gd > best) {
    best = gd;
    best_u = dd;
  }
  if (argmax) *argmax = best_u;
  return best;
}

inline double h2_value(double u) { return std::isinf(u) ? 0.0 : u * std_normal_pdf(u); }
inline double h1_value(double u) { return std::isinf(u) ? 0.0 : std_normal_pdf(u); }

struct CoordinateFactors {
  double p = 0.0;   // sup_y Phi mass of (a+y, b+y)
  double s1 = 0.0;  // sup_y |h_1(b+y) - h_1(a+y)|
  double s2 = 0.0;  // sup_y |h_2(b+y) - h_2(a+y)|
};

inline CoordinateFactors coordinate_factors(double a, double b, double eta) {
  CoordinateFactors c;
  if (a == b) return c;  // degenerate coordinate: every factor vanishes
  if (eta == 0.0) {
    c.p = std_normal_interval_mass(a, b);
    c.s1 = std::abs(h1_value(b) - h1_value(a));
    c.s2 = std::abs(h2_value(b) - h2_value(a));
    return c;
  }
  c.p = maximize_on_interval([&](double y) { return std_normal_interval_mass(a + y, b + y); }, -eta, eta);
  c.s1 = maximize_on_interval(
      [&](double y) { return std::abs(h1_value(b + y) - h1_value(a + y)); }, -eta, eta);
  c.s2 = maximize_on_interval(
      [&](double y) { return std::abs(h2_value(b + y) - h2_value(a + y)); }, -eta, eta);
  return c;
}

}  // namespace detail

/// Root of u = (d - 1) phibar(u) on [0, sqrt(4 log d) + 2].
inline double solve_ustar_r1(std::size_t d) {
  if (d < 3) throw std::invalid_argument("solve_ustar_r1: d must be at least 3");
  const double dm1 = static_cast<double>(d - 1);
  auto g2 = [dm1](double u) { return u - dm1 * std_normal_pdf_over_cdf(u); };
  const double lo = 0.0;
  const double hi = std::sqrt(4.0 * std::log(static_cast<double>(d))) + 2.0;
  if (!(g2(lo) < 0.0 && g2(hi) > 0.0))
    throw std::logic_error("solve_ustar_r1: no sign change on the bracket (d = " +
                           std::to_string(d) + ")");
  return detail::bisect_sign_change(g2, lo, hi);
}

/// f(x) = (sum_j phibar(x_j)) prod_k Phi(x_k).
inline double f_r1(const std::vector<double>& x) {
  double s = 0.0;
  double logg = 0.0;
  for (double xj : x) {
    s += std_normal_pdf_over_cdf(xj);
    logg += log_std_normal_cdf(xj);
  }
  return s * std::exp(logg);
}

/// Partial-derivative residual -(u + phibar(u)) + d phibar(u) at the diagonal point.
inline double stationarity_residual_r1(std::size_t d, double u) {
  const double pb = std_normal_pdf_over_cdf(u);
  return static_cast<double>(d) * pb - (u + pb);
}

inline SupremumResult sup_f_r1(std::size_t d) {
  const double u = solve_ustar_r1(d);
  const double dd = static_cast<double>(d);
  SupremumResult res;
  res.d = d;
  res.r = 1;
  res.maximizer_u = u;
  res.m_star = d;
  res.log_value = std::log(dd / (dd - 1.0)) + std::log(u) + dd * log_std_normal_cdf(u);
  res.value = std::exp(res.log_value);
  return res;
}

/// Sum over index tuples of sup over eta-shifts of |integral over A of the
/// r-th order mixed partial of the standard Gaussian density|, for r in {1, 2}.
inline double rect_sum_exact(const Rectangle& A, unsigned r, const EtaContext& ctx) {
  if (r != 1 && r != 2) throw std::invalid_argument("rect_sum_exact: r must be 1 or 2");
  A.validate();
  const double eta = ctx.eta();
  // A0 = prod p, A1 = sum_j s1_j prod_{k != j} p_k, A2 = sum_{j<k} s1_j s1_k prod_rest p,
  // B = sum_j s2_j prod_{k != j} p_k.
  double A0 = 1.0, A1 = 0.0, A2 = 0.0, B = 0.0;
  for (std::size_t j = 0; j < A.dim(); ++j) {
    const auto c = detail::coordinate_factors(A.lower[j], A.upper[j], eta);
    A2 = A2 * c.p + A1 * c.s1;
    B = B * c.p + A0 * c.s2;
    A1 = A1 * c.p + A0 * c.s1;
    A0 *= c.p;
  }
  return r == 1 ? A1 : B + 2.0 * A2;
}

/// Convenience overload for eta = 0.
inline double rect_sum_exact(const Rectangle& A, unsigned r) {
  return rect_sum_exact(A, r, EtaContext(0.0, std::max<std::size_t>(3, A.dim())));
}

struct MonotonicityCheck {
  bool passed = false;
  double min_margin = 0.0;
  double at_u = 0.0;
};

/// Forward-difference check that H_nu(u) lambda(u) + hbar_nu(u) increases on [u_nu, 12].
inline MonotonicityCheck check_tail_monotonicity(unsigned nu, const EtaContext& ctx) {
  const double un = hermite_family(nu).u_nu;
  auto g = [&](double u) { return hermite_H(nu, u) * lambda_eta(ctx, u) + hbar_nu(nu, u); };
  const double step = 1e-3;
  MonotonicityCheck out;
  out.min_margin = std::numeric_limits<double>::infinity();
  const auto steps = static_cast<std::size_t>(std::floor((12.0 - un) / step));
  double prev = g(un);
  for (std::size_t i = 1; i <= steps; ++i) {
    const double u = un + static_cast<double>(i) * step;
    const double cur = g(u);
    if (cur - prev < out.min_margin) {
      out.min_margin = cur - prev;
      out.at_u = u - step;
    }
    prev = cur;
  }
  out.passed = out.min_margin > 0.0;
  return out;
}

namespace detail {

// The F_nu^beta G problem restricted to points with m coordinates at a common
// u >= u_nu and the rest at u_nu.
class FbetaGProblem {
 public:
  FbetaGProblem(unsigned nu, double beta, std::size_t d, const EtaContext& ctx)
      : nu_(nu), beta_(beta), d_(static_cast<double>(d)), ctx_(ctx) {
    eta_ = ctx.eta();
    un_ = hermite_family(nu).u_nu;
    b0_ = B(un_);
    logg0_ = log_std_normal_cdf(un_ + 2.0 * eta_);
    upper_ = std::sqrt(4.0 * std::log(d_)) + 4.0;
    grid_u_.resize(kGrid + 1);
    grid_a_.resize(kGrid + 1);
    grid_b_.resize(kGrid + 1);
    for (int i = 0; i <= kGrid; ++i) {
      const double u = un_ + (upper_ - un_) * i / kGrid;
      grid_u_[i] = u;
      grid_a_[i] = A(u);
      grid_b_[i] = B(u);
    }
  }

  double A(double u) const {
    return beta_ * (hermite_H(nu_, u) * lambda_eta(ctx_, u) + hbar_nu(nu_, u)) * Lambda_eta(ctx_, u);
  }
  double B(double u) const { return hbar_nu(nu_, u) * Lambda_eta(ctx_, u); }

  double log_f(double u, double m) const {
    const double F = m * B(u) + (d_ - m) * b0_;
    return beta_ * std::log(F) + m * log_std_normal_cdf(u + 2.0 * eta_) + (d_ - m) * logg0_;
  }

  // Best stationary candidate for a given m (> beta); -inf when none exists.
  double best_for_m(double m, double* u_out) const {
    double best = -std::numeric_limits<double>::infinity();
    auto resid = [&](double u) { return A(u) - m * B(u) - (d_ - m) * b0_; };
    double prev = grid_a_[0] - m * grid_b_[0] - (d_ - m) * b0_;
    for (int i = 1; i <= kGrid; ++i) {
      const double cur = grid_a_[i] - m * grid_b_[i] - (d_ - m) * b0_;
      if ((prev < 0.0) != (cur < 0.0)) {
        const double u = bisect_sign_change(resid, grid_u_[i - 1], grid_u_[i]);
        const double v = log_f(u, m);
        if (v > best) {
          best = v;
          if (u_out) *u_out = u;
        }
      }
      prev = cur;
    }
    return best;
  }

  // Boundary regime m <= beta: the common coordinate is free on [u_nu, upper].
  double boundary_for_m(double m, double* u_out) const {
    return maximize_on_interval([&](double u) { return log_f(u, m); }, un_, upper_, 256, u_out);
  }

  double all_at_u_nu() const { return beta_ * std::log(d_ * b0_) + d_ * logg0_; }
  double u_nu() const { return un_; }

 private:
  static constexpr int kGrid = 400;
  unsigned nu_;
  double beta_;
  double d_;
  EtaContext ctx_;
  double eta_ = 0.0;
  double un_ = 0.0;
  double b0_ = 0.0;
  double logg0_ = 0.0;
  double upper_ = 0.0;
  std::vector<double> grid_u_, grid_a_, grid_b_;
};

}  // namespace detail

/// sup over [u_nu, inf)^d of F_nu(x)^beta G(x).
inline SupremumResult sup_FbetaG(unsigned nu, double beta, std::size_t d, const EtaContext& ctx) {
  if (d < 3) throw std::invalid_argument("sup_FbetaG: d must be at least 3");
  if (!(beta > 0.0)) throw std::invalid_argument("sup_FbetaG: beta must be positive");
  if (nu < 1) throw std::invalid_argument("sup_FbetaG: nu must be at least 1");
  const detail::FbetaGProblem prob(nu, beta, d, ctx);

  SupremumResult res;
  res.d = d;
  res.r = nu;
  res.beta = beta;
  res.log_value = prob.all_at_u_nu();
  res.maximizer_u = prob.u_nu();
  res.m_star = 0;
  auto consider = [&](double v, double u, std::size_t m) {
    if (v > res.log_value) {
      res.log_value = v;
      res.maximizer_u = u;
      res.m_star = m;
    }
  };

  const auto m_lo = static_cast<std::size_t>(std::floor(beta)) + 1;
  for (std::size_t m = 1; m < m_lo && m <= d; ++m) {
    double u = prob.u_nu();
    const double v = prob.boundary_for_m(static_cast<double>(m), &u);
    consider(v, u, m);
  }

  auto eval_m = [&](std::size_t m) {
    double u = prob.u_nu();
    const double v = prob.best_for_m(static_cast<double>(m), &u);
    consider(v, u, m);
    return v;
  };

  if (m_lo <= d) {
    if (d <= 10000) {
      for (std::size_t m = m_lo; m <= d; ++m) eval_m(m);
    } else {
      // Geometric subgrid, then repeated refinement of the bracket around the best m.
      std::vector<std::size_t> ms;
      const double ratio = std::pow(static_cast<double>(d) / static_cast<double>(m_lo), 1.0 / 400.0);
      double x = static_cast<double>(m_lo);
      while (x < static_cast<double>(d)) {
        const auto m = static_cast<std::size_t>(std::llround(x));
        if (ms.empty() || m > ms.back()) ms.push_back(m);
        x *= ratio;
      }
      if (ms.back() != d) ms.push_back(d);
      for (;;) {
        std::size_t best_k = 0;
        double best_v = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < ms.size(); ++k) {
          const double v = eval_m(ms[k]);
          if (v > best_v) {
            best_v = v;
            best_k = k;
          }
        }
        const std::size_t lo = ms[best_k == 0 ? 0 : best_k - 1];
        const std::size_t hi = ms[std::min(ms.size() - 1, best_k + 1)];
        if (hi - lo <= 64) {
          for (std::size_t m = lo; m <= hi; ++m) eval_m(m);
          break;
        }
        std::vector<std::size_t> next;
        for (int k = 0; k <= 40; ++k) {
          const auto m = lo + static_cast<std::size_t>(std::llround((hi - lo) * (k / 40.0)));
          if (next.empty() || m > next.back()) next.push_back(m);
        }
        ms = std::move(next);
      }
    }
  }
  res.value = std::exp(res.log_value);
  return res;
}

/// Objective F_nu(x)^beta G(x) at an arbitrary point.
inline double f_beta_g(unsigned nu, double beta, const std::vector<double>& x, const EtaContext& ctx) {
  const double eta = ctx.eta();
  double F = 0.0;
  double logg = 0.0;
  for (double xj : x) {
    F += hbar_nu(nu, xj) * Lambda_eta(ctx, xj);
    logg += log_std_normal_cdf(xj + 2.0 * eta);
  }
  return std::pow(F, beta) * std::exp(logg);
}

}  // namespace hdclt
