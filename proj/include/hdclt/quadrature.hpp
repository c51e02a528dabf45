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
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace hdclt {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t intervals = 0;
  bool converged = false;
};

namespace detail {

inline constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <typename F>
Panel gauss_kronrod_15(F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kron = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int k = 0; k < 7; ++k) {
    const double x = h * kKronrodNodes[k];
    const double s = f(c - x) + f(c + x);
    kron += kKronrodWeights[k] * s;
    if (k % 2 == 1) gauss += kGaussWeights[k / 2] * s;
  }
  return {a, b, kron * h, std::abs((kron - gauss) * h)};
}

}  // namespace detail

// Globally adaptive G7-K15 on a finite interval.
template <typename F>
QuadratureResult integrate(F&& f, double a, double b, double abs_tol = 1e-13,
                           double rel_tol = 1e-11, std::size_t max_intervals = 4000) {
  if (!(std::isfinite(a) && std::isfinite(b)))
    throw std::invalid_argument("integrate: use integrate_infinite for unbounded ranges");
  QuadratureResult out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  std::priority_queue<detail::Panel> heap;
  heap.push(detail::gauss_kronrod_15(f, a, b));
  double total = heap.top().value;
  double err = heap.top().error;
  while (err > std::max(abs_tol, rel_tol * std::abs(total)) && heap.size() < max_intervals) {
    const detail::Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      heap.push(worst);
      break;
    }
    const detail::Panel left = detail::gauss_kronrod_15(f, worst.a, mid);
    const detail::Panel right = detail::gauss_kronrod_15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to shed accumulated cancellation from the running updates.
  total = 0.0;
  err = 0.0;
  out.intervals = heap.size();
  while (!heap.empty()) {
    total += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  out.value = total;
  out.error = err;
  out.converged = err <= std::max(abs_tol, rel_tol * std::abs(total));
  return out;
}

// Handles infinite endpoints through x = a + t/(1-t) style maps.
template <typename F>
QuadratureResult integrate_infinite(F&& f, double a, double b, double abs_tol = 1e-13,
                                    double rel_tol = 1e-11, std::size_t max_intervals = 4000) {
  const bool lo_inf = std::isinf(a);
  const bool hi_inf = std::isinf(b);
  if (!lo_inf && !hi_inf) return integrate(f, a, b, abs_tol, rel_tol, max_intervals);
  if (lo_inf && hi_inf) {
    auto g = [&](double t) {
      const double one = 1.0 - t * t;
      if (one <= 0.0) return 0.0;
      const double x = t / one;
      const double v = f(x);
      return v == 0.0 ? 0.0 : v * (1.0 + t * t) / (one * one);
    };
    return integrate(g, -1.0, 1.0, abs_tol, rel_tol, max_intervals);
  }
  if (hi_inf) {
    auto g = [&](double t) {
      const double one = 1.0 - t;
      if (one <= 0.0) return 0.0;
      const double v = f(a + t / one);
      return v == 0.0 ? 0.0 : v / (one * one);
    };
    return integrate(g, 0.0, 1.0, abs_tol, rel_tol, max_intervals);
  }
  auto g = [&](double t) {
    const double one = 1.0 - t;
    if (one <= 0.0) return 0.0;
    const double v = f(b - t / one);
    return v == 0.0 ? 0.0 : v / (one * one);
  };
  return integrate(g, 0.0, 1.0, abs_tol, rel_tol, max_intervals);
}

}  // namespace hdclt
