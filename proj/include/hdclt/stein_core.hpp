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

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdclt/gaussian_special.hpp"
#include "hdclt/models.hpp"
#include "hdclt/parallel.hpp"
#include "hdclt/quadrature.hpp"
#include "hdclt/rectangle.hpp"
#include "hdclt/rng.hpp"

namespace hdclt {

//------------------------------------------------------------------------------
// 1D Stein kernels tau(x) = p(x)^{-1} int_x^inf y p(y) dy
//------------------------------------------------------------------------------

inline double kernel_exponential(double x) { return x < -1.0 ? 0.0 : x + 1.0; }
inline double kernel_uniform(double x) { return std::abs(x) > kSqrt3 ? 0.0 : 0.5 * (3.0 - x * x); }
inline double kernel_gaussian(double) { return 1.0; }
inline double kernel_laplace(double x) { return kLaplaceScale * (std::abs(x) + kLaplaceScale); }

inline double kernel_closed_form(Density d, double x) {
  switch (d) {
    case Density::exponential: return kernel_exponential(x);
    case Density::uniform: return kernel_uniform(x);
    case Density::gaussian: return kernel_gaussian(x);
    case Density::laplace: return kernel_laplace(x);
  }
  return 0.0;
}

/// Quadrature kernel; nullopt when x is outside the support (p(x) < 1e-300).
/// For x < 0 the equivalent left form -int_{-inf}^x y p(y) dy is used, and the
/// integrand is normalised by p(x) in log space.
inline std::optional<double> kernel_numeric(Density d, double x) {
  if (!(density_pdf(d, x) >= 1e-300)) return std::nullopt;
  const DensityInfo info = density_info(d);
  const double lp = density_log_pdf(d, x);
  auto ratio = [&](double y) {
    const double l = density_log_pdf(d, y);
    return std::isinf(l) ? 0.0 : y * std::exp(l - lp);
  };
  QuadratureResult q;
  if (x >= 0.0) {
    q = integrate_infinite(ratio, x, info.support_hi, 1e-14, 1e-12);
    return q.value;
  }
  q = integrate_infinite(ratio, info.support_lo, x, 1e-14, 1e-12);
  return -q.value;
}

struct Kernel1D {
  Density density = Density::gaussian;
  double support_lo = -kInf;
  double support_hi = kInf;

  explicit Kernel1D(Density d) : density(d) {
    const DensityInfo info = density_info(d);
    support_lo = info.support_lo;
    support_hi = info.support_hi;
  }
  double tau(double x) const { return kernel_closed_form(density, x); }
};

/// Per-coordinate kernels of an independent-coordinate law; off-diagonal entries vanish.
struct ProductKernel {
  std::vector<Kernel1D> coords;

  static ProductKernel uniform_law(Density d, std::size_t dim) {
    ProductKernel k;
    k.coords.assign(dim, Kernel1D(d));
    return k;
  }
  double entry(std::size_t j, std::size_t k, double x) const { return j == k ? coords[j].tau(x) : 0.0; }
};

/// Refined kernel (1/n) sum_i tau(X_i) of W for product and affine models.
inline Eigen::MatrixXd refined_kernel_matrix(const ModelSpec& spec, const SampleBatch& batch) {
  if (!spec.has_product_kernel())
    throw std::invalid_argument("refined_kernel_matrix: model has no product Stein kernel");
  const Eigen::Index d = static_cast<Eigen::Index>(spec.d);
  const double n = static_cast<double>(batch.rows());
  if (spec.family == Family::gaussian_affine) {
    if (spec.mixing.size() == 0) {
      Eigen::VectorXd t = Eigen::VectorXd::Zero(d);
      for (Eigen::Index i = 0; i < batch.x.rows(); ++i)
        for (Eigen::Index c = 0; c < d; ++c) t(c) += kernel_closed_form(spec.density, batch.x(i, c));
      return (t / n).asDiagonal();
    }
    if (spec.density == Density::gaussian) return spec.mixing * spec.mixing.transpose();
    // tau(M xi) = M diag(tau(xi_k)) M^T; recover xi from the stored rows.
    const Eigen::Index k = spec.mixing.cols();
    const auto cod = spec.mixing.completeOrthogonalDecomposition();
    if (cod.rank() < k)
      throw std::invalid_argument("refined_kernel_matrix: non-Gaussian affine model needs a full-column-rank mixing");
    const Eigen::MatrixXd pinv = cod.pseudoInverse();
    Eigen::VectorXd t = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < batch.x.rows(); ++i) {
      const Eigen::VectorXd xi = pinv * batch.x.row(i).transpose();
      for (Eigen::Index c = 0; c < k; ++c) t(c) += kernel_closed_form(spec.density, xi(c));
    }
    return spec.mixing * (t / n).asDiagonal() * spec.mixing.transpose();
  }
  const Density law = spec.entry_density();
  Eigen::VectorXd t = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < batch.x.rows(); ++i)
    for (Eigen::Index c = 0; c < d; ++c) t(c) += kernel_closed_form(law, batch.x(i, c));
  return (t / n).asDiagonal();
}

//------------------------------------------------------------------------------
// Test-function dictionary (version 1)
//------------------------------------------------------------------------------

inline constexpr int kTestDictionaryVersion = 1;

enum class TestFunction { quadratic, damped_cubic, gaussian_bump, sin_projection };

inline const std::array<TestFunction, 4>& test_dictionary() {
  static const std::array<TestFunction, 4> all{TestFunction::quadratic, TestFunction::damped_cubic,
                                               TestFunction::gaussian_bump, TestFunction::sin_projection};
  return all;
}

inline std::string to_string(TestFunction f) {
  switch (f) {
    case TestFunction::quadratic: return "quadratic";
    case TestFunction::damped_cubic: return "damped-cubic";
    case TestFunction::gaussian_bump: return "gaussian-bump";
    case TestFunction::sin_projection: return "sin-projection";
  }
  return "?";
}

inline TestFunction test_function_from_string(const std::string& s) {
  for (TestFunction f : test_dictionary())
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown test function '" + s + "'");
}

struct TestFunctionValue {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

/// f, its gradient and Hessian at w.
///   quadratic:      sum_j w_j^2
///   damped-cubic:   sum_j w_j^3 exp(-w_j^2 / 2)
///   gaussian-bump:  exp(-|w|^2 / (2d))
///   sin-projection: sin(a.w), a = (1, ..., 1)/sqrt(d)
inline TestFunctionValue eval_test_function(TestFunction f, const Eigen::VectorXd& w) {
  const Eigen::Index d = w.size();
  TestFunctionValue out;
  out.grad = Eigen::VectorXd::Zero(d);
  out.hess = Eigen::MatrixXd::Zero(d, d);
  switch (f) {
    case TestFunction::quadratic:
      out.value = w.squaredNorm();
      out.grad = 2.0 * w;
      out.hess.diagonal().setConstant(2.0);
      break;
    case TestFunction::damped_cubic:
      for (Eigen::Index j = 0; j < d; ++j) {
        const double x = w(j);
        const double x2 = x * x;
        const double e = std::exp(-0.5 * x2);
        out.value += x * x2 * e;
        out.grad(j) = (3.0 * x2 - x2 * x2) * e;
        out.hess(j, j) = x * (6.0 - 7.0 * x2 + x2 * x2) * e;
      }
      break;
    case TestFunction::gaussian_bump: {
      const double s2 = static_cast<double>(d);
      const double v = std::exp(-0.5 * w.squaredNorm() / s2);
      out.value = v;
      out.grad = -(v / s2) * w;
      out.hess = (v / (s2 * s2)) * (w * w.transpose());
      out.hess.diagonal().array() -= v / s2;
      break;
    }
    case TestFunction::sin_projection: {
      const double a = 1.0 / std::sqrt(static_cast<double>(d));
      const double z = a * w.sum();
      out.value = std::sin(z);
      out.grad.setConstant(a * std::cos(z));
      out.hess.setConstant(-a * a * std::sin(z));
      break;
    }
  }
  return out;
}

struct SteinResidual {
  TestFunction f = TestFunction::quadratic;
  McEstimate lhs;
  McEstimate rhs;
  McEstimate residual;  // paired LHS - RHS per replication
};

/// MC estimate of sum_j E[d_j f(W) W_j] - sum_jk E[d_jk f(W) tau_jk], with tau the
/// refined (pre-conditioning) kernel (1/n) sum_i tau(X_i).
inline std::vector<SteinResidual> stein_identity_residuals(const ModelSpec& spec,
                                                           const std::vector<TestFunction>& fs,
                                                           std::size_t reps, std::uint64_t task = 0) {
  if (!spec.has_product_kernel())
    throw std::invalid_argument("stein_identity_residual: model has no product Stein kernel");
  const std::size_t nf = fs.size();
  // Per replication: (lhs, rhs) for each function.
  std::vector<double> buf(reps * 2 * nf);
  parallel_for((reps + 255) / 256, [&](std::size_t blk) {
    const std::size_t lo = blk * 256;
    const std::size_t hi = std::min(reps, lo + 256);
    for (std::size_t r = lo; r < hi; ++r) {
      const SampleBatch b = generate(spec, r, task);
      const Eigen::VectorXd w = evaluate_statistic(spec, b);
      const Eigen::MatrixXd tau = refined_kernel_matrix(spec, b);
      for (std::size_t q = 0; q < nf; ++q) {
        const TestFunctionValue tv = eval_test_function(fs[q], w);
        buf[(r * nf + q) * 2] = tv.grad.dot(w);
        buf[(r * nf + q) * 2 + 1] = (tv.hess.array() * tau.array()).sum();
      }
    }
  });
  std::vector<SteinResidual> out(nf);
  std::vector<double> l(reps), rr(reps), df(reps);
  for (std::size_t q = 0; q < nf; ++q) {
    for (std::size_t r = 0; r < reps; ++r) {
      l[r] = buf[(r * nf + q) * 2];
      rr[r] = buf[(r * nf + q) * 2 + 1];
      df[r] = l[r] - rr[r];
    }
    out[q].f = fs[q];
    out[q].lhs = batch_estimate(l);
    out[q].rhs = batch_estimate(rr);
    out[q].residual = batch_estimate(df);
  }
  return out;
}

inline SteinResidual stein_identity_residual(const ModelSpec& spec, TestFunction f, std::size_t reps,
                                             std::uint64_t task = 0) {
  return stein_identity_residuals(spec, {f}, reps, task).front();
}

//------------------------------------------------------------------------------
// Ornstein-Uhlenbeck smoothing of centred rectangle indicators
//------------------------------------------------------------------------------

namespace detail {

// P(a < c x + rho Z < b) for Z ~ N(0, sigma^2).
inline double shifted_interval_mass(double a, double b, double cx, double scale) {
  const double lo = std::isinf(a) ? a : (a - cx) / scale;
  const double hi = std::isinf(b) ? b : (b - cx) / scale;
  return std_normal_interval_mass(lo, hi);
}

inline double gaussian_rect_prob_diag(const SigmaStats& sigma, const Rectangle& A) {
  double p = 1.0;
  for (std::size_t j = 0; j < A.dim(); ++j)
    p *= shifted_interval_mass(A.lower[j], A.upper[j], 0.0, std::sqrt(sigma(j, j)));
  return p;
}

}  // namespace detail

/// T_s h(x) with h = 1_A - P(Z in A). Exact for diagonal Sigma; MC otherwise.
inline McEstimate ou_smooth(const Rectangle& A, const Eigen::VectorXd& x, double s, const SigmaStats& sigma,
                            std::size_t reps = 100000, std::uint64_t seed = 1) {
  if (!(s > 0.0)) throw std::invalid_argument("ou_smooth: s must be positive");
  const std::size_t d = A.dim();
  const double c = std::exp(-s);
  const double rho = std::sqrt(-std::expm1(-2.0 * s));
  if (sigma.diagonal) {
    double p = 1.0;
    for (std::size_t j = 0; j < d; ++j)
      p *= detail::shifted_interval_mass(A.lower[j], A.upper[j], c * x(static_cast<Eigen::Index>(j)),
                                         rho * std::sqrt(sigma(j, j)));
    return {p - detail::gaussian_rect_prob_diag(sigma, A), 0.0, 0};
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma.sigma);
  const Eigen::MatrixXd L = llt.matrixL();
  const std::vector<double> vals = replicate(reps, [&](std::size_t r) {
    RandomStream rs(seed, r, StreamRole::reference);
    Eigen::VectorXd z(static_cast<Eigen::Index>(d));
    for (auto& v : z) v = rs.normal();
    const Eigen::VectorXd g = L * z;
    const Eigen::VectorXd y = c * x + rho * g;
    return (A.contains(y) ? 1.0 : 0.0) - (A.contains(g) ? 1.0 : 0.0);
  });
  return batch_estimate(vals);
}

//------------------------------------------------------------------------------
// Derivative sums of psi_t = -int_t^inf T_s h ds (identity covariance)
//------------------------------------------------------------------------------

struct PsiDerivativeSums {
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;
};

namespace detail {

// k-th x-derivative of P(a < c x + rho Z < b), Z standard normal.
inline double interval_mass_derivative(unsigned k, double a, double b, double x, double c, double rho) {
  if (k == 0) return shifted_interval_mass(a, b, c * x, rho);
  auto phi_k = [&](double u) {  // (k-1)-th derivative of phi
    if (std::isinf(u)) return 0.0;
    const double sign = ((k - 1) % 2 == 0) ? 1.0 : -1.0;
    return sign * hermite_H(k - 1, u) * std_normal_pdf(u);
  };
  const double beta = std::isinf(b) ? b : (b - c * x) / rho;
  const double alpha = std::isinf(a) ? a : (a - c * x) / rho;
  const double scale = std::pow(-c / rho, static_cast<double>(k));
  return scale * (phi_k(beta) - phi_k(alpha));
}

}  // namespace detail

inline PsiDerivativeSums psi_derivative_sums(const Rectangle& A, const Eigen::VectorXd& x, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("psi_derivative_sums: t must be positive");
  const std::size_t d = A.dim();
  if (d > 5) throw std::invalid_argument("psi_derivative_sums: intended for d <= 5");
  const double s_max = t + 40.0;

  auto partial = [&](const std::vector<unsigned>& order) {
    auto integrand = [&](double s) {
      const double c = std::exp(-s);
      const double rho = std::sqrt(-std::expm1(-2.0 * s));
      double prod = 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        prod *= detail::interval_mass_derivative(order[j], A.lower[j], A.upper[j],
                                                 x(static_cast<Eigen::Index>(j)), c, rho);
        if (prod == 0.0) break;
      }
      return prod;
    };
    // Split near t where the integrand is steepest.
    double total = 0.0;
    double a = t;
    for (double b : {t + 0.01, t + 0.1, t + 1.0, s_max}) {
      if (b <= a) continue;
      total += integrate(integrand, a, b, 1e-12, 1e-10).value;
      a = b;
    }
    return -total;
  };

  PsiDerivativeSums out;
  std::vector<unsigned> ord(d, 0);
  for (std::size_t j = 0; j < d; ++j) {
    ord.assign(d, 0);
    ++ord[j];
    out.s1 += std::abs(partial(ord));
    for (std::size_t k = 0; k < d; ++k) {
      std::vector<unsigned> o2 = ord;
      ++o2[k];
      out.s2 += std::abs(partial(o2));
      for (std::size_t l = 0; l < d; ++l) {
        std::vector<unsigned> o3 = o2;
        ++o3[l];
        out.s3 += std::abs(partial(o3));
      }
    }
  }
  return out;
}

}  // namespace hdclt
