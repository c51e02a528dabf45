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
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdclt/gaussian_special.hpp"
#include "hdclt/quadrature.hpp"
#include "hdclt/rectangle.hpp"
#include "hdclt/rng.hpp"
#include "json.hpp"

namespace hdclt {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

//------------------------------------------------------------------------------
// Standardized 1D laws (mean 0, variance 1)
//------------------------------------------------------------------------------

enum class Density { exponential, uniform, gaussian, laplace };

inline constexpr double kSqrt3 = 1.7320508075688772935274463415059;
inline constexpr double kLaplaceScale = 0.70710678118654752440084436210485;  // b = 1/sqrt(2)

inline std::string to_string(Density d) {
  switch (d) {
    case Density::exponential: return "exponential";
    case Density::uniform: return "uniform";
    case Density::gaussian: return "gaussian";
    case Density::laplace: return "laplace";
  }
  return "?";
}

inline Density density_from_string(const std::string& s) {
  if (s == "exponential") return Density::exponential;
  if (s == "uniform") return Density::uniform;
  if (s == "gaussian") return Density::gaussian;
  if (s == "laplace") return Density::laplace;
  throw std::invalid_argument("unknown density '" + s + "'");
}

struct DensityInfo {
  double support_lo;
  double support_hi;
  double abs_mean;      // E|X|
  double third_moment;  // E X^3
  double fourth_moment; // E X^4
  bool symmetric;
};

inline DensityInfo density_info(Density d) {
  switch (d) {
    case Density::exponential: return {-1.0, kInf, 2.0 / std::numbers::e, 2.0, 9.0, false};
    case Density::uniform: return {-kSqrt3, kSqrt3, kSqrt3 / 2.0, 0.0, 9.0 / 5.0, true};
    case Density::gaussian:
      return {-kInf, kInf, std::sqrt(2.0 / std::numbers::pi), 0.0, 3.0, true};
    case Density::laplace: return {-kInf, kInf, kLaplaceScale, 0.0, 6.0, true};
  }
  throw std::logic_error("density_info");
}

inline double density_pdf(Density d, double x) {
  switch (d) {
    case Density::exponential: return x < -1.0 ? 0.0 : std::exp(-(x + 1.0));
    case Density::uniform: return std::abs(x) > kSqrt3 ? 0.0 : 1.0 / (2.0 * kSqrt3);
    case Density::gaussian: return std_normal_pdf(x);
    case Density::laplace:
      return std::exp(-std::abs(x) / kLaplaceScale) / (2.0 * kLaplaceScale);
  }
  return 0.0;
}

inline double density_log_pdf(Density d, double x) {
  switch (d) {
    case Density::exponential: return x < -1.0 ? -kInf : -(x + 1.0);
    case Density::uniform: return std::abs(x) > kSqrt3 ? -kInf : -std::log(2.0 * kSqrt3);
    case Density::gaussian: return log_std_normal_pdf(x);
    case Density::laplace: return -std::abs(x) / kLaplaceScale - std::log(2.0 * kLaplaceScale);
  }
  return -kInf;
}

inline double density_sample(Density d, RandomStream& rs) {
  switch (d) {
    case Density::exponential: return rs.exponential() - 1.0;
    case Density::uniform: return kSqrt3 * (2.0 * rs.uniform() - 1.0);
    case Density::gaussian: return rs.normal();
    case Density::laplace: {
      const double e = rs.exponential();
      return (rs.uniform() < 0.5 ? -e : e) * kLaplaceScale;
    }
  }
  return 0.0;
}

/// Mean and variance of X 1{|X| <= kappa}.
struct TruncatedMoments {
  double mean = 0.0;
  double second = 0.0;
  double variance() const { return second - mean * mean; }
};

inline TruncatedMoments truncated_moments(Density d, double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("truncated_moments: kappa must be positive");
  TruncatedMoments out;
  if (d == Density::exponential) {
    // Tail beyond kappa only; the lower end -1 stays inside when kappa >= 1.
    const double k1 = kappa + 1.0;
    const double tail = std::exp(-k1);
    out.mean = -k1 * tail;                       // E X 1{X <= kappa}, since E X = 0
    out.second = 1.0 - (k1 * k1 + 1.0) * tail;  // 1 - E X^2 1{X > kappa}
    if (kappa < 1.0) {
      auto m1 = integrate([&](double x) { return x * density_pdf(d, x); }, -kappa, kappa);
      auto m2 = integrate([&](double x) { return x * x * density_pdf(d, x); }, -kappa, kappa);
      out.mean = m1.value;
      out.second = m2.value;
    }
    return out;
  }
  const DensityInfo info = density_info(d);
  const double lo = std::max(-kappa, info.support_lo);
  const double hi = std::min(kappa, info.support_hi);
  out.mean = info.symmetric ? 0.0
                            : integrate([&](double x) { return x * density_pdf(d, x); }, lo, hi).value;
  out.second = integrate([&](double x) { return x * x * density_pdf(d, x); }, lo, hi, 1e-15, 1e-13).value;
  return out;
}

//------------------------------------------------------------------------------
// Model description
//------------------------------------------------------------------------------

enum class Family {
  product_exponential,
  product_custom_1d,
  gaussian_affine,
  moving_average,
  nonlinear_quadratic,
  chaos_q2,
};

inline std::string to_string(Family f) {
  switch (f) {
    case Family::product_exponential: return "product-exponential";
    case Family::product_custom_1d: return "product-custom-1d";
    case Family::gaussian_affine: return "gaussian-affine";
    case Family::moving_average: return "moving-average-m-dependent";
    case Family::nonlinear_quadratic: return "nonlinear-quadratic";
    case Family::chaos_q2: return "chaos-q2";
  }
  return "?";
}

inline Family family_from_string(const std::string& s) {
  for (Family f : {Family::product_exponential, Family::product_custom_1d, Family::gaussian_affine,
                   Family::moving_average, Family::nonlinear_quadratic, Family::chaos_q2})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown model family '" + s + "'");
}

struct ModelSpec {
  Family family = Family::product_exponential;
  std::size_t d = 1;
  std::size_t n = 1;
  std::uint64_t seed = 1;
  // Entry law for product-custom-1d and nonlinear-quadratic, innovation law
  // for moving-average, source law for gaussian-affine.
  Density density = Density::exponential;
  Eigen::MatrixXd mixing;           // gaussian-affine: d x k; empty means identity
  std::vector<double> ma_coeffs{1.0};  // moving-average weights c_0..c_m
  double epsilon = 0.0;             // nonlinear-quadratic coupling
  Eigen::MatrixXd chaos_lambda;     // chaos-q2: d x K eigenvalues

  Density entry_density() const {
    return family == Family::product_exponential ? Density::exponential : density;
  }

  std::size_t window() const { return ma_coeffs.empty() ? 0 : ma_coeffs.size() - 1; }

  // Columns of one source row (chaos: number of shared Gaussian directions).
  std::size_t source_dim() const {
    if (family == Family::gaussian_affine && mixing.size() != 0)
      return static_cast<std::size_t>(mixing.cols());
    if (family == Family::chaos_q2) return static_cast<std::size_t>(chaos_lambda.cols());
    return d;
  }

  bool has_independent_rows() const {
    return family == Family::product_exponential || family == Family::product_custom_1d ||
           family == Family::gaussian_affine || family == Family::nonlinear_quadratic;
  }

  bool is_linear_sum() const {
    return family == Family::product_exponential || family == Family::product_custom_1d ||
           family == Family::gaussian_affine || family == Family::moving_average;
  }

  bool has_product_kernel() const {
    return family == Family::product_exponential || family == Family::product_custom_1d ||
           family == Family::gaussian_affine;
  }

  void validate() const {
    if (d < 1) throw std::invalid_argument("ModelSpec: d must be positive");
    if (n < 1) throw std::invalid_argument("ModelSpec: n must be positive");
    switch (family) {
      case Family::gaussian_affine:
        if (mixing.size() != 0 && static_cast<std::size_t>(mixing.rows()) != d)
          throw std::invalid_argument("ModelSpec: mixing matrix must have d rows");
        break;
      case Family::moving_average: {
        if (ma_coeffs.empty()) throw std::invalid_argument("ModelSpec: empty moving-average weights");
        double s = 0.0;
        for (double c : ma_coeffs) s += c * c;
        if (std::abs(s - 1.0) > 1e-10)
          throw std::invalid_argument("ModelSpec: moving-average weights must satisfy sum c_k^2 = 1");
        break;
      }
      case Family::nonlinear_quadratic:
        if (n < 3) throw std::invalid_argument("ModelSpec: nonlinear-quadratic needs n >= 3");
        break;
      case Family::chaos_q2: {
        if (static_cast<std::size_t>(chaos_lambda.rows()) != d || chaos_lambda.cols() < 1)
          throw std::invalid_argument("ModelSpec: chaos eigenvalue matrix must be d x K");
        for (Eigen::Index j = 0; j < chaos_lambda.rows(); ++j) {
          const double s = 2.0 * chaos_lambda.row(j).squaredNorm();
          if (std::abs(s - 1.0) > 1e-10)
            throw std::invalid_argument("ModelSpec: chaos row " + std::to_string(j) +
                                        " violates 2 sum lambda^2 = 1");
        }
        break;
      }
      default: break;
    }
  }
};

inline void to_json(nlohmann::json& j, const ModelSpec& s) {
  j = nlohmann::json{{"family", to_string(s.family)}, {"d", s.d}, {"n", s.n}, {"seed", s.seed},
                     {"density", to_string(s.density)}};
  if (s.family == Family::gaussian_affine && s.mixing.size() != 0) {
    nlohmann::json m = nlohmann::json::array();
    for (Eigen::Index r = 0; r < s.mixing.rows(); ++r) {
      std::vector<double> row;
      for (Eigen::Index c = 0; c < s.mixing.cols(); ++c) row.push_back(s.mixing(r, c));
      m.push_back(row);
    }
    j["mixing"] = m;
  }
  if (s.family == Family::moving_average) j["ma_coeffs"] = s.ma_coeffs;
  if (s.family == Family::nonlinear_quadratic) j["epsilon"] = s.epsilon;
  if (s.family == Family::chaos_q2) {
    nlohmann::json m = nlohmann::json::array();
    for (Eigen::Index r = 0; r < s.chaos_lambda.rows(); ++r) {
      std::vector<double> row;
      for (Eigen::Index c = 0; c < s.chaos_lambda.cols(); ++c) row.push_back(s.chaos_lambda(r, c));
      m.push_back(row);
    }
    j["chaos_lambda"] = m;
  }
}

namespace detail {
inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument(std::string(what) + ": expected array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(r).size()) != cols)
      throw std::invalid_argument(std::string(what) + ": ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}
}  // namespace detail

inline void from_json(const nlohmann::json& j, ModelSpec& s) {
  s = ModelSpec{};
  s.family = family_from_string(j.at("family").get<std::string>());
  s.d = j.at("d").get<std::size_t>();
  s.n = j.value("n", std::size_t{1});
  s.seed = j.value("seed", std::uint64_t{1});
  const std::string def = s.family == Family::gaussian_affine ? "gaussian" : "exponential";
  s.density = density_from_string(j.value("density", def));
  if (j.contains("mixing")) s.mixing = detail::matrix_from_json(j.at("mixing"), "mixing");
  if (j.contains("ma_coeffs")) s.ma_coeffs = j.at("ma_coeffs").get<std::vector<double>>();
  if (j.contains("ma_window") && !j.contains("ma_coeffs")) {
    // Equal weights over a window of radius m.
    const auto m = j.at("ma_window").get<std::size_t>();
    s.ma_coeffs.assign(m + 1, 1.0 / std::sqrt(static_cast<double>(m + 1)));
  }
  s.epsilon = j.value("epsilon", 0.0);
  if (j.contains("chaos_lambda")) s.chaos_lambda = detail::matrix_from_json(j.at("chaos_lambda"), "chaos_lambda");
  if (s.family == Family::chaos_q2 && j.contains("chaos_profile")) {
    // Each coordinate spreads its mass equally over k private directions.
    const auto k = j.at("chaos_profile").get<std::size_t>();
    s.chaos_lambda = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.d), static_cast<Eigen::Index>(s.d * k));
    for (std::size_t r = 0; r < s.d; ++r)
      for (std::size_t c = 0; c < k; ++c)
        s.chaos_lambda(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r * k + c)) =
            1.0 / std::sqrt(2.0 * static_cast<double>(k));
  }
  s.validate();
}

//------------------------------------------------------------------------------
// Covariance
//------------------------------------------------------------------------------

/// Covariance with its diagonal extremes and smallest eigenvalue. Diagonal
/// matrices keep only their diagonal so very large d stays cheap.
struct SigmaStats {
  bool diagonal = true;
  Eigen::VectorXd diag;
  Eigen::MatrixXd sigma;  // populated only when !diagonal
  double sigma_bar_sq = 0.0;
  double sigma_under_sq = 0.0;
  double sigma_star_sq = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(diag.size()); }

  double operator()(std::size_t j, std::size_t k) const {
    if (diagonal) return j == k ? diag(static_cast<Eigen::Index>(j)) : 0.0;
    return sigma(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
  }

  Eigen::MatrixXd dense() const {
    if (!diagonal) return sigma;
    return diag.asDiagonal();
  }

  static SigmaStats from_diagonal(const Eigen::VectorXd& v) {
    SigmaStats s;
    s.diagonal = true;
    s.diag = v;
    s.sigma_bar_sq = v.maxCoeff();
    s.sigma_under_sq = v.minCoeff();
    s.sigma_star_sq = s.sigma_under_sq;
    return s;
  }

  static SigmaStats from_matrix(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("SigmaStats: matrix must be square");
    if (!m.isApprox(m.transpose(), 1e-12))
      throw std::invalid_argument("SigmaStats: matrix must be symmetric");
    bool is_diag = true;
    for (Eigen::Index j = 0; j < m.rows() && is_diag; ++j)
      for (Eigen::Index k = 0; k < m.cols(); ++k)
        if (j != k && m(j, k) != 0.0) {
          is_diag = false;
          break;
        }
    if (is_diag) return from_diagonal(m.diagonal());
    SigmaStats s;
    s.diagonal = false;
    s.sigma = 0.5 * (m + m.transpose());
    s.diag = s.sigma.diagonal();
    s.sigma_bar_sq = s.diag.maxCoeff();
    s.sigma_under_sq = s.diag.minCoeff();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.sigma, Eigen::EigenvaluesOnly);
    s.sigma_star_sq = es.eigenvalues()(0);
    if (s.sigma_star_sq < -1e-10 * std::max(1.0, s.sigma_bar_sq))
      throw std::invalid_argument("SigmaStats: matrix is not positive semidefinite");
    return s;
  }

  static SigmaStats identity(std::size_t d) {
    return from_diagonal(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d)));
  }
};

/// Covariance of a single source row X_i.
inline SigmaStats exact_row_sigma(const ModelSpec& spec) {
  spec.validate();
  const auto d = static_cast<Eigen::Index>(spec.d);
  switch (spec.family) {
    case Family::gaussian_affine:
      if (spec.mixing.size() == 0) return SigmaStats::identity(spec.d);
      return SigmaStats::from_matrix(spec.mixing * spec.mixing.transpose());
    case Family::chaos_q2:
      return SigmaStats::from_matrix(2.0 * spec.chaos_lambda * spec.chaos_lambda.transpose());
    default: return SigmaStats::from_diagonal(Eigen::VectorXd::Ones(d));
  }
}

/// Exact covariance of the statistic W.
inline SigmaStats exact_sigma(const ModelSpec& spec) {
  spec.validate();
  const auto d = static_cast<Eigen::Index>(spec.d);
  const double n = static_cast<double>(spec.n);
  switch (spec.family) {
    case Family::moving_average: {
      // (1/n) sum_{|h| < n} (n - |h|) gamma(h), gamma(h) = sum_k c_k c_{k+h}.
      const auto& c = spec.ma_coeffs;
      double v = 0.0;
      for (std::size_t h = 0; h < c.size() && h < spec.n; ++h) {
        double g = 0.0;
        for (std::size_t k = 0; k + h < c.size(); ++k) g += c[k] * c[k + h];
        v += (h == 0 ? 1.0 : 2.0) * (n - static_cast<double>(h)) * g;
      }
      return SigmaStats::from_diagonal(Eigen::VectorXd::Constant(d, v / n));
    }
    case Family::nonlinear_quadratic:
      return SigmaStats::from_diagonal(Eigen::VectorXd::Constant(d, 1.0 + spec.epsilon * spec.epsilon / n));
    default: return exact_row_sigma(spec);
  }
}

//------------------------------------------------------------------------------
// Sampling
//------------------------------------------------------------------------------

struct SampleBatch {
  RowMatrix x;  // n x d rows (chaos: 1 x K Gaussian directions)
  Family family = Family::product_exponential;
  std::uint64_t seed = 0;
  std::uint64_t replication = 0;
  std::uint64_t task = 0;

  std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
};

namespace detail {

inline void fill_rows(const ModelSpec& spec, RandomStream& rs, RowMatrix& out, std::size_t rows) {
  switch (spec.family) {
    case Family::gaussian_affine: {
      const std::size_t k = spec.source_dim();
      RowMatrix xi(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(k));
      for (Eigen::Index i = 0; i < xi.rows(); ++i)
        for (Eigen::Index c = 0; c < xi.cols(); ++c) xi(i, c) = density_sample(spec.density, rs);
      if (spec.mixing.size() == 0) {
        out = std::move(xi);
      } else {
        out = xi * spec.mixing.transpose();
      }
      return;
    }
    case Family::moving_average: {
      const std::size_t m = spec.window();
      RowMatrix zeta(static_cast<Eigen::Index>(rows + m), static_cast<Eigen::Index>(spec.d));
      for (Eigen::Index i = 0; i < zeta.rows(); ++i)
        for (Eigen::Index c = 0; c < zeta.cols(); ++c) zeta(i, c) = density_sample(spec.density, rs);
      out.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(spec.d));
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < spec.d; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k <= m; ++k)
            s += spec.ma_coeffs[k] * zeta(static_cast<Eigen::Index>(i + k), static_cast<Eigen::Index>(j));
          out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
        }
      }
      return;
    }
    case Family::chaos_q2: {
      out.resize(1, static_cast<Eigen::Index>(spec.source_dim()));
      for (Eigen::Index c = 0; c < out.cols(); ++c) out(0, c) = rs.normal();
      return;
    }
    default: {
      const Density law = spec.entry_density();
      out.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(spec.d));
      for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index c = 0; c < out.cols(); ++c) out(i, c) = density_sample(law, rs);
      return;
    }
  }
}

}  // namespace detail

/// Deterministic function of (spec.seed, task, replication, role).
inline SampleBatch generate(const ModelSpec& spec, std::uint64_t replication, std::uint64_t task = 0,
                            StreamRole role = StreamRole::sample) {
  SampleBatch b;
  b.family = spec.family;
  b.seed = spec.seed;
  b.replication = replication;
  b.task = task;
  RandomStream rs(spec.seed, replication, role, task);
  detail::fill_rows(spec, rs, b.x, spec.family == Family::chaos_q2 ? 1 : spec.n);
  return b;
}

/// W = F(X) for the configured statistic.
inline Eigen::VectorXd evaluate_statistic(const ModelSpec& spec, const RowMatrix& x) {
  if (spec.family == Family::chaos_q2) {
    Eigen::VectorXd sq(x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) sq(k) = x(0, k) * x(0, k) - 1.0;
    return spec.chaos_lambda * sq;
  }
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const double rn = std::sqrt(static_cast<double>(n));
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) w += x.row(i).transpose();
  w /= rn;
  if (spec.family == Family::nonlinear_quadratic && spec.epsilon != 0.0) {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index nx = (i + 1) % n;
      q += x.row(i).transpose().cwiseProduct(x.row(nx).transpose());
    }
    w += (spec.epsilon / static_cast<double>(n)) * q;
  }
  return w;
}

inline Eigen::VectorXd evaluate_statistic(const ModelSpec& spec, const SampleBatch& b) {
  return evaluate_statistic(spec, b.x);
}

/// Draws W directly when the law of W is available in closed form
/// (product-exponential: W_j = (Gamma(n) - n)/sqrt(n)); otherwise generates the rows.
inline Eigen::VectorXd sample_w(const ModelSpec& spec, std::uint64_t replication, std::uint64_t task = 0) {
  if (spec.family == Family::product_exponential) {
    RandomStream rs(spec.seed, replication, StreamRole::direct, task);
    const double n = static_cast<double>(spec.n);
    const double rn = std::sqrt(n);
    Eigen::VectorXd w(static_cast<Eigen::Index>(spec.d));
    for (Eigen::Index j = 0; j < w.size(); ++j) w(j) = (rs.gamma(n) - n) / rn;
    return w;
  }
  return evaluate_statistic(spec, generate(spec, replication, task));
}

//------------------------------------------------------------------------------
// Exchangeable pair W' = W - (xi_I - xi'_I)/sqrt(n)
//------------------------------------------------------------------------------

struct PairCoupling {
  Eigen::VectorXd w;
  Eigen::VectorXd w_prime;
  Eigen::VectorXd d_vec;  // w_prime - w
  std::size_t resampled_index = 0;
  Eigen::VectorXd xi_prime;
};

inline void require_pair_model(const ModelSpec& spec, const char* who) {
  if (!spec.has_independent_rows() || !spec.is_linear_sum())
    throw std::invalid_argument(std::string(who) + ": needs a sum of independent rows");
}

/// One fresh source row from the given stream.
inline Eigen::VectorXd fresh_row(const ModelSpec& spec, RandomStream& rs) {
  RowMatrix r;
  detail::fill_rows(spec, rs, r, 1);
  return r.row(0).transpose();
}

inline PairCoupling exchangeable_pair(const ModelSpec& spec, const SampleBatch& batch) {
  require_pair_model(spec, "exchangeable_pair");
  PairCoupling p;
  const double rn = std::sqrt(static_cast<double>(batch.rows()));
  RandomStream rs(spec.seed, batch.replication, StreamRole::pair, batch.task);
  p.resampled_index = static_cast<std::size_t>(rs.index(batch.rows()));
  p.xi_prime = fresh_row(spec, rs);
  p.w = evaluate_statistic(spec, batch);
  const Eigen::VectorXd xi = batch.x.row(static_cast<Eigen::Index>(p.resampled_index)).transpose();
  p.w_prime = p.w - (xi - p.xi_prime) / rn;
  p.d_vec = p.w_prime - p.w;
  return p;
}

/// E[W' - W | sample], averaging over the index I exactly and over xi' by its mean 0.
inline Eigen::VectorXd analytic_pair_mean(const ModelSpec& spec, const SampleBatch& batch) {
  require_pair_model(spec, "analytic_pair_mean");
  const auto n = static_cast<Eigen::Index>(batch.rows());
  const double rn = std::sqrt(static_cast<double>(n));
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(batch.x.cols());
  for (Eigen::Index i = 0; i < n; ++i) acc += (0.0 - batch.x.row(i).transpose().array()).matrix() / rn;
  return acc / static_cast<double>(n);
}

//------------------------------------------------------------------------------
// Replacement family W^A for A = {1:i} and A = {i}
//------------------------------------------------------------------------------

struct PerturbedFamily {
  Eigen::VectorXd w;
  RowMatrix prefix;  // row i holds W^{1:i}, i = 0..n
  RowMatrix single;  // row i-1 holds W^{i}, i = 1..n
};

namespace detail {

// Change in F when row i moves from `old_row` to `new_row`, with neighbours
// read from the current configuration `cur`.
inline Eigen::VectorXd row_change_effect(const ModelSpec& spec, const RowMatrix& cur, Eigen::Index i,
                                         const Eigen::VectorXd& old_row, const Eigen::VectorXd& new_row) {
  const Eigen::Index n = cur.rows();
  const double rn = std::sqrt(static_cast<double>(n));
  Eigen::VectorXd delta = (new_row - old_row) / rn;
  if (spec.family == Family::nonlinear_quadratic && spec.epsilon != 0.0) {
    const Eigen::Index prev = (i + n - 1) % n;
    const Eigen::Index next = (i + 1) % n;
    const Eigen::VectorXd nb = cur.row(prev).transpose() + cur.row(next).transpose();
    delta += (spec.epsilon / static_cast<double>(n)) * (new_row - old_row).cwiseProduct(nb);
  }
  return delta;
}

}  // namespace detail

/// W, W^{1:i} and W^{i} against the independent copy `copy`. With
/// brute_force the statistic is re-evaluated from scratch for every member.
inline PerturbedFamily perturbed_batches(const ModelSpec& spec, const SampleBatch& batch,
                                         const SampleBatch& copy, bool brute_force = false) {
  if (!spec.has_independent_rows())
    throw std::invalid_argument("perturbed_batches: needs independent rows");
  const Eigen::Index n = batch.x.rows();
  const Eigen::Index d = batch.x.cols();
  if (copy.x.rows() != n || copy.x.cols() != d)
    throw std::invalid_argument("perturbed_batches: copy has a different shape");
  PerturbedFamily out;
  out.w = evaluate_statistic(spec, batch.x);
  out.prefix.resize(n + 1, d);
  out.single.resize(n, d);
  out.prefix.row(0) = out.w.transpose();
  if (brute_force) {
    RowMatrix cur = batch.x;
    for (Eigen::Index i = 0; i < n; ++i) {
      RowMatrix one = batch.x;
      one.row(i) = copy.x.row(i);
      out.single.row(i) = evaluate_statistic(spec, one).transpose();
      cur.row(i) = copy.x.row(i);
      out.prefix.row(i + 1) = evaluate_statistic(spec, cur).transpose();
    }
    return out;
  }
  RowMatrix cur = batch.x;
  Eigen::VectorXd running = out.w;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd old_row = batch.x.row(i).transpose();
    const Eigen::VectorXd new_row = copy.x.row(i).transpose();
    out.single.row(i) = (out.w + detail::row_change_effect(spec, batch.x, i, old_row, new_row)).transpose();
    running += detail::row_change_effect(spec, cur, i, old_row, new_row);
    cur.row(i) = copy.x.row(i);
    out.prefix.row(i + 1) = running.transpose();
  }
  return out;
}

}  // namespace hdclt
