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
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdclt/models.hpp"
#include "hdclt/parallel.hpp"
#include "hdclt/rng.hpp"
#include "hdclt/stein_core.hpp"

namespace hdclt {

//------------------------------------------------------------------------------
// Stein-kernel deviation
//------------------------------------------------------------------------------

/// E max_jk |(1/n) sum_i tau_jk(X_i) - Sigma_jk|, the refined (pre-conditioning) form.
inline McEstimate delta_w(const ModelSpec& spec, std::size_t reps, std::uint64_t task = 0) {
  if (!spec.has_product_kernel()) throw std::invalid_argument("delta_w: model has no product Stein kernel");
  const SigmaStats sigma = exact_sigma(spec);
  const double rn = std::sqrt(static_cast<double>(spec.n));
  if (spec.family == Family::gaussian_affine && spec.density == Density::gaussian) {
    // tau is the constant Sigma.
    return McEstimate{0.0, 0.0, reps};
  }
  std::vector<double> vals;
  if (spec.family == Family::product_exponential) {
    // tau_jj - 1 = (1/n) sum_i X_ij = W_j / sqrt(n); off-diagonal entries are 0.
    vals = replicate(reps, [&](std::size_t r) {
      return sample_w(spec, r, task).cwiseAbs().maxCoeff() / rn;
    });
  } else {
    const Eigen::MatrixXd S = sigma.dense();
    vals = replicate(reps, [&](std::size_t r) {
      const SampleBatch b = generate(spec, r, task);
      return (refined_kernel_matrix(spec, b) - S).cwiseAbs().maxCoeff();
    });
  }
  return batch_estimate(vals);
}

//------------------------------------------------------------------------------
// Exchangeable pair with Lambda = I/n
//------------------------------------------------------------------------------

struct ExchPairTerms {
  McEstimate delta1;
  McEstimate delta2;
  std::vector<double> etas;
  std::vector<McEstimate> delta3;  // one per eta
  bool refined = true;             // conditional expectations taken given the full sample
};

/// 1/2 ((1/n) sum_i xi_i xi_i^T + Sigma): the exact (I, xi') average of (1/2) n D D^T given the sample.
inline Eigen::MatrixXd exch_delta1_inner(const RowMatrix& x, const Eigen::MatrixXd& row_sigma) {
  const double n = static_cast<double>(x.rows());
  return 0.5 * (x.transpose() * x / n + row_sigma);
}

inline ExchPairTerms exch_pair_terms(const ModelSpec& spec, const std::vector<double>& etas,
                                     std::size_t reps, std::uint64_t task = 0) {
  require_pair_model(spec, "exch_pair_terms");
  for (double e : etas)
    if (e < 0.0) throw std::invalid_argument("exch_pair_terms: eta must be non-negative");
  const Eigen::MatrixXd S = exact_row_sigma(spec).dense();
  const std::size_t ne = etas.size();
  const std::size_t stride = 2 + ne;
  std::vector<double> buf(reps * stride);
  parallel_for((reps + 63) / 64, [&](std::size_t blk) {
    for (std::size_t r = blk * 64; r < std::min(reps, blk * 64 + 64); ++r) {
      const SampleBatch b = generate(spec, r, task);
      const Eigen::Index n = b.x.rows();
      const double rn = std::sqrt(static_cast<double>(n));
      double* out = &buf[r * stride];
      out[0] = (S - exch_delta1_inner(b.x, S)).cwiseAbs().maxCoeff();
      // One fresh xi'_i per index: averaging n ||D_i||^4 over I gives sum_i ||D_i||^4.
      RandomStream rs(spec.seed, r, StreamRole::pair, task);
      double d2 = 0.0;
      std::vector<double> d3(ne, 0.0);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd xp = fresh_row(spec, rs);
        const double dn = (xp - b.x.row(i).transpose()).cwiseAbs().maxCoeff() / rn;
        const double q = dn * dn * dn * dn;
        d2 += q;
        for (std::size_t e = 0; e < ne; ++e)
          if (dn > etas[e]) d3[e] += q;
      }
      out[1] = d2;
      for (std::size_t e = 0; e < ne; ++e) out[2 + e] = d3[e];
    }
  });
  ExchPairTerms t;
  t.etas = etas;
  std::vector<double> col(reps);
  auto column = [&](std::size_t c) {
    for (std::size_t r = 0; r < reps; ++r) col[r] = buf[r * stride + c];
    return batch_estimate(col);
  };
  t.delta1 = column(0);
  t.delta2 = column(1);
  for (std::size_t e = 0; e < ne; ++e) t.delta3.push_back(column(2 + e));
  return t;
}

//------------------------------------------------------------------------------
// Non-linear statistic terms
//------------------------------------------------------------------------------

/// Optional truncation X 1{|X| <= kappa} - E[X 1{|X| <= kappa}] applied entrywise.
struct Truncation {
  bool enabled = false;
  double kappa = 0.0;

  /// kappa_n = B_n sqrt(5 log(dn)).
  static Truncation rate_choice(std::size_t d, std::size_t n, double B_n = 1.0) {
    return {true, B_n * std::sqrt(5.0 * std::log(static_cast<double>(d) * static_cast<double>(n)))};
  }
};

inline RowMatrix apply_truncation(const RowMatrix& x, double kappa, double mean) {
  RowMatrix out = x;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    double& v = out.data()[i];
    v = (std::abs(v) <= kappa ? v : 0.0) - mean;
  }
  return out;
}

struct NonlinearTerms {
  McEstimate delta1;
  McEstimate delta2;
  std::vector<double> etas;
  std::vector<McEstimate> delta3;
  SigmaStats sigma;  // covariance used (truncated when truncation is on)
  Truncation truncation;
};

/// (1/2) sum_i (W^{1:i} - W^{1:(i-1)}) (W^{i} - W)^T.
inline Eigen::MatrixXd delta1_inner_definition(const PerturbedFamily& fam) {
  const Eigen::Index n = fam.single.rows();
  const Eigen::Index d = fam.single.cols();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd a = (fam.prefix.row(i + 1) - fam.prefix.row(i)).transpose();
    const Eigen::VectorXd b = fam.single.row(i).transpose() - fam.w;
    acc += a * b.transpose();
  }
  return 0.5 * acc;
}

/// Linear statistic: (1/2)(1/n) sum_i (xi'_i - xi_i)(xi'_i - xi_i)^T.
inline Eigen::MatrixXd delta1_inner_linear(const RowMatrix& x, const RowMatrix& xp) {
  const RowMatrix diff = xp - x;
  return 0.5 * (diff.transpose() * diff) / static_cast<double>(x.rows());
}

inline NonlinearTerms nonlinear_terms(const ModelSpec& spec, const std::vector<double>& etas,
                                      std::size_t reps, const Truncation& trunc = {},
                                      std::uint64_t task = 0) {
  if (!spec.has_independent_rows()) throw std::invalid_argument("nonlinear_terms: needs independent rows");
  for (double e : etas)
    if (e < 0.0) throw std::invalid_argument("nonlinear_terms: eta must be non-negative");
  NonlinearTerms res;
  res.etas = etas;
  res.truncation = trunc;
  double trunc_mean = 0.0;
  if (trunc.enabled) {
    if (!(spec.family == Family::product_exponential || spec.family == Family::product_custom_1d))
      throw std::invalid_argument("nonlinear_terms: truncation needs a product model");
    const TruncatedMoments tm = truncated_moments(spec.entry_density(), trunc.kappa);
    trunc_mean = tm.mean;
    res.sigma = SigmaStats::from_diagonal(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(spec.d), tm.variance()));
  } else {
    res.sigma = exact_sigma(spec);
  }
  const Eigen::MatrixXd S = res.sigma.dense();
  const std::size_t ne = etas.size();
  const std::size_t stride = 2 + ne;
  std::vector<double> buf(reps * stride);
  parallel_for((reps + 63) / 64, [&](std::size_t blk) {
    for (std::size_t r = blk * 64; r < std::min(reps, blk * 64 + 64); ++r) {
      SampleBatch b = generate(spec, r, task, StreamRole::sample);
      SampleBatch c = generate(spec, r, task, StreamRole::copy);
      if (trunc.enabled) {
        b.x = apply_truncation(b.x, trunc.kappa, trunc_mean);
        c.x = apply_truncation(c.x, trunc.kappa, trunc_mean);
      }
      const PerturbedFamily fam = perturbed_batches(spec, b, c);
      const Eigen::Index n = fam.single.rows();
      double* out = &buf[r * stride];
      out[0] = (S - delta1_inner_definition(fam)).cwiseAbs().maxCoeff();
      Eigen::VectorXd sum_pre = Eigen::VectorXd::Zero(fam.w.size());
      Eigen::VectorXd sum_single = Eigen::VectorXd::Zero(fam.w.size());
      std::vector<double> d3(ne, 0.0);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::ArrayXd a = (fam.prefix.row(i + 1) - fam.prefix.row(i)).transpose().array();
        const Eigen::ArrayXd s = fam.single.row(i).transpose().array() - fam.w.array();
        const Eigen::ArrayXd a4 = a.square().square();
        const Eigen::ArrayXd s4 = s.square().square();
        sum_pre += a4.matrix();
        sum_single += s4.matrix();
        const double smax = s.abs().maxCoeff();
        const double term = a4.maxCoeff() + s4.maxCoeff();
        for (std::size_t e = 0; e < ne; ++e)
          if (smax > etas[e]) d3[e] += term;
      }
      out[1] = sum_pre.maxCoeff() + sum_single.maxCoeff();
      for (std::size_t e = 0; e < ne; ++e) out[2 + e] = d3[e];
    }
  });
  std::vector<double> col(reps);
  auto column = [&](std::size_t cidx) {
    for (std::size_t r = 0; r < reps; ++r) col[r] = buf[r * stride + cidx];
    return batch_estimate(col);
  };
  res.delta1 = column(0);
  res.delta2 = column(1);
  for (std::size_t e = 0; e < ne; ++e) res.delta3.push_back(column(2 + e));
  return res;
}

//------------------------------------------------------------------------------
// Local dependence (moving-average rows, W = sum_i X_i with X_i = row_i / sqrt(n))
//------------------------------------------------------------------------------

/// E|X_il| for one unscaled row; exact for Gaussian innovations or m = 0,
/// otherwise a fixed-seed 10^6-draw pre-estimate.
inline double ma_row_abs_mean(const ModelSpec& spec) {
  if (spec.density == Density::gaussian) return std::sqrt(2.0 / std::numbers::pi);
  if (spec.window() == 0) return std::abs(spec.ma_coeffs[0]) * density_info(spec.density).abs_mean;
  RandomStream rs(spec.seed, 0, StreamRole::auxiliary, 0xA11E5ull);
  constexpr std::size_t draws = 1000000;
  double acc = 0.0;
  for (std::size_t r = 0; r < draws; ++r) {
    double s = 0.0;
    for (double c : spec.ma_coeffs) s += c * density_sample(spec.density, rs);
    acc += std::abs(s);
  }
  return acc / static_cast<double>(draws);
}

inline McEstimate local_dependence_term(const ModelSpec& spec, std::size_t reps, std::uint64_t task = 0) {
  if (spec.family != Family::moving_average)
    throw std::invalid_argument("local_dependence_term: needs the moving-average model");
  const auto n = static_cast<std::ptrdiff_t>(spec.n);
  const auto m = static_cast<std::ptrdiff_t>(spec.window());
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.n));
  const double e_abs = ma_row_abs_mean(spec) * scale;
  const std::vector<double> vals = replicate(reps, [&](std::size_t r) {
    const SampleBatch b = generate(spec, r, task);
    std::vector<double> a(static_cast<std::size_t>(n));
    for (std::ptrdiff_t i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = b.x.row(i).cwiseAbs().maxCoeff() * scale;
    double total = 0.0;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const std::ptrdiff_t i1lo = std::max<std::ptrdiff_t>(0, i - m), i1hi = std::min(n - 1, i + m);
      const std::ptrdiff_t i2lo = std::max<std::ptrdiff_t>(0, i - 2 * m), i2hi = std::min(n - 1, i + 2 * m);
      double inner = 0.0;
      for (std::ptrdiff_t k = i2lo; k <= i2hi; ++k) inner += a[static_cast<std::size_t>(k)] + e_abs;
      double s1 = 0.0;
      for (std::ptrdiff_t k = i1lo; k <= i1hi; ++k) s1 += a[static_cast<std::size_t>(k)];
      total += a[static_cast<std::size_t>(i)] * s1 * inner;
    }
    return total;
  });
  return batch_estimate(vals);
}

//------------------------------------------------------------------------------
// Second-chaos fourth-moment discrepancy
//------------------------------------------------------------------------------

struct ChaosDeltaBar {
  double exact = 0.0;                // max_j sqrt(48 sum_k lambda_jk^4)
  Eigen::VectorXd exact_sq;          // 48 sum_k lambda_jk^4 per coordinate
  std::vector<McEstimate> mc_sq;     // E W_j^4 - 3 (E W_j^2)^2 per coordinate
  McEstimate mc_max_sq;              // max_j of the coordinate estimates
  // Exact standard error of each mc_sq entry (delta method on m4 - 3 m2^2),
  // from the closed-form moments of the coordinate law.
  std::vector<double> model_se;
};

/// Raw moments E W^0..E W^8 of W = sum_k lambda_k (Z_k^2 - 1), from the
/// cumulants kappa_m = 2^{m-1} (m-1)! sum_k lambda_k^m (kappa_1 = 0).
inline std::array<double, 9> chaos_raw_moments(const Eigen::VectorXd& lambda) {
  std::array<double, 9> kappa{}, mu{};
  double fact = 1.0;  // (m-1)!
  for (int m = 2; m <= 8; ++m) {
    fact *= m - 1;
    kappa[m] = std::ldexp(fact, m - 1) * lambda.array().pow(m).sum();
  }
  mu[0] = 1.0;
  for (int n = 1; n <= 8; ++n) {
    double binom = 1.0;  // C(n-1, k-1)
    for (int k = 1; k <= n; ++k) {
      mu[n] += binom * kappa[k] * mu[n - k];
      binom = binom * (n - k) / k;
    }
  }
  return mu;
}

inline ChaosDeltaBar chaos_delta_bar(const ModelSpec& spec, std::size_t reps, std::uint64_t task = 0) {
  if (spec.family != Family::chaos_q2) throw std::invalid_argument("chaos_delta_bar: needs chaos-q2");
  spec.validate();
  const Eigen::Index d = static_cast<Eigen::Index>(spec.d);
  ChaosDeltaBar out;
  out.exact_sq = 48.0 * spec.chaos_lambda.array().square().square().rowwise().sum().matrix();
  out.exact = std::sqrt(out.exact_sq.maxCoeff());
  if (reps == 0) return out;
  RowMatrix w2(static_cast<Eigen::Index>(reps), d), w4(static_cast<Eigen::Index>(reps), d);
  parallel_for((reps + 255) / 256, [&](std::size_t blk) {
    for (std::size_t r = blk * 256; r < std::min(reps, blk * 256 + 256); ++r) {
      const Eigen::VectorXd w = evaluate_statistic(spec, generate(spec, r, task));
      for (Eigen::Index j = 0; j < d; ++j) {
        const double s = w(j) * w(j);
        w2(static_cast<Eigen::Index>(r), j) = s;
        w4(static_cast<Eigen::Index>(r), j) = s * s;
      }
    }
  });
  // Group statistic m4 - 3 m2^2 over contiguous batches; SE from the batch spread.
  const std::size_t groups = std::min<std::size_t>(kSeGroups, reps);
  std::vector<double> gmax(groups, -kInf);
  for (Eigen::Index j = 0; j < d; ++j) {
    double m2 = 0.0, m4 = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      m2 += w2(static_cast<Eigen::Index>(r), j);
      m4 += w4(static_cast<Eigen::Index>(r), j);
    }
    m2 /= static_cast<double>(reps);
    m4 /= static_cast<double>(reps);
    std::vector<double> g(groups);
    for (std::size_t k = 0; k < groups; ++k) {
      const std::size_t lo = k * reps / groups, hi = (k + 1) * reps / groups;
      double a2 = 0.0, a4 = 0.0;
      for (std::size_t r = lo; r < hi; ++r) {
        a2 += w2(static_cast<Eigen::Index>(r), j);
        a4 += w4(static_cast<Eigen::Index>(r), j);
      }
      a2 /= static_cast<double>(hi - lo);
      a4 /= static_cast<double>(hi - lo);
      g[k] = a4 - 3.0 * a2 * a2;
      gmax[k] = std::max(gmax[k], g[k]);
    }
    McEstimate e = batch_estimate(g, groups);
    e.value = m4 - 3.0 * m2 * m2;
    e.reps = reps;
    out.mc_sq.push_back(e);
    // Influence function W^4 - 6 E[W^2] W^2.
    const auto mu = chaos_raw_moments(spec.chaos_lambda.row(j).transpose());
    const double a = 6.0 * mu[2];
    const double var = mu[8] - 2.0 * a * mu[6] + a * a * mu[4] - (mu[4] - a * mu[2]) * (mu[4] - a * mu[2]);
    out.model_se.push_back(std::sqrt(var / static_cast<double>(reps)));
  }
  out.mc_max_sq = batch_estimate(gmax, groups);
  double best = -kInf;
  for (const auto& e : out.mc_sq) best = std::max(best, e.value);
  out.mc_max_sq.value = best;
  out.mc_max_sq.reps = reps;
  return out;
}

//------------------------------------------------------------------------------
// Nemirovski-type moment control for the centred delta_1 sum
//------------------------------------------------------------------------------

struct NemirovskiCheck {
  McEstimate lhs;  // E max_jk |sum_i (gamma_jk(Y_i) - E gamma_jk)|
  McEstimate rhs_inner;  // E max_jk sum_i gamma_jk(Y_i)^2
  double rhs = 0.0;      // sqrt(8 log(2 d^2)) sqrt(rhs_inner)
};

inline NemirovskiCheck nemirovski_check(const ModelSpec& spec, std::size_t reps, std::uint64_t task = 0) {
  require_pair_model(spec, "nemirovski_check");
  const Eigen::MatrixXd S = exact_row_sigma(spec).dense();
  const double n = static_cast<double>(spec.n);
  std::vector<double> l(reps), q(reps);
  parallel_for((reps + 63) / 64, [&](std::size_t blk) {
    for (std::size_t r = blk * 64; r < std::min(reps, blk * 64 + 64); ++r) {
      const SampleBatch b = generate(spec, r, task, StreamRole::sample);
      const SampleBatch c = generate(spec, r, task, StreamRole::copy);
      const RowMatrix diff = c.x - b.x;
      // gamma_jk(Y_i) = (1/2n) diff_ij diff_ik with mean Sigma_jk / n.
      Eigen::MatrixXd sum = diff.transpose() * diff / (2.0 * n) - S;
      l[r] = sum.cwiseAbs().maxCoeff();
      Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(S.rows(), S.cols());
      for (Eigen::Index i = 0; i < diff.rows(); ++i) {
        const Eigen::VectorXd v = diff.row(i).transpose() / (2.0 * n);
        const Eigen::MatrixXd g = v * diff.row(i);
        sq += g.cwiseProduct(g);
      }
      q[r] = sq.maxCoeff();
    }
  });
  NemirovskiCheck out;
  out.lhs = batch_estimate(l);
  out.rhs_inner = batch_estimate(q);
  const double p = static_cast<double>(spec.d) * static_cast<double>(spec.d);
  out.rhs = std::sqrt(8.0 * std::log(2.0 * p)) * std::sqrt(out.rhs_inner.value);
  return out;
}

//------------------------------------------------------------------------------
// Bound functionals (absolute constants set to 1)
//------------------------------------------------------------------------------

enum class Theorem { t1, c0, t2, t2_simplified, ft4, c2, ft5, cwiener };

inline std::string to_string(Theorem t) {
  switch (t) {
    case Theorem::t1: return "t1";
    case Theorem::c0: return "c0";
    case Theorem::t2: return "t2";
    case Theorem::t2_simplified: return "t2-simplified";
    case Theorem::ft4: return "ft4";
    case Theorem::c2: return "c2";
    case Theorem::ft5: return "ft5";
    case Theorem::cwiener: return "cwiener";
  }
  return "?";
}

inline Theorem theorem_from_string(const std::string& s) {
  for (Theorem t : {Theorem::t1, Theorem::c0, Theorem::t2, Theorem::t2_simplified, Theorem::ft4, Theorem::c2,
                    Theorem::ft5, Theorem::cwiener})
    if (to_string(t) == s) return t;
  throw std::invalid_argument("unknown theorem '" + s + "'");
}

struct BoundTerms {
  double delta_w = 0.0;
  double max_R = 0.0;  // E max_j |R_j|; 0 for the resampling pair
  double Delta1 = 0.0, Delta2 = 0.0, Delta3 = 0.0;
  double delta1 = 0.0, delta2 = 0.0, delta3 = 0.0;
  double local_triple = 0.0;
  double delta_bar = 0.0;
  double B_n = 1.0;
};

class ConstraintViolation : public std::domain_error {
 public:
  ConstraintViolation(const std::string& what, double margin) : std::domain_error(what), margin_(margin) {}
  double margin() const { return margin_; }

 private:
  double margin_;
};

struct AssembledBound {
  double value = 0.0;
  double t = 0.0;
  double eta = 0.0;
};

/// eta-t constraint eta / sqrt(t) <= sigma_* / sqrt(log d); returns the slack.
inline double eta_t_margin(double eta, double t, const SigmaStats& s, std::size_t d) {
  return std::sqrt(s.sigma_star_sq) / std::sqrt(std::log(static_cast<double>(d))) - eta / std::sqrt(t);
}

/// t = (sigma_under / (sigma_bar sigma_*^4) Delta3(0) log d)^{2/3}.
inline double simplified_t(double delta3_zero, const SigmaStats& s, std::size_t d) {
  const double su = std::sqrt(s.sigma_under_sq), sb = std::sqrt(s.sigma_bar_sq);
  return std::pow(su / (sb * s.sigma_star_sq * s.sigma_star_sq) * delta3_zero * std::log(static_cast<double>(d)),
                  2.0 / 3.0);
}

/// c2 choices: t = (B^2 log(dn) / (sigma_*^4 n))^{2/3}, eta = 4 kappa_n / sqrt(n).
inline AssembledBound c2_parameters(const SigmaStats& s, std::size_t d, std::size_t n, double B_n = 1.0) {
  const double ldn = std::log(static_cast<double>(d) * static_cast<double>(n));
  const double nn = static_cast<double>(n);
  AssembledBound out;
  out.t = std::pow(B_n * B_n * ldn / (s.sigma_star_sq * s.sigma_star_sq * nn), 2.0 / 3.0);
  out.eta = 4.0 * B_n * std::sqrt(5.0 * ldn) / std::sqrt(nn);
  return out;
}

inline AssembledBound assemble_bound(Theorem th, const BoundTerms& T, const SigmaStats& s, std::size_t d,
                                     std::size_t n, std::optional<double> t = std::nullopt,
                                     std::optional<double> eta = std::nullopt) {
  const double logd = std::log(static_cast<double>(d));
  const double sb = std::sqrt(s.sigma_bar_sq), su = std::sqrt(s.sigma_under_sq);
  const double ss2 = s.sigma_star_sq, ss = std::sqrt(ss2);
  auto log_or_one = [](double v) { return v > 0.0 ? std::max(std::abs(std::log(v)), 1.0) : 1.0; };
  AssembledBound out;
  auto check = [&](double e, double tt) {
    if (!(tt > 0.0)) throw ConstraintViolation("assemble_bound: t must be positive", -kInf);
    const double margin = eta_t_margin(e, tt, s, d);
    if (margin < 0.0)
      throw ConstraintViolation("assemble_bound: eta/sqrt(t) exceeds sigma_*/sqrt(log d) by " +
                                    std::to_string(-margin),
                                margin);
  };
  switch (th) {
    case Theorem::t1:
      out.value = T.delta_w == 0.0 ? 0.0 : (T.delta_w / ss2) * logd * log_or_one(su * T.delta_w / (sb * ss2));
      break;
    case Theorem::c0: {
      const double nn = static_cast<double>(n);
      out.value = std::sqrt(logd * logd * logd / nn) * std::log(nn) / ss2;
      break;
    }
    case Theorem::cwiener:
      out.value = T.delta_bar == 0.0 ? 0.0 : (T.delta_bar / ss2) * logd * logd * log_or_one(T.delta_bar);
      break;
    case Theorem::t2:
    case Theorem::ft4: {
      const bool pair = th == Theorem::t2;
      const double d3 = pair ? T.Delta3 : T.delta3;
      out.eta = eta.value_or(0.0);
      out.t = t.has_value() ? *t : simplified_t(d3, s, d);
      check(out.eta, out.t);
      const double d1 = pair ? T.Delta1 : T.delta1;
      const double d2 = pair ? T.Delta2 : T.delta2;
      out.value = (pair ? T.max_R * std::sqrt(logd) / ss : 0.0) +
                  d1 * std::max(std::abs(std::log(out.t)), 1.0) * logd / ss2 +
                  (d2 + d3) * logd * logd / (out.t * ss2 * ss2) + (sb / su) * std::sqrt(out.t) * logd;
      break;
    }
    case Theorem::t2_simplified: {
      const double a = su / (sb * ss2 * ss2) * T.Delta3;
      out.t = simplified_t(T.Delta3, s, d);
      out.value = T.max_R * std::sqrt(logd) / ss + T.Delta1 * log_or_one(a) * logd / ss2 +
                  std::cbrt((sb * sb) / (su * su * ss2 * ss2) * T.Delta3 * std::pow(logd, 4.0));
      break;
    }
    case Theorem::c2: {
      const double ldn = std::log(static_cast<double>(d) * static_cast<double>(n));
      const AssembledBound p = c2_parameters(s, d, n, T.B_n);
      out.t = t.value_or(p.t);
      out.eta = eta.value_or(p.eta);
      out.value = std::cbrt(T.B_n * T.B_n * std::pow(ldn, 4.0) / (ss2 * ss2 * static_cast<double>(n)));
      break;
    }
    case Theorem::ft5:
      out.value = std::sqrt(sb / (su * ss2 * ss) * T.local_triple * std::pow(logd, 2.5));
      break;
  }
  return out;
}

/// Collected estimates for one model and theorem.
struct BoundReport {
  std::string theorem;
  std::map<std::string, McEstimate> terms;
  double t = 0.0;
  double eta = 0.0;
  SigmaStats sigma;
  double functional = 0.0;
  bool refined = true;  // conditional expectations replaced by full-sample conditioning
};

}  // namespace hdclt
