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
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdclt/gaussian_special.hpp"
#include "hdclt/models.hpp"
#include "hdclt/parallel.hpp"
#include "hdclt/rectangle.hpp"
#include "hdclt/rng.hpp"

namespace hdclt {

/// Column-major sample store: one row per replication of W.
using SampleMatrix = Eigen::MatrixXd;

//------------------------------------------------------------------------------
// Reference measure
//------------------------------------------------------------------------------

struct ProbEstimate {
  double value = 0.0;
  double se = 0.0;
  bool exact = false;
};

/// P(Z in A) for Z ~ N(0, Sigma): exact for diagonal Sigma, antithetic MC otherwise.
inline ProbEstimate gaussian_rect_prob(const SigmaStats& sigma, const Rectangle& A,
                                       std::size_t reps = 10000000, std::uint64_t seed = 1) {
  A.validate();
  if (A.dim() != sigma.dim()) throw std::invalid_argument("gaussian_rect_prob: dimension mismatch");
  if (sigma.diagonal) {
    double p = 1.0;
    for (std::size_t j = 0; j < A.dim(); ++j) {
      const double s = std::sqrt(sigma(j, j));
      p *= std_normal_interval_mass(A.lower[j] / s, A.upper[j] / s);
    }
    return {p, 0.0, true};
  }
  const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(sigma.sigma).matrixL();
  const std::size_t pairs = std::max<std::size_t>(1, reps / 2);
  const std::vector<double> vals = replicate(pairs, [&](std::size_t r) {
    RandomStream rs(seed, r, StreamRole::reference);
    Eigen::VectorXd z(static_cast<Eigen::Index>(A.dim()));
    for (auto& v : z) v = rs.normal();
    const Eigen::VectorXd g = L * z;
    return 0.5 * ((A.contains(g) ? 1.0 : 0.0) + (A.contains(-g) ? 1.0 : 0.0));
  });
  const McEstimate e = batch_estimate(vals);
  return {e.value, e.se, false};
}

//------------------------------------------------------------------------------
// Rectangle families
//------------------------------------------------------------------------------

enum class FamilyKind { lower_orthant_grid, symmetric_box_grid, random_rectangles, custom };

struct RectangleFamily {
  FamilyKind kind = FamilyKind::custom;
  std::size_t resolution = 0;
  double extent = 0.0;
  std::vector<Rectangle> members;
  // For the grid kinds: member k is {x : max_j s(W_j)/sigma_j <= levels[k]},
  // with s the identity (orthant) or the absolute value (box).
  std::vector<double> levels;
};

inline std::string to_string(FamilyKind k) {
  switch (k) {
    case FamilyKind::lower_orthant_grid: return "lower-orthant-grid";
    case FamilyKind::symmetric_box_grid: return "symmetric-box-grid";
    case FamilyKind::random_rectangles: return "random-rectangles";
    case FamilyKind::custom: return "custom";
  }
  return "?";
}

inline std::vector<double> default_quantile_levels() {
  std::vector<double> p;
  for (int k = 0; k < 50; ++k) p.push_back(0.01 + 0.02 * k);
  return p;
}

/// Thresholds from the reference quantiles of max_j Z_j / sigma_j.
inline RectangleFamily lower_orthant_grid(const SigmaStats& sigma, const std::vector<double>& probs) {
  RectangleFamily f;
  f.kind = FamilyKind::lower_orthant_grid;
  f.resolution = probs.size();
  const double d = static_cast<double>(sigma.dim());
  for (double p : probs) {
    const double y = std_normal_quantile(std::exp(std::log(p) / d));
    std::vector<double> b(sigma.dim());
    for (std::size_t j = 0; j < b.size(); ++j) b[j] = y * std::sqrt(sigma(j, j));
    f.levels.push_back(y);
    f.members.push_back(Rectangle::lower_orthant(b));
  }
  f.extent = f.levels.empty() ? 0.0 : f.levels.back();
  return f;
}

/// Boxes [-y sigma_j, y sigma_j] at the reference quantiles of max_j |Z_j| / sigma_j.
inline RectangleFamily symmetric_box_grid(const SigmaStats& sigma, const std::vector<double>& probs) {
  RectangleFamily f;
  f.kind = FamilyKind::symmetric_box_grid;
  f.resolution = probs.size();
  const double d = static_cast<double>(sigma.dim());
  for (double p : probs) {
    const double y = std_normal_quantile(0.5 * (1.0 + std::exp(std::log(p) / d)));
    std::vector<double> a(sigma.dim()), b(sigma.dim());
    for (std::size_t j = 0; j < b.size(); ++j) {
      b[j] = y * std::sqrt(sigma(j, j));
      a[j] = -b[j];
    }
    f.levels.push_back(y);
    f.members.emplace_back(std::move(a), std::move(b));
  }
  f.extent = f.levels.empty() ? 0.0 : f.levels.back();
  return f;
}

/// Random rectangles with endpoints at marginal reference quantiles. Each
/// member draws a target mass p ~ U(0.05, 0.95), gives every coordinate the
/// mass p^{1/d}, and splits the excluded mass randomly between the two tails
/// (one tail is dropped with probability 1/4 each, giving infinite sides).
inline RectangleFamily random_rectangles(const SigmaStats& sigma, std::size_t count, std::uint64_t seed) {
  RectangleFamily f;
  f.kind = FamilyKind::random_rectangles;
  f.resolution = count;
  f.extent = 0.95;
  const std::size_t d = sigma.dim();
  for (std::size_t k = 0; k < count; ++k) {
    RandomStream rs(seed, k, StreamRole::family);
    const double p = 0.05 + 0.9 * rs.uniform();
    const double excl = -std::expm1(std::log(p) / static_cast<double>(d));
    std::vector<double> a(d), b(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double u = rs.uniform();
      double v = rs.uniform();
      if (u < 0.25) v = 0.0;
      else if (u < 0.5) v = 1.0;
      const double left = excl * v;
      const double right = excl - left;
      const double s = std::sqrt(sigma(j, j));
      a[j] = left > 0.0 ? s * std_normal_quantile(left) : -kInf;
      b[j] = right > 0.0 ? s * std_normal_quantile_upper(right) : kInf;
    }
    f.members.emplace_back(std::move(a), std::move(b));
  }
  return f;
}

/// Concatenation, used for the default family (orthant grid + random rectangles).
inline RectangleFamily merge_families(const std::vector<RectangleFamily>& parts) {
  RectangleFamily f;
  f.kind = FamilyKind::custom;
  for (const auto& p : parts) {
    f.members.insert(f.members.end(), p.members.begin(), p.members.end());
    f.resolution += p.resolution;
  }
  return f;
}

inline RectangleFamily default_family(const SigmaStats& sigma, std::size_t random_count, std::uint64_t seed) {
  return merge_families({lower_orthant_grid(sigma, default_quantile_levels()),
                         random_rectangles(sigma, random_count, seed)});
}

//------------------------------------------------------------------------------
// Empirical distances
//------------------------------------------------------------------------------

struct DistanceEstimate {
  double value = 0.0;
  std::size_t argmax = 0;
  std::string family;
  std::vector<double> per_rect_se;
  double max_se = 0.0;
  double argmax_se = 0.0;
  bool reference_exact = true;
  bool degraded = false;  // some reference CI wider than the requested tolerance
};

/// Empirical frequencies of every member over the sample rows.
inline std::vector<double> empirical_frequencies(const SampleMatrix& w, const RectangleFamily& fam) {
  const Eigen::Index N = w.rows();
  const Eigen::Index d = w.cols();
  std::vector<double> freq(fam.members.size(), 0.0);
  parallel_for(fam.members.size(), [&](std::size_t k) {
    const Rectangle& A = fam.members[k];
    if (static_cast<Eigen::Index>(A.dim()) != d)
      throw std::invalid_argument("empirical_distance: rectangle dimension mismatch");
    std::vector<unsigned char> alive(static_cast<std::size_t>(N), 1);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double a = A.lower[static_cast<std::size_t>(j)];
      const double b = A.upper[static_cast<std::size_t>(j)];
      if (a == -kInf && b == kInf) continue;
      const double* col = w.col(j).data();
      unsigned char* al = alive.data();
      for (Eigen::Index r = 0; r < N; ++r) al[r] &= static_cast<unsigned char>((col[r] >= a) & (col[r] <= b));
    }
    std::size_t c = 0;
    for (unsigned char v : alive) c += v;
    freq[k] = static_cast<double>(c) / static_cast<double>(N);
  });
  return freq;
}

inline DistanceEstimate empirical_distance(const SampleMatrix& w, const SigmaStats& sigma,
                                           const RectangleFamily& fam, std::size_t ref_reps = 10000000,
                                           double tolerance = 1.0, std::uint64_t ref_seed = 7) {
  if (fam.members.empty()) throw std::invalid_argument("empirical_distance: empty family");
  const double N = static_cast<double>(w.rows());
  const std::vector<double> freq = empirical_frequencies(w, fam);
  DistanceEstimate out;
  out.family = to_string(fam.kind);
  out.per_rect_se.resize(fam.members.size());
  out.value = -1.0;
  for (std::size_t k = 0; k < fam.members.size(); ++k) {
    const ProbEstimate ref = gaussian_rect_prob(sigma, fam.members[k], ref_reps, ref_seed + k);
    if (!ref.exact) out.reference_exact = false;
    if (2.0 * ref.se > tolerance) out.degraded = true;
    const double f = freq[k];
    const double se = std::sqrt(ref.value * (1.0 - ref.value) / N + ref.se * ref.se);
    out.per_rect_se[k] = se;
    out.max_se = std::max(out.max_se, se);
    const double diff = std::abs(f - ref.value);
    if (diff > out.value) {
      out.value = diff;
      out.argmax = k;
      out.argmax_se = se;
    }
  }
  return out;
}

/// sup_x |ECDF of max_j W_j - prod_j Phi(x / sigma_j)|, evaluated at the jumps.
inline DistanceEstimate max_kolmogorov(const SampleMatrix& w, const SigmaStats& sigma) {
  if (!sigma.diagonal) throw std::invalid_argument("max_kolmogorov: needs a diagonal reference");
  const Eigen::Index N = w.rows();
  std::vector<double> m(static_cast<std::size_t>(N));
  for (Eigen::Index r = 0; r < N; ++r) m[static_cast<std::size_t>(r)] = w.row(r).maxCoeff();
  std::sort(m.begin(), m.end());
  std::vector<double> sd(sigma.dim());
  for (std::size_t j = 0; j < sd.size(); ++j) sd[j] = std::sqrt(sigma(j, j));
  DistanceEstimate out;
  out.family = "max-statistic";
  const double n = static_cast<double>(N);
  for (std::size_t i = 0; i < m.size(); ++i) {
    double lf = 0.0;
    for (double s : sd) lf += log_std_normal_cdf(m[i] / s);
    const double F = std::exp(lf);
    const double up = static_cast<double>(i + 1) / n - F;
    const double dn = F - static_cast<double>(i) / n;
    const double v = std::max(up, dn);
    if (v > out.value) {
      out.value = v;
      out.argmax = i;
    }
  }
  out.max_se = 0.5 / std::sqrt(n);
  out.argmax_se = out.max_se;
  return out;
}

//------------------------------------------------------------------------------
// Anti-concentration
//------------------------------------------------------------------------------

/// Thresholds y_k = levels[k] * 1 + offset.
struct ThresholdFamily {
  std::vector<double> levels;
  Eigen::VectorXd offset;
};

/// Random levels with P(max_j (Z_j - offset_j) <= level) roughly uniform on
/// (0.05, 0.95) under Sigma = I, and an offset with i.i.d. N(0, jitter^2) entries.
inline ThresholdFamily random_thresholds(std::size_t d, std::size_t count, double jitter, std::uint64_t seed) {
  ThresholdFamily t;
  RandomStream rs(seed, 0, StreamRole::family, d);
  t.offset.resize(static_cast<Eigen::Index>(d));
  for (auto& v : t.offset) v = jitter * rs.normal();
  for (std::size_t k = 0; k < count; ++k) {
    const double p = 0.05 + 0.9 * rs.uniform();
    t.levels.push_back(std_normal_quantile(std::exp(std::log(p) / static_cast<double>(d))));
  }
  return t;
}

struct AntiConcentrationRow {
  std::size_t y_index = 0;
  double epsilon = 0.0;
  double difference = 0.0;  // P(Y <= y + eps) - P(Y <= y)
  double se = 0.0;
  double bound = 0.0;       // eps / sigma_under (sqrt(2 log d) + 2)
  bool violation = false;   // difference > bound + 4 se
};

struct AntiConcentrationReport {
  std::vector<AntiConcentrationRow> rows;
  std::size_t violations = 0;
  double worst_margin = kInf;  // min over rows of bound + 4 se - difference
};

/// eps / sigma_under (sqrt(2 log d) + 2), with log d floored at log 3.
inline double anti_concentration_bound(double eps, double sigma_under, std::size_t d) {
  const double ld = std::log(std::max<double>(3.0, static_cast<double>(d)));
  return eps / sigma_under * (std::sqrt(2.0 * ld) + 2.0);
}

inline AntiConcentrationReport anti_concentration_check(const SigmaStats& sigma, const std::vector<double>& eps,
                                                        const ThresholdFamily& ys, std::size_t reps,
                                                        std::uint64_t seed = 11) {
  const std::size_t d = sigma.dim();
  if (static_cast<std::size_t>(ys.offset.size()) != d)
    throw std::invalid_argument("anti_concentration_check: offset dimension mismatch");
  const double su = std::sqrt(sigma.sigma_under_sq);
  if (!(su > 0.0)) throw std::invalid_argument("anti_concentration_check: sigma_under must be positive");
  Eigen::MatrixXd L;
  if (!sigma.diagonal) L = Eigen::LLT<Eigen::MatrixXd>(sigma.sigma).matrixL();
  Eigen::VectorXd sd(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) sd(static_cast<Eigen::Index>(j)) = std::sqrt(sigma(j, j));
  // t = max_j (Y_j - offset_j): Y <= y_k + e  iff  t <= level_k + e.
  const std::vector<double> t = replicate(reps, [&](std::size_t r) {
    RandomStream rs(seed, r, StreamRole::reference, d);
    double m = -kInf;
    if (sigma.diagonal) {
      for (std::size_t j = 0; j < d; ++j)
        m = std::max(m, sd(static_cast<Eigen::Index>(j)) * rs.normal() - ys.offset(static_cast<Eigen::Index>(j)));
    } else {
      Eigen::VectorXd z(static_cast<Eigen::Index>(d));
      for (auto& v : z) v = rs.normal();
      m = (L * z - ys.offset).maxCoeff();
    }
    return m;
  });
  std::vector<double> sorted = t;
  std::sort(sorted.begin(), sorted.end());
  const double N = static_cast<double>(reps);
  auto count_le = [&](double x) {
    return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
  };
  AntiConcentrationReport rep;
  for (std::size_t k = 0; k < ys.levels.size(); ++k) {
    const double base = count_le(ys.levels[k]);
    for (double e : eps) {
      AntiConcentrationRow row;
      row.y_index = k;
      row.epsilon = e;
      const double p = (count_le(ys.levels[k] + e) - base) / N;
      row.difference = p;
      row.se = std::sqrt(std::max(p * (1.0 - p), 0.0) / N);
      row.bound = anti_concentration_bound(e, su, d);
      const double margin = row.bound + 4.0 * row.se - row.difference;
      row.violation = margin < 0.0;
      rep.violations += row.violation ? 1 : 0;
      rep.worst_margin = std::min(rep.worst_margin, margin);
      rep.rows.push_back(row);
    }
  }
  return rep;
}

//------------------------------------------------------------------------------
// Transport utilities
//------------------------------------------------------------------------------

/// Exact rectangle distance between Z and Z + c e_1: Phi(c/2) - Phi(-c/2).
inline double shift_distance_exact(double c) {
  return std_normal_interval_mass(-0.5 * std::abs(c), 0.5 * std::abs(c));
}

struct ShiftCheckRow {
  double c = 0.0;
  std::size_t d = 0;
  double lhs = 0.0;
  double rhs = 0.0;  // (log d)^{1/3} c^{2/3}
  bool pass = false;
};

inline std::vector<ShiftCheckRow> w2_shift_check(const std::vector<double>& cs, const std::vector<std::size_t>& ds) {
  std::vector<ShiftCheckRow> out;
  for (std::size_t d : ds) {
    if (d < 3) throw std::invalid_argument("w2_shift_check: d must be at least 3");
    for (double c : cs) {
      ShiftCheckRow r;
      r.c = c;
      r.d = d;
      r.lhs = shift_distance_exact(c);
      r.rhs = std::cbrt(std::log(static_cast<double>(d))) * std::cbrt(c * c);
      r.pass = r.lhs <= r.rhs;
      out.push_back(r);
    }
  }
  return out;
}

/// W_2 between two equal-size 1D samples via the sorted (monotone) coupling.
inline double w2_empirical_1d(std::vector<double> a, std::vector<double> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("w2_empirical_1d: need equal non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

//------------------------------------------------------------------------------
// Sample collection
//------------------------------------------------------------------------------

/// reps draws of W stacked into a sample matrix (row r = replication r).
inline SampleMatrix collect_w(const ModelSpec& spec, std::size_t reps, std::uint64_t task = 0) {
  SampleMatrix w(static_cast<Eigen::Index>(reps), static_cast<Eigen::Index>(spec.d));
  parallel_for((reps + 255) / 256, [&](std::size_t blk) {
    for (std::size_t r = blk * 256; r < std::min(reps, blk * 256 + 256); ++r)
      w.row(static_cast<Eigen::Index>(r)) = sample_w(spec, r, task).transpose();
  });
  return w;
}

/// reps draws of Z ~ N(0, Sigma).
inline SampleMatrix collect_gaussian(const SigmaStats& sigma, std::size_t reps, std::uint64_t seed,
                                     std::uint64_t task = 0) {
  const auto d = static_cast<Eigen::Index>(sigma.dim());
  SampleMatrix w(static_cast<Eigen::Index>(reps), d);
  Eigen::MatrixXd L;
  if (!sigma.diagonal) L = Eigen::LLT<Eigen::MatrixXd>(sigma.sigma).matrixL();
  parallel_for((reps + 255) / 256, [&](std::size_t blk) {
    for (std::size_t r = blk * 256; r < std::min(reps, blk * 256 + 256); ++r) {
      RandomStream rs(seed, r, StreamRole::reference, task);
      Eigen::VectorXd z(d);
      for (auto& v : z) v = rs.normal();
      if (sigma.diagonal) z = z.cwiseProduct(sigma.diag.cwiseSqrt());
      else z = L * z;
      w.row(static_cast<Eigen::Index>(r)) = z.transpose();
    }
  });
  return w;
}

}  // namespace hdclt
