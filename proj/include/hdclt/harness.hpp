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

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "hdclt/bound_terms.hpp"
#include "hdclt/hermite_suprema.hpp"
#include "hdclt/models.hpp"
#include "hdclt/rect_distance.hpp"
#include "hdclt/sharpness.hpp"
#include "hdclt/stein_core.hpp"

namespace hdclt {

inline constexpr int kConfigFormatVersion = 1;
inline constexpr int kResultFormatVersion = 1;

//------------------------------------------------------------------------------
// Configuration
//------------------------------------------------------------------------------

/// Acceptance assertion over the records of one estimator (optionally one grid point).
struct Assertion {
  std::string estimator;
  std::optional<std::size_t> n, d;
  std::optional<double> max, min;
  std::optional<double> abs_max_se;  // |value| <= k se
};

struct ExperimentConfig {
  int format_version = kConfigFormatVersion;
  std::string experiment;
  nlohmann::json model;  // ModelSpec template; n and d come from the grids
  std::vector<std::size_t> n_grid;
  std::vector<std::size_t> d_grid;
  std::vector<std::string> estimators;
  std::size_t reps = 1000;
  std::uint64_t seed = 1;
  std::string eta_policy = "auto";  // auto | explicit
  std::optional<double> eta, t;
  std::size_t random_rectangles = 1000;
  std::string output;  // not part of the hash
  bool timing = false; // not part of the hash
  std::vector<Assertion> assertions;

  void validate() const {
    if (format_version != kConfigFormatVersion)
      throw std::invalid_argument("config: unsupported format_version " + std::to_string(format_version) +
                                  " (expected " + std::to_string(kConfigFormatVersion) + ")");
    if (experiment.empty()) throw std::invalid_argument("config: experiment id is empty");
    if (n_grid.empty() || d_grid.empty()) throw std::invalid_argument("config: grids must be non-empty");
    if (estimators.empty()) throw std::invalid_argument("config: estimator list is empty");
    if (reps < 100) throw std::invalid_argument("config: reps must be at least 100");
    if (eta_policy != "auto" && eta_policy != "explicit")
      throw std::invalid_argument("config: eta_policy must be 'auto' or 'explicit'");
    if (eta_policy == "explicit" && (!eta || !t))
      throw std::invalid_argument("config: explicit eta_policy needs both eta and t");
    if (!model.is_object() || !model.contains("family")) throw std::invalid_argument("config: model.family missing");
  }
};

inline void to_json(nlohmann::json& j, const Assertion& a) {
  j = nlohmann::json{{"estimator", a.estimator}};
  if (a.n) j["n"] = *a.n;
  if (a.d) j["d"] = *a.d;
  if (a.max) j["max"] = *a.max;
  if (a.min) j["min"] = *a.min;
  if (a.abs_max_se) j["abs_max_se"] = *a.abs_max_se;
}

inline void from_json(const nlohmann::json& j, Assertion& a) {
  a = Assertion{};
  a.estimator = j.at("estimator").get<std::string>();
  if (j.contains("n")) a.n = j.at("n").get<std::size_t>();
  if (j.contains("d")) a.d = j.at("d").get<std::size_t>();
  if (j.contains("max")) a.max = j.at("max").get<double>();
  if (j.contains("min")) a.min = j.at("min").get<double>();
  if (j.contains("abs_max_se")) a.abs_max_se = j.at("abs_max_se").get<double>();
}

/// Semantic content only: output path and timing switch are excluded.
inline nlohmann::json semantic_json(const ExperimentConfig& c) {
  nlohmann::json j{{"format_version", c.format_version},
                   {"experiment", c.experiment},
                   {"model", c.model},
                   {"n_grid", c.n_grid},
                   {"d_grid", c.d_grid},
                   {"estimators", c.estimators},
                   {"reps", c.reps},
                   {"seed", c.seed},
                   {"eta_policy", c.eta_policy},
                   {"random_rectangles", c.random_rectangles},
                   {"assertions", c.assertions}};
  if (c.eta) j["eta"] = *c.eta;
  if (c.t) j["t"] = *c.t;
  return j;
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = semantic_json(c);
  if (!c.output.empty()) j["output"] = c.output;
  if (c.timing) j["timing"] = true;
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  c.format_version = j.value("format_version", 0);
  c.experiment = j.value("experiment", std::string{});
  c.model = j.at("model");
  c.n_grid = j.at("n_grid").get<std::vector<std::size_t>>();
  c.d_grid = j.at("d_grid").get<std::vector<std::size_t>>();
  c.estimators = j.at("estimators").get<std::vector<std::string>>();
  c.reps = j.value("reps", std::size_t{1000});
  c.seed = j.value("seed", std::uint64_t{1});
  c.eta_policy = j.value("eta_policy", std::string{"auto"});
  if (j.contains("eta")) c.eta = j.at("eta").get<double>();
  if (j.contains("t")) c.t = j.at("t").get<double>();
  c.random_rectangles = j.value("random_rectangles", std::size_t{1000});
  c.output = j.value("output", std::string{});
  c.timing = j.value("timing", false);
  if (j.contains("assertions")) c.assertions = j.at("assertions").get<std::vector<Assertion>>();
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config '" + path + "': " + e.what());
  }
  ExperimentConfig c = j.get<ExperimentConfig>();
  c.validate();
  return c;
}

/// Git blob id (SHA-1 of "blob <len>\0<payload>") of the canonical JSON.
/// nlohmann::json stores objects in sorted order, so key order never matters.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string payload = semantic_json(c).dump();
  const std::string blob = "blob " + std::to_string(payload.size()) + std::string(1, '\0') + payload;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr) != 1)
    throw std::runtime_error("config_hash: SHA-1 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

//------------------------------------------------------------------------------
// Records
//------------------------------------------------------------------------------

struct ResultRecord {
  std::string experiment;
  std::size_t n = 0;
  std::size_t d = 0;
  std::string estimator;  // failures are "error:<estimator>" with NaN value
  double value = 0.0;
  double se = 0.0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;

  bool is_error() const { return estimator.rfind("error:", 0) == 0; }
  bool operator==(const ResultRecord& o) const {
    auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
    return experiment == o.experiment && n == o.n && d == o.d && estimator == o.estimator &&
           same(value, o.value) && same(se, o.se) && same(wall_ms, o.wall_ms) && seed == o.seed &&
           config_hash == o.config_hash;
  }
};

//------------------------------------------------------------------------------
// Estimators
//------------------------------------------------------------------------------

struct GridPoint {
  std::size_t n = 0;
  std::size_t d = 0;
  std::uint64_t task = 0;
};

struct EstimateValue {
  std::string name;
  double value = 0.0;
  double se = 0.0;
};

inline ModelSpec spec_at(const ExperimentConfig& c, const GridPoint& g) {
  nlohmann::json m = c.model;
  m["n"] = g.n;
  m["d"] = g.d;
  m["seed"] = c.seed;
  return m.get<ModelSpec>();
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline BoundTerms collect_terms(Theorem th, const ModelSpec& spec, const ExperimentConfig& c, std::uint64_t task,
                                const std::vector<double>& etas) {
  BoundTerms T;
  switch (th) {
    case Theorem::t1: T.delta_w = delta_w(spec, c.reps, task).value; break;
    case Theorem::cwiener: T.delta_bar = chaos_delta_bar(spec, c.reps, task).mc_max_sq.value; break;
    case Theorem::ft5: T.local_triple = local_dependence_term(spec, c.reps, task).value; break;
    case Theorem::t2:
    case Theorem::t2_simplified: {
      const ExchPairTerms e = exch_pair_terms(spec, etas, c.reps, task);
      T.Delta1 = e.delta1.value;
      T.Delta2 = e.delta2.value;
      T.Delta3 = e.delta3.back().value;
      break;
    }
    case Theorem::ft4: {
      const NonlinearTerms e = nonlinear_terms(spec, etas, c.reps, {}, task);
      T.delta1 = e.delta1.value;
      T.delta2 = e.delta2.value;
      T.delta3 = e.delta3.back().value;
      break;
    }
    default: break;
  }
  return T;
}

}  // namespace detail

/// Known estimator names. Parameterized forms: "sup-fbetag:<nu>:<beta>", "bound:<theorem>".
inline const std::vector<std::string>& estimator_catalog() {
  static const std::vector<std::string> names{
      "delta-w",       "stein-residual", "distance",      "distance-orthant", "distance-box",
      "null-distance", "max-kolmogorov", "sup-f-r1",      "sup-fbetag:<nu>:<beta>",
      "sharpness",     "sharpness-mdp-gap", "sharpness-gauss-term", "chaos-delta-bar-sq",
      "chaos-delta-bar-exact-sq", "local-dependence", "bound:<theorem>"};
  return names;
}

inline std::vector<EstimateValue> run_estimator(const std::string& est, const ExperimentConfig& c,
                                                const GridPoint& g) {
  const ModelSpec spec = spec_at(c, g);
  const std::size_t reps = c.reps;
  const std::uint64_t task = g.task;
  auto one = [&](double v, double se) { return std::vector<EstimateValue>{{est, v, se}}; };
  if (est == "delta-w") {
    const McEstimate e = delta_w(spec, reps, task);
    return one(e.value, e.se);
  }
  if (est == "stein-residual") {
    std::vector<TestFunction> fs(test_dictionary().begin(), test_dictionary().end());
    std::vector<EstimateValue> out;
    for (const SteinResidual& r : stein_identity_residuals(spec, fs, reps, task))
      out.push_back({est + ":" + to_string(r.f), r.residual.value, r.residual.se});
    return out;
  }
  if (est == "distance" || est == "distance-orthant" || est == "distance-box" || est == "null-distance") {
    const SigmaStats sigma = exact_sigma(spec);
    RectangleFamily fam;
    if (est == "distance-orthant") fam = lower_orthant_grid(sigma, default_quantile_levels());
    else if (est == "distance-box") fam = symmetric_box_grid(sigma, default_quantile_levels());
    else fam = default_family(sigma, c.random_rectangles, c.seed ^ 0x5eedull);
    const SampleMatrix w = est == "null-distance" ? collect_gaussian(sigma, reps, c.seed, task)
                                                  : collect_w(spec, reps, task);
    const DistanceEstimate e = empirical_distance(w, sigma, fam);
    return one(e.value, est == "null-distance" ? e.max_se : e.argmax_se);
  }
  if (est == "max-kolmogorov") {
    const DistanceEstimate e = max_kolmogorov(collect_w(spec, reps, task), exact_sigma(spec));
    return one(e.value, e.max_se);
  }
  if (est == "sup-f-r1") return one(sup_f_r1(g.d).value, 0.0);
  if (est.rfind("sup-fbetag:", 0) == 0) {
    const auto parts = detail::split(est, ':');
    if (parts.size() != 3) throw std::invalid_argument("estimator '" + est + "': expected sup-fbetag:<nu>:<beta>");
    const unsigned nu = static_cast<unsigned>(std::stoul(parts[1]));
    const double beta = std::stod(parts[2]);
    return one(sup_FbetaG(nu, beta, g.d, EtaContext{0.0, g.d}).value, 0.0);
  }
  if (est == "sharpness") return one(p1_statistic(g.n, g.d).statistic, 0.0);
  if (est == "sharpness-mdp-gap") return one(mdp_ratio_check(g.n, g.d).relative_gap, 0.0);
  if (est == "sharpness-gauss-term") return one(p1_statistic(g.n, g.d).gauss_term, 0.0);
  if (est == "chaos-delta-bar-sq") {
    const ChaosDeltaBar e = chaos_delta_bar(spec, reps, task);
    return one(e.mc_max_sq.value, e.mc_max_sq.se);
  }
  if (est == "chaos-delta-bar-exact-sq") {
    const ChaosDeltaBar e = chaos_delta_bar(spec, 0, task);
    return one(e.exact * e.exact, 0.0);
  }
  if (est == "local-dependence") {
    const McEstimate e = local_dependence_term(spec, reps, task);
    return one(e.value, e.se);
  }
  if (est.rfind("bound:", 0) == 0) {
    const Theorem th = theorem_from_string(est.substr(6));
    const SigmaStats sigma = exact_sigma(spec);
    const bool expl = c.eta_policy == "explicit";
    const std::vector<double> etas{expl ? *c.eta : 0.0};
    const BoundTerms T = detail::collect_terms(th, spec, c, task, etas);
    const AssembledBound b = assemble_bound(th, T, sigma, g.d, g.n, expl ? c.t : std::nullopt,
                                            expl ? c.eta : std::nullopt);
    return one(b.value, 0.0);
  }
  throw std::invalid_argument("unknown estimator '" + est + "'");
}

//------------------------------------------------------------------------------
// Runner
//------------------------------------------------------------------------------

/// Executes every (n, d) grid point (n outer) and every estimator in config
/// order. A failing estimator yields one "error:<name>" record.
inline std::vector<ResultRecord> run(const ExperimentConfig& c, std::ostream* log = nullptr) {
  c.validate();
  const std::string hash = config_hash(c);
  std::vector<ResultRecord> out;
  for (std::size_t n : c.n_grid) {
    for (std::size_t d : c.d_grid) {
      const GridPoint g{n, d, mix64(static_cast<std::uint64_t>(n)) ^ static_cast<std::uint64_t>(d)};
      for (const std::string& est : c.estimators) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<EstimateValue> vals;
        std::string error;
        try {
          vals = run_estimator(est, c, g);
        } catch (const std::exception& e) {
          error = e.what();
        }
        const double ms =
            c.timing ? std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()
                     : 0.0;
        if (!error.empty()) {
          if (log) *log << "hdclt: " << est << " at (n=" << n << ", d=" << d << ") failed: " << error << "\n";
          const double nan = std::numeric_limits<double>::quiet_NaN();
          out.push_back({c.experiment, n, d, "error:" + est, nan, nan, ms, c.seed, hash});
          continue;
        }
        for (const auto& v : vals) out.push_back({c.experiment, n, d, v.name, v.value, v.se, ms, c.seed, hash});
      }
    }
  }
  return out;
}

struct AssertionOutcome {
  std::string description;
  bool passed = false;
};

inline std::vector<AssertionOutcome> check_assertions(const ExperimentConfig& c,
                                                      const std::vector<ResultRecord>& recs) {
  std::vector<AssertionOutcome> out;
  for (const Assertion& a : c.assertions) {
    std::size_t matched = 0;
    bool ok = true;
    for (const auto& r : recs) {
      const bool err = r.estimator == "error:" + a.estimator;
      if (r.estimator != a.estimator && !err) continue;
      if (a.n && r.n != *a.n) continue;
      if (a.d && r.d != *a.d) continue;
      ++matched;
      if (err || !std::isfinite(r.value)) ok = false;
      if (a.max && !(r.value <= *a.max)) ok = false;
      if (a.min && !(r.value >= *a.min)) ok = false;
      if (a.abs_max_se && !(std::abs(r.value) <= *a.abs_max_se * r.se)) ok = false;
    }
    AssertionOutcome o;
    o.description = nlohmann::json(a).dump();
    o.passed = ok && matched > 0;
    out.push_back(o);
  }
  return out;
}

//------------------------------------------------------------------------------
// Emission
//------------------------------------------------------------------------------

enum class OutputFormat { csv, json_lines };

inline OutputFormat output_format_from_string(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json-lines" || s == "jsonl") return OutputFormat::json_lines;
  throw std::invalid_argument("unknown output format '" + s + "'");
}

inline const char* kCsvColumns = "experiment,n,d,estimator,value,se,wall_ms,seed,config_hash";

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

namespace detail {
inline void check_field(const std::string& s) {
  if (s.find_first_of(",\n\"") != std::string::npos)
    throw std::invalid_argument("csv field contains a separator: '" + s + "'");
}

inline nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);  // JSON has no NaN/Inf literals
}

inline double json_to_double(const nlohmann::json& j) {
  return j.is_string() ? parse_double(j.get<std::string>()) : j.get<double>();
}
}  // namespace detail

inline std::string to_csv(const std::vector<ResultRecord>& recs, const std::string& hash) {
  std::ostringstream os;
  os << "# hdclt-results format_version=" << kResultFormatVersion << " config_hash=" << hash << "\n";
  os << kCsvColumns << "\n";
  for (const auto& r : recs) {
    detail::check_field(r.experiment);
    detail::check_field(r.estimator);
    os << r.experiment << ',' << r.n << ',' << r.d << ',' << r.estimator << ',' << format_double(r.value) << ','
       << format_double(r.se) << ',' << format_double(r.wall_ms) << ',' << r.seed << ',' << r.config_hash << "\n";
  }
  return os.str();
}

inline std::string to_json_lines(const std::vector<ResultRecord>& recs, const std::string& hash) {
  std::ostringstream os;
  os << nlohmann::json{{"format_version", kResultFormatVersion}, {"config_hash", hash}}.dump() << "\n";
  for (const auto& r : recs) {
    nlohmann::json j{{"experiment", r.experiment}, {"n", r.n},
                     {"d", r.d},                   {"estimator", r.estimator},
                     {"value", detail::json_number(r.value)}, {"se", detail::json_number(r.se)},
                     {"wall_ms", detail::json_number(r.wall_ms)}, {"seed", r.seed},
                     {"config_hash", r.config_hash}};
    os << j.dump() << "\n";
  }
  return os.str();
}

struct ParsedResults {
  int format_version = 0;
  std::string config_hash;
  std::vector<ResultRecord> records;
};

inline ParsedResults parse_csv(const std::string& text) {
  ParsedResults p;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("# hdclt-results", 0) != 0)
    throw std::invalid_argument("parse_csv: missing header line");
  {
    std::istringstream hs(line.substr(15));
    std::string tok;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
      if (k == "format_version") p.format_version = std::stoi(v);
      if (k == "config_hash") p.config_hash = v;
    }
  }
  if (!std::getline(is, line) || line != kCsvColumns) throw std::invalid_argument("parse_csv: bad column header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 9) throw std::invalid_argument("parse_csv: expected 9 fields in '" + line + "'");
    p.records.push_back({f[0], std::stoull(f[1]), std::stoull(f[2]), f[3], parse_double(f[4]), parse_double(f[5]),
                         parse_double(f[6]), std::stoull(f[7]), f[8]});
  }
  return p;
}

inline ParsedResults parse_json_lines(const std::string& text) {
  ParsedResults p;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("parse_json_lines: missing header line");
  const auto h = nlohmann::json::parse(line);
  p.format_version = h.at("format_version").get<int>();
  p.config_hash = h.at("config_hash").get<std::string>();
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    p.records.push_back({j.at("experiment").get<std::string>(), j.at("n").get<std::size_t>(),
                         j.at("d").get<std::size_t>(), j.at("estimator").get<std::string>(),
                         detail::json_to_double(j.at("value")), detail::json_to_double(j.at("se")),
                         detail::json_to_double(j.at("wall_ms")), j.at("seed").get<std::uint64_t>(),
                         j.at("config_hash").get<std::string>()});
  }
  return p;
}

inline void emit(const std::vector<ResultRecord>& recs, OutputFormat fmt, const std::string& path,
                 const std::string& hash) {
  const std::string body = fmt == OutputFormat::csv ? to_csv(recs, hash) : to_json_lines(recs, hash);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("emit: cannot open '" + path + "' for writing");
  out << body;
  out.flush();
  if (!out) throw std::runtime_error("emit: write to '" + path + "' failed");
}

//------------------------------------------------------------------------------
// Rate fitting and domination
//------------------------------------------------------------------------------

enum class RateTransform { log_log, log_loglog };

struct RateFit {
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
  std::vector<std::string> warnings;
};

/// OLS of log y on log x (or log log x).
inline RateFit rate_fit(const std::vector<double>& x, const std::vector<double>& y, RateTransform tr) {
  if (x.size() != y.size()) throw std::invalid_argument("rate_fit: x and y differ in length");
  RateFit f;
  std::vector<double> u, v;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double xx = x[i] > 0.0 ? std::log(x[i]) : std::numeric_limits<double>::quiet_NaN();
    if (tr == RateTransform::log_loglog) xx = xx > 0.0 ? std::log(xx) : std::numeric_limits<double>::quiet_NaN();
    if (!(y[i] > 0.0) || !std::isfinite(xx)) {
      f.warnings.push_back("rate_fit: point " + std::to_string(i) + " excluded (non-positive value)");
      continue;
    }
    u.push_back(xx);
    v.push_back(std::log(y[i]));
  }
  f.points = u.size();
  if (u.size() < 4) throw std::invalid_argument("rate_fit: fewer than 4 usable points");
  const double m = static_cast<double>(u.size());
  double mu = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= m;
  mv /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    sxx += (u[i] - mu) * (u[i] - mu);
    sxy += (u[i] - mu) * (v[i] - mv);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("rate_fit: x values are all equal");
  f.slope = sxy / sxx;
  f.intercept = mv - f.slope * mu;
  double rss = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double e = v[i] - f.intercept - f.slope * u[i];
    rss += e * e;
  }
  f.slope_se = std::sqrt(rss / (m - 2.0) / sxx);
  return f;
}

inline double record_field(const ResultRecord& r, const std::string& field) {
  if (field == "n") return static_cast<double>(r.n);
  if (field == "d") return static_cast<double>(r.d);
  if (field == "value") return r.value;
  if (field == "se") return r.se;
  throw std::invalid_argument("rate_fit: unknown field '" + field + "'");
}

inline RateFit rate_fit(const std::vector<ResultRecord>& recs, const std::string& x, const std::string& y,
                        RateTransform tr) {
  std::vector<double> xs, ys;
  for (const auto& r : recs) {
    xs.push_back(record_field(r, x));
    ys.push_back(record_field(r, y));
  }
  return rate_fit(xs, ys, tr);
}

struct DominationResult {
  bool passed = false;
  double constant = 0.0;  // C hat
  std::size_t violations = 0;
  double min_slack = kInf;  // min over non-calibration points of C f + 4 se - distance
};

/// Fits C on the smallest-n column, then checks distance <= C functional + 4 se elsewhere.
inline DominationResult domination_test(const std::vector<ResultRecord>& distance,
                                        const std::vector<ResultRecord>& functional) {
  if (distance.empty() || distance.size() != functional.size())
    throw std::invalid_argument("domination_test: mismatched grids");
  std::map<std::pair<std::size_t, std::size_t>, const ResultRecord*> fmap;
  for (const auto& r : functional) fmap[{r.n, r.d}] = &r;
  std::size_t nmin = distance.front().n;
  for (const auto& r : distance) {
    if (!fmap.count({r.n, r.d})) throw std::invalid_argument("domination_test: mismatched grids");
    nmin = std::min(nmin, r.n);
  }
  DominationResult out;
  for (const auto& r : distance) {
    if (r.n != nmin) continue;
    const double f = fmap[{r.n, r.d}]->value;
    if (!(f > 0.0)) throw std::invalid_argument("domination_test: functional must be positive");
    out.constant = std::max(out.constant, r.value / f);
  }
  for (const auto& r : distance) {
    if (r.n == nmin) continue;
    const double slack = out.constant * fmap[{r.n, r.d}]->value + 4.0 * r.se - r.value;
    out.min_slack = std::min(out.min_slack, slack);
    if (slack < 0.0) ++out.violations;
  }
  out.passed = out.violations == 0;
  return out;
}

}  // namespace hdclt
