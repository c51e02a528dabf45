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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hdclt/hdclt.hpp"

namespace {

using hdclt::format_double;

hdclt::ModelSpec load_model(const std::string& arg, std::optional<std::size_t> n, std::optional<std::size_t> d,
                            std::optional<std::uint64_t> seed) {
  nlohmann::json j;
  if (!arg.empty() && arg.front() == '{') {
    j = nlohmann::json::parse(arg);
  } else if (std::filesystem::exists(arg)) {
    std::ifstream in(arg);
    in >> j;
    if (j.contains("model")) j = j.at("model");  // accept a full experiment config
  } else {
    j = nlohmann::json{{"family", arg}};
  }
  if (n) j["n"] = *n;
  if (d) j["d"] = *d;
  if (seed) j["seed"] = *seed;
  if (!j.contains("d")) j["d"] = 10;
  return j.get<hdclt::ModelSpec>();
}

// Writes to --out (file) when given, stdout otherwise.
void write_output(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + out + "' for writing");
  f << text;
}

std::string resolve_run_path(const std::string& out_flag, const hdclt::ExperimentConfig& c,
                             hdclt::OutputFormat fmt) {
  std::string target = out_flag;
  if (target.empty()) target = c.output;
  if (target.empty()) {
    if (const char* env = std::getenv("HDCLT_OUT_DIR")) target = env;
  }
  if (target.empty() || target == "-") return "";
  const std::filesystem::path p(target);
  const auto ext = p.extension().string();
  if (ext == ".csv" || ext == ".jsonl") {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    return target;
  }
  std::filesystem::create_directories(p);
  return (p / (c.experiment + (fmt == hdclt::OutputFormat::csv ? ".csv" : ".jsonl"))).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hdclt: numerical companion for high-dimensional normal approximation bounds"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = auto)");

  // run
  auto* run = app.add_subcommand("run", "execute an experiment config");
  std::string cfg_path, run_out, run_format = "csv";
  std::optional<std::uint64_t> run_seed;
  bool timing = false;
  run->add_option("config", cfg_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", run_seed, "override the config seed");
  run->add_option("--threads", threads, "worker threads (0 = auto)");
  run->add_option("--out", run_out, "output file (.csv/.jsonl) or directory; default $HDCLT_OUT_DIR or stdout");
  run->add_option("--format", run_format, "csv | json-lines")->check(CLI::IsMember({"csv", "json-lines", "jsonl"}));
  run->add_flag("--timing", timing, "record wall-clock time per estimator (breaks byte-identity)");

  // suprema
  auto* sup = app.add_subcommand("suprema", "suprema of the Hermite-type sums");
  std::string sup_kind = "r1";
  std::vector<double> sup_d{3, 10, 100, 1000, 10000, 100000, 1000000};
  unsigned sup_nu = 1;
  double sup_beta = 1.0, sup_K = 0.0;
  std::string sup_out;
  sup->add_option("--kind", sup_kind, "r1 | fbetag")->check(CLI::IsMember({"r1", "fbetag"}));
  sup->add_option("--d-grid", sup_d, "dimensions (space or comma separated)")->delimiter(',');
  sup->add_option("--nu", sup_nu, "Hermite order (fbetag)");
  sup->add_option("--beta", sup_beta, "power (fbetag)");
  sup->add_option("--K", sup_K, "shift scale K (eta = K / sqrt(log d))");
  sup->add_option("--out", sup_out, "output CSV (default stdout)");

  // bounds
  auto* bnd = app.add_subcommand("bounds", "estimate the terms of a bound functional");
  std::string bnd_model = "product-exponential", bnd_theorem = "c2", bnd_out;
  std::optional<std::size_t> bnd_n, bnd_d;
  std::size_t bnd_reps = 1000;
  std::optional<double> bnd_eta, bnd_t;
  bnd->add_option("--model", bnd_model, "model JSON file, inline JSON, or family name");
  bnd->add_option("--theorem", bnd_theorem, "t1 | c0 | t2 | t2-simplified | ft4 | c2 | ft5 | cwiener");
  bnd->add_option("--n", bnd_n, "sample size");
  bnd->add_option("--d", bnd_d, "dimension");
  bnd->add_option("--reps", bnd_reps, "Monte Carlo replications");
  bnd->add_option("--eta", bnd_eta, "explicit eta");
  bnd->add_option("--t", bnd_t, "explicit t");
  bnd->add_option("--out", bnd_out, "output CSV (default stdout)");

  // distance
  auto* dist = app.add_subcommand("distance", "family-restricted rectangle distance");
  std::string dist_model = "product-exponential", dist_family = "default", dist_out;
  std::optional<std::size_t> dist_n, dist_d;
  std::size_t dist_reps = 10000, dist_random = 1000;
  std::uint64_t dist_seed = 1;
  dist->add_option("--model", dist_model, "model JSON file, inline JSON, or family name");
  dist->add_option("--family", dist_family, "default | lower-orthant-grid | symmetric-box-grid | random-rectangles")
      ->check(CLI::IsMember({"default", "lower-orthant-grid", "symmetric-box-grid", "random-rectangles"}));
  dist->add_option("--n", dist_n, "sample size");
  dist->add_option("--d", dist_d, "dimension");
  dist->add_option("--reps", dist_reps, "replications");
  dist->add_option("--random-count", dist_random, "number of random rectangles");
  dist->add_option("--seed", dist_seed, "seed");
  dist->add_option("--out", dist_out, "output CSV (default stdout)");

  // sharpness
  auto* shp = app.add_subcommand("sharpness", "lower-bound statistic for the exponential model");
  std::vector<double> shp_n{1e5}, shp_d{1e4};
  std::size_t shp_cross = 0;
  std::string shp_out;
  shp->add_option("--n-grid", shp_n, "sample sizes (space or comma separated)")->delimiter(',');
  shp->add_option("--d-grid", shp_d, "dimensions (space or comma separated)")->delimiter(',');
  shp->add_option("--cross-check", shp_cross, "Monte Carlo replications for the cross-check (0 = off)");
  shp->add_option("--out", shp_out, "output CSV (default stdout)");

  // stein-check
  auto* stn = app.add_subcommand("stein-check", "Stein identity residuals over the test dictionary");
  std::string stn_model = "product-exponential", stn_out;
  std::optional<std::size_t> stn_n, stn_d;
  std::size_t stn_reps = 10000;
  stn->add_option("--model", stn_model, "model JSON file, inline JSON, or family name");
  stn->add_option("--n", stn_n, "sample size");
  stn->add_option("--d", stn_d, "dimension");
  stn->add_option("--reps", stn_reps, "replications");
  stn->add_option("--out", stn_out, "output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);
  hdclt::set_num_threads(threads);

  try {
    if (*run) {
      hdclt::ExperimentConfig c = hdclt::load_config(cfg_path);
      if (run_seed) c.seed = *run_seed;
      if (timing) c.timing = true;
      const auto fmt = hdclt::output_format_from_string(run_format);
      const auto recs = hdclt::run(c, &std::cerr);
      const std::string hash = hdclt::config_hash(c);
      const std::string path = resolve_run_path(run_out, c, fmt);
      if (path.empty()) std::cout << (fmt == hdclt::OutputFormat::csv ? hdclt::to_csv(recs, hash)
                                                                      : hdclt::to_json_lines(recs, hash));
      else hdclt::emit(recs, fmt, path, hash);
      int rc = 0;
      for (const auto& a : hdclt::check_assertions(c, recs)) {
        std::cerr << (a.passed ? "PASS " : "FAIL ") << a.description << "\n";
        if (!a.passed) rc = 1;
      }
      return rc;
    }
    if (*sup) {
      std::vector<hdclt::SupremumResult> rows;
      std::vector<double> ds, vs;
      for (double dd : sup_d) {
        const auto d = static_cast<std::size_t>(dd);
        rows.push_back(sup_kind == "r1" ? hdclt::sup_f_r1(d)
                                        : hdclt::sup_FbetaG(sup_nu, sup_beta, d, hdclt::EtaContext{sup_K, d}));
        ds.push_back(dd);
        vs.push_back(rows.back().value);
      }
      std::string slope;
      if (ds.size() >= 4) slope = format_double(hdclt::rate_fit(ds, vs, hdclt::RateTransform::log_loglog).slope);
      std::ostringstream os;
      os << "d,r_or_nu,beta,eta_K,value,maximizer_u,m_star,slope_fit\n";
      for (const auto& r : rows)
        os << r.d << ',' << (sup_kind == "r1" ? 1u : sup_nu) << ',' << format_double(sup_beta) << ','
           << format_double(sup_kind == "r1" ? 0.0 : sup_K) << ',' << format_double(r.value) << ','
           << format_double(r.maximizer_u) << ',' << r.m_star << ',' << slope << "\n";
      write_output(sup_out, os.str());
      return 0;
    }
    if (*bnd) {
      const hdclt::ModelSpec spec = load_model(bnd_model, bnd_n, bnd_d, std::nullopt);
      hdclt::ExperimentConfig c;
      c.experiment = "bounds";
      c.model = spec;
      c.n_grid = {spec.n};
      c.d_grid = {spec.d};
      c.reps = bnd_reps;
      c.seed = spec.seed;
      c.estimators = {"bound:" + bnd_theorem};
      if (bnd_eta || bnd_t) {
        c.eta_policy = "explicit";
        c.eta = bnd_eta.value_or(0.0);
        c.t = bnd_t;
      }
      const auto recs = hdclt::run(c, &std::cerr);
      write_output(bnd_out, hdclt::to_csv(recs, hdclt::config_hash(c)));
      return recs.front().is_error() ? 1 : 0;
    }
    if (*dist) {
      const hdclt::ModelSpec spec = load_model(dist_model, dist_n, dist_d, dist_seed);
      const hdclt::SigmaStats sigma = hdclt::exact_sigma(spec);
      hdclt::RectangleFamily fam;
      if (dist_family == "lower-orthant-grid") fam = hdclt::lower_orthant_grid(sigma, hdclt::default_quantile_levels());
      else if (dist_family == "symmetric-box-grid")
        fam = hdclt::symmetric_box_grid(sigma, hdclt::default_quantile_levels());
      else if (dist_family == "random-rectangles") fam = hdclt::random_rectangles(sigma, dist_random, dist_seed);
      else fam = hdclt::default_family(sigma, dist_random, dist_seed);
      const auto w = hdclt::collect_w(spec, dist_reps);
      const hdclt::DistanceEstimate e = hdclt::empirical_distance(w, sigma, fam);
      std::ostringstream os;
      os << "d,n,family,value,argmax,se\n"
         << spec.d << ',' << spec.n << ',' << dist_family << ',' << format_double(e.value) << ',' << e.argmax << ','
         << format_double(e.argmax_se) << "\n";
      write_output(dist_out, os.str());
      return 0;
    }
    if (*shp) {
      std::ostringstream os;
      os << "n,d,x_n,lambda_n,gauss_term,statistic,ratio_mdp,cramer_ratio,mdp_gap,log3d_over_n,d_log3d_over_n";
      if (shp_cross) os << ",mc_empirical,mc_se,mc_analytic,mc_budget,mc_agree";
      os << "\n";
      for (double n : shp_n) {
        for (double d : shp_d) {
          const auto p = hdclt::p1_statistic(n, d);
          const auto m = hdclt::mdp_ratio_check(n, d);
          os << format_double(n) << ',' << format_double(d) << ',' << format_double(p.x_n) << ','
             << format_double(p.lambda_n) << ',' << format_double(p.gauss_term) << ','
             << format_double(p.statistic) << ',' << format_double(p.ratio_mdp) << ','
             << format_double(m.cramer_ratio) << ',' << format_double(m.relative_gap) << ','
             << format_double(p.log3d_over_n) << ',' << format_double(p.d_log3d_over_n);
          if (shp_cross) {
            const auto cc = hdclt::p1_monte_carlo_cross_check(static_cast<std::size_t>(n),
                                                              static_cast<std::size_t>(d), shp_cross);
            os << ',' << format_double(cc.empirical) << ',' << format_double(cc.se) << ','
               << format_double(cc.analytic) << ',' << format_double(cc.budget) << ',' << (cc.agree ? 1 : 0);
          }
          os << "\n";
        }
      }
      write_output(shp_out, os.str());
      return 0;
    }
    if (*stn) {
      const hdclt::ModelSpec spec = load_model(stn_model, stn_n, stn_d, std::nullopt);
      std::vector<hdclt::TestFunction> fs(hdclt::test_dictionary().begin(), hdclt::test_dictionary().end());
      std::ostringstream os;
      os << "function,lhs,rhs,residual,se,within_4se\n";
      int rc = 0;
      for (const auto& r : hdclt::stein_identity_residuals(spec, fs, stn_reps)) {
        const bool ok = std::abs(r.residual.value) <= 4.0 * r.residual.se;
        if (!ok) rc = 1;
        os << hdclt::to_string(r.f) << ',' << format_double(r.lhs.value) << ',' << format_double(r.rhs.value) << ','
           << format_double(r.residual.value) << ',' << format_double(r.residual.se) << ',' << (ok ? 1 : 0) << "\n";
      }
      write_output(stn_out, os.str());
      return rc;
    }
  } catch (const std::exception& e) {
    std::cerr << "hdclt: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
