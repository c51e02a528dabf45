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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hdclt/harness.hpp"

using namespace hdclt;

namespace {
ExperimentConfig small_config() {
  ExperimentConfig c;
  c.experiment = "unit";
  c.model = nlohmann::json{{"family", "product-exponential"}};
  c.n_grid = {10, 40};
  c.d_grid = {3};
  c.estimators = {"delta-w", "sharpness-gauss-term"};
  c.reps = 200;
  c.seed = 4;
  c.random_rectangles = 20;
  return c;
}

ResultRecord rec(std::size_t n, double v, double se = 0.0) { return {"x", n, 5, "e", v, se, 0.0, 1, "h"}; }

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

TEST(Config, ValidationErrors) {
  EXPECT_NO_THROW(small_config().validate());
  auto c = small_config();
  c.estimators.clear();
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.reps = 99;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.format_version = 2;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.n_grid.clear();
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.eta_policy = "explicit";
  c.eta = 0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.t = 0.5;
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, HashTracksSemanticFieldsOnly) {
  const auto a = nlohmann::json::parse(R"({"format_version":1,"experiment":"e","model":{"family":"chaos-q2","chaos_profile":2},
      "n_grid":[1],"d_grid":[3],"estimators":["chaos-delta-bar-exact-sq"],"reps":100,"seed":2})").get<ExperimentConfig>();
  const auto b = nlohmann::json::parse(R"({"seed":2,"reps":100,"estimators":["chaos-delta-bar-exact-sq"],"d_grid":[3],
      "n_grid":[1],"model":{"chaos_profile":2,"family":"chaos-q2"},"experiment":"e","format_version":1})").get<ExperimentConfig>();
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 40u);
  ExperimentConfig c = a;
  c.output = "/tmp/elsewhere";
  c.timing = true;
  EXPECT_EQ(config_hash(c), config_hash(a));
  c = a;
  c.seed = 3;
  EXPECT_NE(config_hash(c), config_hash(a));
  c = a;
  c.reps = 101;
  EXPECT_NE(config_hash(c), config_hash(a));
  c = a;
  c.model["chaos_profile"] = 3;
  EXPECT_NE(config_hash(c), config_hash(a));
  const auto round = nlohmann::json(a).get<ExperimentConfig>();
  EXPECT_EQ(config_hash(round), config_hash(a));
}

TEST(Run, NullDistanceAndDeterminism) {
  ExperimentConfig c = small_config();
  c.n_grid = {1};
  c.d_grid = {4};
  c.reps = 5000;
  c.estimators = {"null-distance"};
  const auto r = run(c);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_LE(r[0].value, 4 * r[0].se);
  const auto c2 = small_config();
  EXPECT_EQ(to_csv(run(c2), config_hash(c2)), to_csv(run(c2), config_hash(c2)));
  set_num_threads(4);
  const std::string four = to_csv(run(c2), config_hash(c2));
  set_num_threads(1);
  EXPECT_EQ(four, to_csv(run(c2), config_hash(c2)));
  set_num_threads(0);
}

TEST(Run, FailuresBecomeRecords) {
  ExperimentConfig c = small_config();
  c.estimators = {"delta-w", "no-such-estimator", "local-dependence", "sharpness-gauss-term"};
  std::ostringstream log;
  const auto r = run(c, &log);
  ASSERT_EQ(r.size(), 8u);
  EXPECT_TRUE(r[1].is_error());
  EXPECT_EQ(r[1].estimator, "error:no-such-estimator");
  EXPECT_TRUE(std::isnan(r[1].value));
  EXPECT_TRUE(r[2].is_error());
  EXPECT_FALSE(r[3].is_error());
  EXPECT_NE(log.str().find("no-such-estimator"), std::string::npos);
  for (const auto& x : r) EXPECT_EQ(x.wall_ms, 0.0);
}

TEST(Run, AssertionsAndSteinRecords) {
  ExperimentConfig c = small_config();
  c.estimators = {"stein-residual"};
  c.assertions = {Assertion{"stein-residual:quadratic", {}, {}, {}, {}, 4.0}, Assertion{"missing", {}, {}, {}, {}, {}}};
  const auto r = run(c);
  EXPECT_EQ(r.size(), 2 * test_dictionary().size());
  const auto o = check_assertions(c, r);
  ASSERT_EQ(o.size(), 2u);
  EXPECT_TRUE(o[0].passed);
  EXPECT_FALSE(o[1].passed);
}

TEST(Emit, RoundTripsAndFormatsAgree) {
  std::vector<ResultRecord> recs = run(small_config());
  recs.push_back({"unit", 1, 2, "error:x", std::nan(""), std::nan(""), 0.0, 4, "abc"});
  recs.push_back({"unit", 1, 2, "y", 0.1 + 0.2, 1.0 / 3.0, 2.5, 4, "abc"});
  const std::string h = config_hash(small_config());
  const auto pc = parse_csv(to_csv(recs, h));
  const auto pj = parse_json_lines(to_json_lines(recs, h));
  EXPECT_EQ(pc.format_version, kResultFormatVersion);
  EXPECT_EQ(pc.config_hash, h);
  EXPECT_EQ(pj.config_hash, h);
  ASSERT_EQ(pc.records.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_TRUE(pc.records[i] == recs[i]) << i;
    EXPECT_TRUE(pj.records[i] == recs[i]) << i;
  }
  const std::string empty = to_csv({}, h);
  EXPECT_EQ(std::count(empty.begin(), empty.end(), '\n'), 2);
  EXPECT_TRUE(parse_csv(empty).records.empty());
  EXPECT_TRUE(parse_json_lines(to_json_lines({}, h)).records.empty());

  const auto dir = std::filesystem::temp_directory_path() / "hdclt_emit_test";
  std::filesystem::create_directories(dir);
  emit(recs, OutputFormat::csv, (dir / "r.csv").string(), h);
  EXPECT_EQ(slurp((dir / "r.csv").string()), to_csv(recs, h));
  try {
    emit(recs, OutputFormat::csv, (dir / "missing" / "r.csv").string(), h);
    FAIL() << "expected an IO error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);
  }
  std::filesystem::remove_all(dir);
  EXPECT_EQ(output_format_from_string("jsonl"), OutputFormat::json_lines);
  EXPECT_THROW(output_format_from_string("xml"), std::invalid_argument);
}

TEST(RateFit, ExactLineAndRefusal) {
  std::vector<double> x{1, 10, 100, 1000, 1e4}, y;
  for (double v : x) y.push_back(1.0 / std::sqrt(v));
  const RateFit f = rate_fit(x, y, RateTransform::log_log);
  EXPECT_NEAR(f.slope, -0.5, 1e-12);
  EXPECT_NEAR(f.slope_se, 0.0, 1e-12);
  EXPECT_EQ(f.points, 5u);
  y[0] = -1.0;
  const RateFit g = rate_fit(x, y, RateTransform::log_log);
  EXPECT_EQ(g.points, 4u);
  EXPECT_FALSE(g.warnings.empty());
  y[1] = 0.0;
  EXPECT_THROW(rate_fit(x, y, RateTransform::log_log), std::invalid_argument);
}

TEST(RateFit, EmpiricalRates) {
  ExperimentConfig c = small_config();
  c.n_grid = {10, 100, 1000, 10000};
  c.d_grid = {10};
  c.reps = 2000;
  c.estimators = {"delta-w"};
  EXPECT_NEAR(rate_fit(run(c), "n", "value", RateTransform::log_log).slope, -0.5, 0.1);
  c.n_grid = {1};
  c.d_grid = {100, 1000, 10000, 100000, 1000000};
  c.estimators = {"sup-fbetag:1:1"};
  EXPECT_NEAR(rate_fit(run(c), "d", "value", RateTransform::log_loglog).slope, 0.5, 0.5 * 0.15);
}

TEST(Domination, Protocol) {
  std::vector<ResultRecord> dist, same, slow, fast, shorter;
  for (std::size_t n : {100u, 1000u, 10000u}) {
    const double v = 1.0 / std::sqrt(static_cast<double>(n));
    dist.push_back(rec(n, v, 1e-6));
    same.push_back(rec(n, v));
    slow.push_back(rec(n, std::cbrt(1.0 / static_cast<double>(n))));
    fast.push_back(rec(n, 1.0 / static_cast<double>(n)));
  }
  const auto a = domination_test(dist, same);
  EXPECT_TRUE(a.passed);
  EXPECT_NEAR(a.constant, 1.0, 1e-12);
  const auto b = domination_test(dist, slow);
  EXPECT_TRUE(b.passed);
  EXPECT_GT(b.min_slack, 0.0);
  EXPECT_FALSE(domination_test(dist, fast).passed);
  shorter.assign(dist.begin(), dist.end() - 1);
  EXPECT_THROW(domination_test(dist, shorter), std::invalid_argument);
  auto moved = same;
  moved[2].n = 7;
  EXPECT_THROW(domination_test(dist, moved), std::invalid_argument);
}
