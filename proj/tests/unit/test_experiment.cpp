#include <algorithm>
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ncv/experiment.hpp"

using namespace ncv;
namespace fs = std::filesystem;

namespace {

const char* kBsConfig = R"({
  "model": {"kind": "gbm", "rate": 0.02, "volatility": 0.3, "dim": 1, "maturity": 3.0, "x0": 1.0},
  "payoff": {"kind": "call", "strikes": [0.9, 1.0]},
  "scheme": {"h": 0.03, "step_factor": 5},
  "training": {"trajectories": 400, "max_epochs": 3, "batch_size": 100},
  "estimation": {"tolerance": 0.01, "batch_paths": 2000, "baselines": ["vanilla", "crude_cv"], "crude_pilot": 500},
  "output": "unused",
  "seed": 5
})";

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drops the time_s column (fifth field) from every line.
std::string without_times(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.push_back("");
    for (std::size_t i = 0; i < f.size(); ++i)
      if (i != 4) out += f[i] + (i + 1 < f.size() ? "," : "");
    out += '\n';
  }
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ncv_unit_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, ParsesAndRoundTrips) {
  const auto c = parse_config(kBsConfig);
  EXPECT_EQ(c.model.kind, "gbm");
  EXPECT_EQ(c.payoff.strikes, (std::vector<double>{0.9, 1.0}));
  EXPECT_EQ(c.training.batch_size, 100u);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(parse_config(serialize_config(c)), c);
}

TEST(Config, RoundTripsEveryModelKind) {
  for (const char* path : {"configs/bs_desk.json", "configs/merton.json", "configs/heston.json",
                           "configs/levy_2d.json", "configs/levy_1d.json", "configs/gbm_3d.json"}) {
    SCOPED_TRACE(path);
    const auto c = load_config(fs::path(NCV_SOURCE_DIR) / path);
    EXPECT_EQ(parse_config(serialize_config(c)), c);
    EXPECT_TRUE(validate_config(c).empty());
  }
}

TEST(Config, RejectsUnknownKeysAndBadSyntax) {
  EXPECT_THROW(parse_config(R"({"model": {"kind": "gbm", "vol": 0.3}, "payoff": {"strikes": [1]}})"),
               ConfigError);
  EXPECT_THROW(parse_config("{ not json"), ConfigError);
  EXPECT_THROW(parse_config(R"({"model": {"kind": "gbm"}, "payoff": {"strikes": "1"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"model": {"kind": "sabr"}, "payoff": {"strikes": [1]}})"), ConfigError);
}

TEST(Validate, ValidConfigHasNoDiagnostics) {
  EXPECT_TRUE(validate_config(parse_config(kBsConfig)).empty());
}

TEST(Validate, HestonFellerCondition) {
  auto c = parse_config(kBsConfig);
  c.model = ModelConfig{};
  c.model.kind = "heston";
  c.model.kappa = 0.1;
  c.model.theta = 0.4;
  c.model.vol_of_vol = 0.3;
  c.model.rho = -0.3;
  c.model.v0 = 0.15;
  const auto d = validate_config(c);
  ASSERT_FALSE(d.empty());
  EXPECT_NE(d[0].find("kappa theta"), std::string::npos);
}

TEST(Validate, TruncationOutOfRange) {
  auto c = load_config(fs::path(NCV_SOURCE_DIR) / "configs/levy_1d.json");
  c.scheme.epsilon = 1.5;
  const auto d = validate_config(c);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NE(d[0].find("epsilon"), std::string::npos);
}

TEST(Validate, ReportsEveryViolation) {
  auto c = parse_config(kBsConfig);
  c.scheme.h = 0.007;
  c.payoff.strikes.clear();
  c.training.warm_start = "/nonexistent/controls.json";
  const auto d = validate_config(c);
  // h = 0.007 breaks both the fine and the coarse grid.
  ASSERT_EQ(d.size(), 4u);
  for (const char* key : {"strikes", "scheme.h", "step_factor", "warm_start"})
    EXPECT_TRUE(std::any_of(d.begin(), d.end(), [&](const std::string& s) { return s.find(key) != s.npos; }))
        << key;
  const auto text = validate_config_text("{]");
  ASSERT_EQ(text.size(), 1u);
}

TEST(Csv, HeaderAndRow) {
  EXPECT_EQ(csv_header(), "strike,reference,mean,half_width,time_s,M,rel_err,method,seed,tol_met");
  Estimate e;
  e.mean = 0.2294;
  e.half_width = 4e-4;
  e.wall_time = 1.5;
  e.M = 20000;
  e.method = "vanilla";
  e.tol_met = true;
  EXPECT_EQ(csv_row({1.0, 0.22943, e, 7}), "1,0.22943,0.2294,0.0004,1.5,20000,,vanilla,7,1");
  e.rel_err = 0.05;
  e.tol_met = false;
  EXPECT_EQ(csv_row({1.0, std::nullopt, e, 7}), "1,,0.2294,0.0004,1.5,20000,0.05,vanilla,7,0");
}

TEST(RunExperiment, TrainingDisabledGivesBaselinesOnly) {
  auto c = parse_config(kBsConfig);
  c.training.enabled = false;
  c.output = scratch("baselines").string();
  const auto s = run_experiment(c);
  ASSERT_EQ(s.rows.size(), 4u);
  for (const auto& r : s.rows) {
    EXPECT_NE(r.estimate.method, "cv");
    EXPECT_TRUE(r.estimate.tol_met);
    EXPECT_LE(r.estimate.half_width, c.estimation.tolerance);
  }
  EXPECT_TRUE(fs::exists(s.manifest));
}

TEST(RunExperiment, ArtifactsAndDeterminism) {
  auto c = parse_config(kBsConfig);
  c.estimation.baselines = {"vanilla"};
  c.output = scratch("det_a").string();
  const auto a = run_experiment(c);
  c.output = scratch("det_b").string();
  const auto b = run_experiment(c);
  ASSERT_EQ(a.rows.size(), 4u);
  EXPECT_EQ(a.rows[0].estimate.method, "cv");
  EXPECT_TRUE(a.rows[0].reference.has_value());
  EXPECT_EQ(without_times(slurp(a.csv)), without_times(slurp(b.csv)));
  EXPECT_TRUE(fs::exists(a.csv.parent_path() / "controls_K0.9.json"));
  EXPECT_TRUE(fs::exists(a.csv.parent_path() / "controls_K1.json"));

  // The manifest is itself a runnable config.
  const auto again = parse_config(slurp(a.manifest));
  auto expected = c;
  expected.output = scratch("det_a").string();
  EXPECT_EQ(again.training, expected.training);
  EXPECT_EQ(again.model, expected.model);
  EXPECT_EQ(again.seed, expected.seed);
}

TEST(RunExperiment, FailingStageIsNamedAndCsvKept) {
  auto c = parse_config(kBsConfig);
  c.estimation.baselines = {"vanilla"};
  c.training.enabled = false;
  c.output = scratch("fail").string();
  // A warm-start blob for another model: the run must stop at that stage.
  const fs::path blob = fs::temp_directory_path() / "ncv_unit_wrong_blob.json";
  {
    std::ofstream out(blob);
    out << R"({"mode": "levy", "network": {}})";
  }
  c.training.enabled = true;
  c.training.warm_start = blob.string();
  try {
    run_experiment(c);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage, "warm_start");
  }
  EXPECT_TRUE(fs::exists(fs::path(c.output) / "results.csv"));
  EXPECT_NE(slurp(fs::path(c.output) / "manifest.json").find("\"failed_stage\": \"warm_start\""),
            std::string::npos);
}

TEST(ReferencePrice, ByModel) {
  auto c = parse_config(kBsConfig);
  EXPECT_NEAR(reference_price(c.model, c.payoff, 1.0)->value, 0.22943, 5e-6);
  c.model.dim = 2;
  EXPECT_FALSE(reference_price(c.model, c.payoff, 1.0).has_value());
}
