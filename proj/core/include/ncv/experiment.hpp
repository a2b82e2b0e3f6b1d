#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncv/cvtrain.hpp"
#include "ncv/estimators.hpp"
#include "ncv/models.hpp"
#include "ncv/oracles.hpp"

namespace ncv {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure of one stage of a run; `stage` names it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage(std::move(stage)) {}
  std::string stage;
};

struct ModelConfig {
  std::string kind = "gbm";  ///< gbm | heston | exp_levy | merton
  double rate = 0.02;
  double maturity = 3.0;
  double x0 = 1.0;
  // gbm, merton
  double volatility = 0.3;
  int dim = 1;
  std::vector<std::vector<double>> correlation;  ///< empty = independent
  // heston
  double kappa = 0.0, theta = 0.0, vol_of_vol = 0.0, rho = 0.0, v0 = 0.0;
  // exp_levy
  std::vector<std::vector<double>> sigma;
  std::vector<double> loadings;
  double c_minus = 1.0, c_plus = 1.0, alpha = 0.5, mu = 2.0;
  // merton
  double intensity = 0.0, jump_log_mean = 0.0, jump_log_stdev = 0.0;

  bool operator==(const ModelConfig&) const = default;
};

struct PayoffConfig {
  std::string kind = "call";  ///< call | call_on_max
  std::vector<double> strikes;
  bool operator==(const PayoffConfig&) const = default;
};

struct SchemeConfig {
  double h = 3e-3;
  int step_factor = 5;
  double epsilon = 1e-3;
  bool operator==(const SchemeConfig&) const = default;
};

struct TrainingConfig {
  bool enabled = true;
  int max_epochs = 20;
  std::size_t batch_size = 2000;
  double learning_rate = 1e-3;
  int hidden_layers = 3;
  int hidden_size = 50;
  std::size_t trajectories = 30000;
  std::string warm_start;  ///< controls blob for the first strike, optional
  bool transfer = false;   ///< warm-start each strike from the previous one
  std::string cost_model = "work";  ///< work | wall
  bool stopping_rule = true;
  bool operator==(const TrainingConfig&) const = default;
};

struct MlmcSection {
  int levels = 4;
  int factor = 4;
  std::size_t pilot_paths = 2000;
  bool operator==(const MlmcSection&) const = default;
};

struct EstimationSection {
  double tolerance = 1e-4;
  double alpha = 0.05;
  std::size_t max_paths = 100'000'000;
  std::size_t batch_paths = 10'000;
  std::vector<std::string> baselines{"vanilla"};  ///< subset of vanilla, mlmc, crude_cv
  std::size_t crude_pilot = 10'000;
  MlmcSection mlmc;
  bool operator==(const EstimationSection&) const = default;
};

struct ExperimentConfig {
  ModelConfig model;
  PayoffConfig payoff;
  SchemeConfig scheme;
  TrainingConfig training;
  EstimationSection estimation;
  std::string output = "results";
  std::uint64_t seed = 1;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses a JSON config, or the manifest of an earlier run (its "config"
/// member). Throws ConfigError on syntax or schema errors.
ExperimentConfig parse_config(const std::string& text);
std::string serialize_config(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// All violations found without running anything; empty when valid.
std::vector<std::string> validate_config(const ExperimentConfig& config);
/// Same for raw text, reporting parse errors as diagnostics.
std::vector<std::string> validate_config_text(const std::string& text);

ModelSpec build_model(const ModelConfig& config, double epsilon);
Payoff build_payoff(const PayoffConfig& config, double strike);
std::optional<ReferencePrice> reference_price(const ModelConfig& config, const PayoffConfig& payoff,
                                              double strike);

struct ResultRow {
  double strike = 0.0;
  std::optional<double> reference;
  Estimate estimate;
  std::uint64_t seed = 0;
};

struct StrikeTraining {
  double strike = 0.0;
  int epochs = 0;
  int best_epoch = 0;
  bool stopped_by_rule = false;
  double zero_variance = 0.0;
  double best_variance = 0.0;
  double train_seconds = 0.0;
  std::string blob;
};

struct RunSummary {
  std::vector<ResultRow> rows;
  std::vector<StrikeTraining> training;
  std::filesystem::path csv;
  std::filesystem::path manifest;
};

std::string csv_header();
std::string csv_row(const ResultRow& row);

/// Runs the strike sweep, writing results.csv, manifest.json and one
/// controls blob per trained strike into config.output. Throws StageError.
RunSummary run_experiment(const ExperimentConfig& config);

}  // namespace ncv
