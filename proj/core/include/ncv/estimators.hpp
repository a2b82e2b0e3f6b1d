#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ncv/cvtrain.hpp"
#include "ncv/models.hpp"
#include "ncv/schemes.hpp"

namespace ncv {

struct Estimate {
  double mean = 0.0;
  double half_width = 0.0;
  double variance = 0.0;
  std::size_t M = 0;
  double wall_time = 0.0;
  std::optional<double> rel_err;
  bool tol_met = false;
  std::string method;
};

struct EstimationConfig {
  double tol = 1e-4;
  double alpha = 0.05;
  std::size_t max_paths = 100'000'000;
  std::size_t batch_paths = 10'000;
  std::size_t min_batches = 2;
  std::uint64_t seed = 0;
};

/// Phi^{-1}(1 - alpha/2) sqrt(variance / M)
double confidence_halfwidth(double variance, std::size_t M, double alpha);

/// Draws `n` samples of the estimand for paths first_index .. first_index + n - 1.
using SampleSource = std::function<std::vector<double>(std::size_t n, std::uint64_t first_index)>;

/// Batches until the half-width reaches tol (after at least min_batches) or
/// max_paths is exhausted.
Estimate sequential_estimate(const SampleSource& source, const EstimationConfig& config,
                             std::string method);

Estimate vanilla_mc(const ModelSpec& model, const SchemeSpec& scheme, const Payoff& payoff,
                    const EstimationConfig& config);

/// Same paths as vanilla_mc for the same seed, with the control integrals added.
Estimate cv_mc(const ModelSpec& model, const ControlField& control, const SchemeSpec& scheme,
               const Payoff& payoff, const EstimationConfig& config);

/// Terminal discounted spot (averaged over assets) as a linear control with
/// the coefficient fitted on an independent pilot run.
Estimate crude_cv_mc(const ModelSpec& model, const SchemeSpec& scheme, const Payoff& payoff,
                     const EstimationConfig& config, std::size_t pilot_paths = 10'000);

// ---------------------------------------------------------------------------

struct MlmcConfig {
  double h_finest = 0.0;
  int factor = 4;
  int levels = 4;
  double tol = 1e-3;
  double alpha = 0.05;
  std::size_t pilot_paths = 2000;
  std::size_t max_paths_per_level = 50'000'000;
  std::uint64_t seed = 0;
};

struct MlmcLevel {
  double h = 0.0;
  std::size_t M = 0;
  double mean = 0.0;
  double variance = 0.0;
  double cost = 0.0;  ///< expected steps per sample
};

struct MlmcResult {
  Estimate estimate;
  std::vector<MlmcLevel> levels;
  double bias_estimate = 0.0;
};

/// Samples of level l: the plain functional on the coarsest grid for l = 0,
/// otherwise fine-minus-coarse on coupled paths (summed Brownian increments,
/// shared jump times and sizes).
std::vector<double> mlmc_level_samples(const ModelSpec& model, const Payoff& payoff,
                                       const MlmcConfig& config, int level, std::size_t n,
                                       std::uint64_t first_index);

MlmcResult mlmc(const ModelSpec& model, const Payoff& payoff, const MlmcConfig& config);

}  // namespace ncv
