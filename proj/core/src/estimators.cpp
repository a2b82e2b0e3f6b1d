#include "ncv/estimators.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "ncv/oracles.hpp"
#include "ncv/running_stats.hpp"

namespace ncv {

double confidence_halfwidth(double variance, std::size_t M, double alpha) {
  if (M < 2) throw std::invalid_argument("half-width needs at least two samples");
  if (variance <= 0.0) return 0.0;
  return normal_quantile(1.0 - alpha / 2.0) * std::sqrt(variance / static_cast<double>(M));
}

Estimate sequential_estimate(const SampleSource& source, const EstimationConfig& config,
                             std::string method) {
  if (!(config.tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (config.batch_paths < 2) throw std::invalid_argument("batch must hold at least two paths");
  const auto start = std::chrono::steady_clock::now();
  RunningStats stats;
  std::size_t batches = 0;
  Estimate est;
  est.method = std::move(method);
  while (true) {
    const std::size_t n = std::min(config.batch_paths, config.max_paths - stats.count());
    const auto samples = source(n, stats.count());
    stats.add(samples);
    ++batches;
    est.half_width = confidence_halfwidth(stats.variance(), stats.count(), config.alpha);
    est.tol_met = est.half_width <= config.tol;
    if (batches >= config.min_batches && est.tol_met) break;
    // A spread at rounding level means the samples are deterministic; more
    // batches cannot change the estimate.
    if (stats.count() >= 2 && stats.variance() <= 1e-24 * stats.mean() * stats.mean()) break;
    if (stats.count() >= config.max_paths) break;
  }
  est.mean = stats.mean();
  est.variance = stats.variance();
  est.M = stats.count();
  est.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return est;
}

Estimate vanilla_mc(const ModelSpec& model, const SchemeSpec& scheme, const Payoff& payoff,
                    const EstimationConfig& config) {
  auto source = [&](std::size_t n, std::uint64_t first) {
    return simulate_batch(model, scheme, payoff, n, config.seed, false, StreamDomain::SecondPass, first)
        .gamma_base;
  };
  return sequential_estimate(source, config, "vanilla");
}

Estimate cv_mc(const ModelSpec& model, const ControlField& control, const SchemeSpec& scheme,
               const Payoff& payoff, const EstimationConfig& config) {
  if (control.outputs() != control_outputs(model))
    throw std::invalid_argument("controls do not match the model dimensions");
  auto source = [&](std::size_t n, std::uint64_t first) {
    return controlled_gamma(model, scheme, payoff, control, n, config.seed, StreamDomain::SecondPass,
                            first);
  };
  Estimate est = sequential_estimate(source, config, "cv");
  if (est.mean != 0.0) est.rel_err = relative_error(est.mean, est.variance);
  return est;
}

namespace {

struct PayoffAndControl {
  std::vector<double> payoff, control;
};

PayoffAndControl spot_samples(const ModelSpec& model, const SchemeSpec& scheme, const Payoff& payoff,
                              std::size_t n, std::uint64_t seed, StreamDomain domain,
                              std::uint64_t first) {
  PathSimulator sim(model, scheme, payoff);
  const int k = model.underlier_dim();
  std::vector<double> spot(k);
  model.underlier(0.0, model.initial_state(), spot);
  double spot0 = 0.0;
  for (double s : spot) spot0 += s / k;
  const double disc = std::exp(-model.rate() * model.maturity());

  PayoffAndControl out;
  out.payoff.resize(n);
  out.control.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    RandomStream rng(seed, domain, first + i);
    out.payoff[i] = sim.run(rng, nullptr);
    model.underlier(model.maturity(), sim.state(), spot);
    double avg = 0.0;
    for (double s : spot) avg += s / k;
    out.control[i] = disc * avg - spot0;
  }
  return out;
}

}  // namespace

Estimate crude_cv_mc(const ModelSpec& model, const SchemeSpec& scheme, const Payoff& payoff,
                     const EstimationConfig& config, std::size_t pilot_paths) {
  const auto start = std::chrono::steady_clock::now();
  const auto pilot = spot_samples(model, scheme, payoff, pilot_paths, config.seed, StreamDomain::Pilot, 0);
  RunningStats sp, sc;
  sp.add(pilot.payoff);
  sc.add(pilot.control);
  double cov = 0.0;
  for (std::size_t i = 0; i < pilot_paths; ++i)
    cov += (pilot.payoff[i] - sp.mean()) * (pilot.control[i] - sc.mean());
  cov /= static_cast<double>(pilot_paths > 1 ? pilot_paths - 1 : 1);
  const double coef = sc.variance() > 0.0 ? -cov / sc.variance() : 0.0;

  auto source = [&](std::size_t n, std::uint64_t first) {
    auto s = spot_samples(model, scheme, payoff, n, config.seed, StreamDomain::SecondPass, first);
    for (std::size_t i = 0; i < n; ++i) s.payoff[i] += coef * s.control[i];
    return s.payoff;
  };
  Estimate est = sequential_estimate(source, config, "crude_cv");
  est.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return est;
}

}  // namespace ncv
