#include <chrono>
#include <cmath>
#include <stdexcept>

#include "ncv/estimators.hpp"
#include "ncv/oracles.hpp"
#include "ncv/running_stats.hpp"

namespace ncv {

namespace {

double level_h(const MlmcConfig& c, int level) {
  return c.h_finest * std::pow(static_cast<double>(c.factor), c.levels - 1 - level);
}

struct Jump {
  double time;
  double size;
};

// One sample of level `level`: fine value minus coarse value (coarse = 0 on level 0).
class CoupledSampler {
 public:
  CoupledSampler(const ModelSpec& model, const Payoff& payoff, double h_fine, int factor, bool coupled)
      : model_(model),
        payoff_(payoff),
        kind_(default_scheme(model, h_fine).kind),
        h_(h_fine),
        factor_(factor),
        coupled_(coupled),
        steps_(grid_steps(model.maturity(), h_fine)) {
    if (coupled_ && steps_ % factor_ != 0) throw ModelError("coarse grid does not nest in the fine grid");
    const int d = model.dim();
    xf_.resize(d);
    xc_.resize(d);
    tmp_.resize(d);
    dw_.resize(model.brownian_dim());
    dwc_.resize(model.brownian_dim());
    dW_.assign(model.jump_dim(), 0.0);
    dWc_.assign(model.jump_dim(), 0.0);
    if (model.levy()) small_ = model.levy()->B_eps(0, 0) > 0.0;
  }

  double sample(RandomStream& rng) {
    const ModelSpec& m = model_;
    const double T = m.maturity();
    jumps_.clear();
    if (const LevyDerived* lv = m.levy(); lv && lv->lambda_eps > 0.0) {
      double t = rng.exponential(lv->lambda_eps);
      double z[1];
      while (t < T) {
        sample_large_jump(*lv, *m.measure(), rng, z);
        jumps_.push_back({t, z[0]});
        t += rng.exponential(lv->lambda_eps);
      }
    }
    std::copy(m.initial_state().begin(), m.initial_state().end(), xf_.begin());
    xc_ = xf_;
    double tf = 0.0, tc = 0.0;
    std::fill(dwc_.begin(), dwc_.end(), 0.0);
    std::fill(dWc_.begin(), dWc_.end(), 0.0);
    std::size_t next_jump = 0;

    for (int cell = 0; cell < steps_; ++cell) {
      const double grid = (cell + 1 == steps_) ? T : (cell + 1) * h_;
      const bool coarse_grid = (cell + 1) % factor_ == 0;
      while (true) {
        const bool jump_here = next_jump < jumps_.size() && jumps_[next_jump].time < grid;
        const double end = jump_here ? jumps_[next_jump].time : grid;
        const double theta = end - tf;
        const double st = std::sqrt(theta);
        for (double& v : dw_) v = st * rng.normal();
        if (small_)
          for (double& v : dW_) v = st * rng.normal();
        const double* jump = jump_here ? &jumps_[next_jump].size : nullptr;
        scheme_step(m, kind_, tf, xf_, theta, dw_, dW_, jump, tmp_);
        xf_.swap(tmp_);
        if (coupled_) {
          for (std::size_t i = 0; i < dw_.size(); ++i) dwc_[i] += dw_[i];
          for (std::size_t i = 0; i < dW_.size(); ++i) dWc_[i] += dW_[i];
          if (jump_here || coarse_grid) {
            scheme_step(m, kind_, tc, xc_, end - tc, dwc_, dWc_, jump, tmp_);
            xc_.swap(tmp_);
            tc = end;
            std::fill(dwc_.begin(), dwc_.end(), 0.0);
            std::fill(dWc_.begin(), dWc_.end(), 0.0);
          }
        }
        tf = end;
        if (!jump_here) break;
        ++next_jump;
      }
    }
    const double y = std::exp(-m.rate() * T);
    const double fine = terminal_value(m, payoff_, xf_, y);
    return coupled_ ? fine - terminal_value(m, payoff_, xc_, y) : fine;
  }

 private:
  const ModelSpec& model_;
  Payoff payoff_;
  SchemeKind kind_;
  double h_;
  int factor_;
  bool coupled_;
  int steps_;
  bool small_ = false;
  std::vector<Jump> jumps_;
  std::vector<double> xf_, xc_, tmp_, dw_, dwc_, dW_, dWc_;
};

}  // namespace

std::vector<double> mlmc_level_samples(const ModelSpec& model, const Payoff& payoff,
                                       const MlmcConfig& config, int level, std::size_t n,
                                       std::uint64_t first_index) {
  if (config.factor < 2) throw std::invalid_argument("MLMC level factor must be at least 2");
  if (level < 0 || level >= config.levels) throw std::invalid_argument("MLMC level out of range");
  CoupledSampler sampler(model, payoff, level_h(config, level), config.factor, level > 0);
  const std::uint64_t seed = mix_seed(config.seed, static_cast<std::uint64_t>(level));
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    RandomStream rng(seed, StreamDomain::Multilevel, first_index + i);
    out[i] = sampler.sample(rng);
  }
  return out;
}

MlmcResult mlmc(const ModelSpec& model, const Payoff& payoff, const MlmcConfig& config) {
  if (config.levels < 1) throw std::invalid_argument("MLMC needs at least one level");
  if (config.factor < 2) throw std::invalid_argument("MLMC level factor must be at least 2");
  if (level_h(config, 0) > model.maturity() * (1.0 + 1e-12))
    throw std::invalid_argument("coarsest MLMC step exceeds the maturity");
  const auto start = std::chrono::steady_clock::now();
  const int L = config.levels;
  const double lambda = model.levy() ? model.levy()->lambda_eps : 0.0;
  const double T = model.maturity();

  std::vector<RunningStats> stats(L);
  MlmcResult result;
  result.levels.resize(L);
  for (int l = 0; l < L; ++l) {
    auto& lv = result.levels[l];
    lv.h = level_h(config, l);
    lv.cost = T / lv.h + lambda * T + (l > 0 ? T / (lv.h * config.factor) + lambda * T : 0.0);
    stats[l].add(mlmc_level_samples(model, payoff, config, l, config.pilot_paths, 0));
  }

  const double z = normal_quantile(1.0 - config.alpha / 2.0);
  const double target = config.tol / std::sqrt(2.0) / z;
  for (int iter = 0; iter < 20; ++iter) {
    double sum = 0.0;
    for (int l = 0; l < L; ++l) sum += std::sqrt(stats[l].variance() * result.levels[l].cost);
    bool more = false;
    for (int l = 0; l < L; ++l) {
      const double v = stats[l].variance();
      const double want = std::ceil(std::sqrt(v / result.levels[l].cost) * sum / (target * target));
      const std::size_t goal = std::min<std::size_t>(
          config.max_paths_per_level, std::max<std::size_t>(static_cast<std::size_t>(want), 2));
      if (goal > stats[l].count()) {
        // Grow in steps so later variance estimates can revise the allocation.
        const std::size_t add = std::min(goal - stats[l].count(), std::max<std::size_t>(stats[l].count(), 10000));
        stats[l].add(mlmc_level_samples(model, payoff, config, l, add, stats[l].count()));
        more = true;
      }
    }
    if (!more) break;
  }

  Estimate& est = result.estimate;
  est.method = "mlmc";
  double var_of_mean = 0.0;
  std::size_t total = 0;
  for (int l = 0; l < L; ++l) {
    auto& lv = result.levels[l];
    lv.M = stats[l].count();
    lv.mean = stats[l].mean();
    lv.variance = stats[l].variance();
    est.mean += lv.mean;
    var_of_mean += lv.variance / static_cast<double>(lv.M);
    total += lv.M;
  }
  est.M = total;
  est.variance = var_of_mean * static_cast<double>(total);
  est.half_width = z * std::sqrt(var_of_mean);
  est.tol_met = est.half_width <= config.tol;
  if (L > 1) result.bias_estimate = std::abs(result.levels[L - 1].mean) / (config.factor - 1.0);
  est.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace ncv
