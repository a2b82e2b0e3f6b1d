#include "ncv/schemes.hpp"

#include <cassert>
#include <cmath>

namespace ncv {

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::EulerExplicit: return "euler";
    case SchemeKind::HestonSemiImplicit: return "heston_implicit";
    case SchemeKind::JumpAdapted: return "jump_adapted";
  }
  return "unknown";
}

SchemeSpec default_scheme(const ModelSpec& model, double h) {
  if (model.kind() == ModelKind::Heston) return {SchemeKind::HestonSemiImplicit, h};
  if (model.measure() != nullptr) return {SchemeKind::JumpAdapted, h};
  return {SchemeKind::EulerExplicit, h};
}

int grid_steps(double maturity, double h) {
  if (!(h > 0.0)) throw ModelError("step size must be positive");
  const double n = maturity / h;
  const double rounded = std::round(n);
  if (rounded < 1.0 || std::abs(n - rounded) > 1e-9 * std::max(1.0, n))
    throw ModelError("step size must divide the maturity");
  return static_cast<int>(rounded);
}

void euler_step(const ModelSpec& model, double t, std::span<const double> x, double h,
                std::span<const double> dw, std::span<double> out) {
  const int d = model.dim();
  double drift[16], diff[16];
  std::span<double> b(drift, d), s(diff, d);
  model.drift(t, x, b);
  model.diffuse(t, x, dw, s);
  for (int i = 0; i < d; ++i) out[i] = x[i] + b[i] * h + s[i];
}

HestonState heston_step(const HestonParams& p, double x, double v, double h, double dw1,
                        double dw2) {
  const double sv = std::sqrt(std::max(v, 0.0));
  HestonState next;
  next.x = x + p.rate * x * h + sv * x * dw1;

  const double dz = p.rho * dw1 + std::sqrt(1.0 - p.rho * p.rho) * dw2;
  const double a = 1.0 + p.kappa * h;
  const double b = p.vol_of_vol * dz;
  const double c = v + p.kappa * p.theta * h - 0.5 * p.vol_of_vol * p.vol_of_vol * h;
  const double disc = b * b + 4.0 * a * c;
  assert(disc >= 0.0);
  const double y = (b + std::sqrt(disc)) / (2.0 * a);
  next.v = y * y;
  return next;
}

void scheme_step(const ModelSpec& model, SchemeKind kind, double t, std::span<const double> x,
                 double theta, std::span<const double> dw, std::span<const double> dW,
                 const double* jump, std::span<double> out) {
  if (kind == SchemeKind::HestonSemiImplicit) {
    const auto& p = std::get<HestonParams>(model.params());
    const HestonState s = heston_step(p, x[0], x[1], theta, dw[0], dw[1]);
    out[0] = s.x;
    out[1] = s.v;
    return;
  }
  euler_step(model, t, x, theta, dw, out);
  const LevyDerived* lv = model.levy();
  if (kind != SchemeKind::JumpAdapted || lv == nullptr) return;

  // q = 1 for every measure in scope.
  const double small = lv->gamma_eps(0) * theta;
  const double gauss = dW.empty() ? 0.0 : lv->beta_eps(0, 0) * dW[0];
  const double shift = gauss - small + (jump ? *jump : 0.0);
  if (shift != 0.0) {
    const double z[1] = {shift};
    model.add_jump(t, x, z, out);
  }
}

double terminal_value(const ModelSpec& model, const Payoff& payoff, std::span<const double> x,
                      double y) {
  double spot[16];
  const int n = model.underlier_dim();
  model.underlier(model.maturity(), x, std::span<double>(spot, n));
  return payoff(std::span<const double>(spot, n)) * y;
}

// ---------------------------------------------------------------------------

PathSimulator::PathSimulator(const ModelSpec& model, const SchemeSpec& scheme, const Payoff& payoff)
    : model_(&model), scheme_(scheme), payoff_(payoff), steps_(grid_steps(model.maturity(), scheme.h)) {
  if (model.dim() > 16) throw ModelError("state dimension above 16 is not supported");
  if (scheme.kind == SchemeKind::HestonSemiImplicit && model.kind() != ModelKind::Heston)
    throw ModelError("the semi-implicit scheme is specific to the Heston model");
  if (scheme.kind == SchemeKind::JumpAdapted && model.levy() == nullptr)
    throw ModelError("the jump-adapted scheme needs a Levy measure");
  if (scheme.kind != SchemeKind::JumpAdapted && model.levy() != nullptr)
    throw ModelError("models with jumps must use the jump-adapted scheme");
  if (model.levy()) has_small_jumps_ = model.levy()->B_eps(0, 0) > 0.0;
  x_.resize(model.dim());
  next_.resize(model.dim());
  dw_.resize(model.brownian_dim());
  dW_.assign(model.jump_dim(), 0.0);
  jump_.assign(model.jump_dim(), 0.0);
}

TrajectoryBatch PathSimulator::make_record() const {
  TrajectoryBatch rec;
  rec.dim = model_->dim();
  rec.brownian = model_->brownian_dim();
  rec.jumps = model_->jump_dim();
  return rec;
}

void PathSimulator::push(TrajectoryBatch& rec, double t, double y, StepKind kind,
                         const double* jump) const {
  rec.t.push_back(t);
  rec.x.insert(rec.x.end(), x_.begin(), x_.end());
  rec.y.push_back(y);
  rec.kind.push_back(kind);
  if (kind == StepKind::Terminal) {
    rec.dw.insert(rec.dw.end(), dw_.size(), 0.0);
    rec.dW.insert(rec.dW.end(), dW_.size(), 0.0);
    rec.jump.insert(rec.jump.end(), jump_.size(), 0.0);
    return;
  }
  rec.dw.insert(rec.dw.end(), dw_.begin(), dw_.end());
  rec.dW.insert(rec.dW.end(), dW_.begin(), dW_.end());
  if (jump)
    rec.jump.insert(rec.jump.end(), jump_.begin(), jump_.end());
  else
    rec.jump.insert(rec.jump.end(), jump_.size(), 0.0);
}

double PathSimulator::run(RandomStream& rng, TrajectoryBatch* record) {
  const ModelSpec& m = *model_;
  const double T = m.maturity();
  const double h = scheme_.h;
  const double r = m.rate();
  std::copy(m.initial_state().begin(), m.initial_state().end(), x_.begin());
  double t = 0.0;
  double y = 1.0;

  if (scheme_.kind != SchemeKind::JumpAdapted) {
    const double sh = std::sqrt(h);
    const double decay = std::exp(-r * h);
    for (int k = 0; k < steps_; ++k) {
      for (double& v : dw_) v = sh * rng.normal();
      if (record) push(*record, t, y, StepKind::Deterministic, nullptr);
      scheme_step(m, scheme_.kind, t, x_, h, dw_, {}, nullptr, next_);
      x_.swap(next_);
      t = (k + 1 == steps_) ? T : (k + 1) * h;
      y *= decay;
    }
  } else {
    const LevyDerived& lv = *m.levy();
    const LevyMeasureSpec& measure = *m.measure();
    const double lambda = lv.lambda_eps;
    int cell = 0;
    while (cell < steps_) {
      const double grid = (cell + 1 == steps_) ? T : (cell + 1) * h;
      const double remaining = grid - t;
      double theta = remaining;
      bool jumped = false;
      if (lambda > 0.0) {
        const double delta = rng.exponential(lambda);
        if (delta < remaining) {
          theta = delta;
          jumped = true;
        }
      }
      const double st = std::sqrt(theta);
      for (double& v : dw_) v = st * rng.normal();
      if (has_small_jumps_)
        for (double& v : dW_) v = st * rng.normal();
      if (jumped) sample_large_jump(lv, measure, rng, jump_);
      if (record) push(*record, t, y, jumped ? StepKind::Jump : StepKind::Deterministic,
                       jumped ? jump_.data() : nullptr);
      scheme_step(m, SchemeKind::JumpAdapted, t, x_, theta, dw_, dW_,
                  jumped ? jump_.data() : nullptr, next_);
      x_.swap(next_);
      y *= std::exp(-r * theta);
      if (jumped) {
        t += theta;
      } else {
        t = grid;
        ++cell;
      }
    }
  }

  const double gamma = terminal_value(m, payoff_, x_, y);
  if (record) {
    push(*record, T, y, StepKind::Terminal, nullptr);
    record->offsets.push_back(record->t.size());
    record->gamma_base.push_back(gamma);
  }
  return gamma;
}

SimResult simulate_batch(const ModelSpec& model, const SchemeSpec& scheme, const Payoff& payoff,
                         std::size_t M, std::uint64_t seed, bool record, StreamDomain domain,
                         std::uint64_t first_index) {
  PathSimulator sim(model, scheme, payoff);
  SimResult out;
  out.gamma_base.resize(M);
  if (record) {
    out.records = sim.make_record();
    out.records->reserve(M * (static_cast<std::size_t>(model.maturity() / scheme.h) + 2));
  }
  for (std::size_t i = 0; i < M; ++i) {
    RandomStream rng(seed, domain, first_index + i);
    out.gamma_base[i] = sim.run(rng, record ? &*out.records : nullptr);
  }
  return out;
}

TrajectoryBatch jump_adapted_path(const ModelSpec& model, double h, const Payoff& payoff,
                                  RandomStream& rng) {
  PathSimulator sim(model, {SchemeKind::JumpAdapted, h}, payoff);
  TrajectoryBatch rec = sim.make_record();
  sim.run(rng, &rec);
  return rec;
}

}  // namespace ncv
