#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ncv/models.hpp"
#include "ncv/rng.hpp"
#include "ncv/trajectory.hpp"

namespace ncv {

enum class SchemeKind { EulerExplicit, HestonSemiImplicit, JumpAdapted };

std::string to_string(SchemeKind kind);

struct SchemeSpec {
  SchemeKind kind = SchemeKind::EulerExplicit;
  double h = 0.0;  ///< uniform step, or the cap for jump-adapted steps
};

/// Scheme the model is simulated with: semi-implicit for Heston,
/// jump-adapted whenever there is a Levy measure, explicit Euler otherwise.
SchemeSpec default_scheme(const ModelSpec& model, double h);

/// Number of uniform steps T / h; throws ModelError unless h divides T.
int grid_steps(double maturity, double h);

/// x' = x + b(t, x) h + sigma(t, x) dw
void euler_step(const ModelSpec& model, double t, std::span<const double> x, double h,
                std::span<const double> dw, std::span<double> out);

struct HestonState {
  double x = 0.0;
  double v = 0.0;
};

/// Explicit in X, implicit in V; the quadratic in sqrt(V') is solved exactly.
HestonState heston_step(const HestonParams& p, double x, double v, double h, double dw1, double dw2);

/// One step of length theta for any scheme kind. For the jump-adapted scheme
///   x' = x + (b - F gamma_eps) theta + sigma dw + F beta_eps dW [+ F J],
/// with F evaluated at the pre-step state; `jump` may be null.
void scheme_step(const ModelSpec& model, SchemeKind kind, double t, std::span<const double> x,
                 double theta, std::span<const double> dw, std::span<const double> dW,
                 const double* jump, std::span<double> out);

/// f(X(T)) Y(T) + Z(T) with Z = 0 (no running cost in the models here).
double terminal_value(const ModelSpec& model, const Payoff& payoff, std::span<const double> x,
                      double y);

/// Simulates single paths; owns scratch buffers, so one instance per thread.
class PathSimulator {
 public:
  PathSimulator(const ModelSpec& model, const SchemeSpec& scheme, const Payoff& payoff);

  /// Returns the uncontrolled functional; appends the path to `record` if given.
  double run(RandomStream& rng, TrajectoryBatch* record);

  /// State X(T) of the most recent path.
  std::span<const double> state() const { return x_; }
  const ModelSpec& model() const { return *model_; }
  const SchemeSpec& scheme() const { return scheme_; }
  /// Empty record with the dimensions this simulator writes.
  TrajectoryBatch make_record() const;

 private:
  void push(TrajectoryBatch& rec, double t, double y, StepKind kind, const double* jump) const;

  const ModelSpec* model_;
  SchemeSpec scheme_;
  Payoff payoff_;
  int steps_;
  bool has_small_jumps_ = false;
  std::vector<double> x_, next_, dw_, dW_, jump_;
};

struct SimResult {
  std::vector<double> gamma_base;
  std::optional<TrajectoryBatch> records;
};

/// M paths; path i uses the stream (seed, domain, first_index + i).
SimResult simulate_batch(const ModelSpec& model, const SchemeSpec& scheme, const Payoff& payoff,
                         std::size_t M, std::uint64_t seed, bool record,
                         StreamDomain domain = StreamDomain::SecondPass,
                         std::uint64_t first_index = 0);

/// One recorded jump-adapted path.
TrajectoryBatch jump_adapted_path(const ModelSpec& model, double h, const Payoff& payoff,
                                  RandomStream& rng);

}  // namespace ncv
