#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ncv/levy.hpp"

namespace ncv {

struct GbmParams {
  double rate = 0.0;
  double volatility = 0.0;
  Eigen::MatrixXd correlation_factor;  ///< lower-triangular L with L L^T = correlation
};

struct HestonParams {
  double rate = 0.0;
  double kappa = 0.0;
  double theta = 0.0;
  double vol_of_vol = 0.0;
  double rho = 0.0;
  double v0 = 0.0;
};

/// Exponential Levy model S_i(t) = S_i(0) exp(r t + X_i(t)); the state is X.
struct ExpLevyParams {
  double rate = 0.0;
  Eigen::MatrixXd sigma;     ///< constant d x d diffusion matrix
  Eigen::VectorXd loadings;  ///< F = (f_1, ..., f_d)^T, q = 1
  Eigen::VectorXd drift;     ///< martingale drift b
  Eigen::VectorXd spot0;
};

struct MertonParams {
  double rate = 0.0;
  double volatility = 0.0;
  double mean_jump = 0.0;  ///< beta = E[J] = exp(alpha_J + gamma_J^2 / 2) - 1
};

enum class ModelKind { Gbm, Heston, ExpLevy, Merton };

std::string to_string(ModelKind kind);

/// One pricing problem: coefficients b, sigma, c, g, F of
///   dX = b dt + sigma dw + F z N(dt, dz),  dY = c Y dt,  dZ = g Y dt
/// together with an optional Levy measure, horizon and initial state.
/// Immutable after construction; safe to share between path workers.
class ModelSpec {
 public:
  using Params = std::variant<GbmParams, HestonParams, ExpLevyParams, MertonParams>;

  ModelSpec(Params params, int dim, double maturity, std::vector<double> x0,
            std::optional<LevyMeasureSpec> measure = std::nullopt);

  ModelKind kind() const;
  int dim() const { return dim_; }
  /// Dimension of the Brownian driver w.
  int brownian_dim() const { return dim_; }
  /// Dimension q of the jump driver (0 without a measure).
  int jump_dim() const { return measure_ ? measure_->dimension() : 0; }
  double maturity() const { return maturity_; }
  const std::vector<double>& initial_state() const { return x0_; }
  double rate() const;

  const LevyMeasureSpec* measure() const { return measure_ ? &*measure_ : nullptr; }
  const LevyDerived* levy() const { return derived_ ? &*derived_ : nullptr; }
  const Params& params() const { return params_; }

  /// b(t, x)
  void drift(double t, std::span<const double> x, std::span<double> out) const;
  /// sigma(t, x) * dw
  void diffuse(double t, std::span<const double> x, std::span<const double> dw,
               std::span<double> out) const;
  Eigen::MatrixXd diffusion_matrix(double t, std::span<const double> x) const;
  /// c(t, x)
  double discount_rate(double t, std::span<const double> x) const;
  /// g(t, x)
  double running_cost(double t, std::span<const double> x) const;
  /// F(t, x) (d x q)
  Eigen::MatrixXd jump_matrix(double t, std::span<const double> x) const;
  /// F(t, x) z, accumulated into out
  void add_jump(double t, std::span<const double> x, std::span<const double> z,
                std::span<double> out) const;

  /// Asset prices the payoff is written on, as a function of the state.
  int underlier_dim() const;
  void underlier(double t, std::span<const double> x, std::span<double> out) const;

  /// Stable text fingerprint of the model (kind and parameters).
  std::string fingerprint() const;

 private:
  Params params_;
  int dim_;
  double maturity_;
  std::vector<double> x0_;
  std::optional<LevyMeasureSpec> measure_;
  std::optional<LevyDerived> derived_;
};

/// Correlated GBM, dX_i = r X_i dt + sigma X_i dW_i. `correlation` must be
/// symmetric positive definite with unit diagonal when given.
ModelSpec build_gbm(double rate, double volatility, const std::optional<Eigen::MatrixXd>& correlation,
                    int dim, double maturity = 3.0, double x0 = 1.0);

/// Heston model in (X, V); requires 2 kappa theta > vol_of_vol^2.
ModelSpec build_heston(const HestonParams& params, double maturity = 3.0, double x0 = 1.0);

/// Exponential Levy model with martingale drift from adaptive quadrature.
ModelSpec build_exp_levy(double rate, const Eigen::MatrixXd& sigma, const Eigen::VectorXd& loadings,
                         const LevyMeasureSpec& measure, double maturity = 3.0, double spot0 = 1.0);

/// Merton jump diffusion, dX = X((r - lambda beta) dt + sigma dW + J dN).
ModelSpec build_merton(double rate, double volatility, double intensity, double jump_log_mean,
                       double jump_log_stdev, double maturity = 3.0, double x0 = 1.0);

/// Lower Cholesky factor; throws ModelError if the matrix is not SPD.
Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& correlation);

// ---------------------------------------------------------------------------

enum class PayoffKind { Call, CallOnMax };

/// European payoff on the model's underliers.
struct Payoff {
  PayoffKind kind = PayoffKind::Call;
  double strike = 1.0;

  double operator()(std::span<const double> spot) const;
};

std::string to_string(PayoffKind kind);

}  // namespace ncv
