#pragma once

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>

#include "ncv/rng.hpp"

namespace ncv {

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Finite-activity Merton jumps: jump sizes J = exp(eta) - 1 with
/// eta ~ Normal(log_mean, log_stdev^2), arriving at rate `intensity`.
struct MertonJumps {
  double intensity = 1.0;
  double log_mean = 0.0;
  double log_stdev = 0.0;
};

/// Infinite-activity measure with power-law singularity on [-1, 1] and
/// exponentially tempered tails outside:
///   C_-|z|^{-(1+alpha)} on [-1, 0),  C_+ z^{-(1+alpha)} on (0, 1],
///   C_- exp(-mu(|z|-1)) for z < -1,  C_+ exp(-mu(z-1)) for z > 1.
struct TemperedStableJumps {
  double c_minus = 1.0;
  double c_plus = 1.0;
  double alpha = 0.5;
  double mu = 2.0;
};

/// One-dimensional Levy measure (q = 1) plus the small-jump truncation level.
/// The truncation only matters for the tempered-stable kind; Merton jumps are
/// simulated exactly.
struct LevyMeasureSpec {
  std::variant<MertonJumps, TemperedStableJumps> kind;
  double truncation = 1e-3;

  bool is_merton() const { return std::holds_alternative<MertonJumps>(kind); }
  int dimension() const { return 1; }

  /// Density of nu with respect to Lebesgue measure.
  double density(double z) const;

  /// Throws ModelError when the parameters are outside their domain.
  void validate() const;
};

/// Quantities of the truncated measure that drive the jump-adapted scheme.
struct LevyDerived {
  Eigen::VectorXd gamma_eps;           ///< int_{eps<=|z|<=1} z nu(dz)
  Eigen::MatrixXd B_eps;               ///< int_{|z|<eps} z z^T nu(dz)
  Eigen::MatrixXd beta_eps;            ///< beta beta^T = B_eps
  double lambda_eps = 0.0;             ///< nu(|z| >= eps)
  Eigen::VectorXd linear_compensator;  ///< int_{|z|>=eps} z nu(dz)
};

/// Closed-form derived quantities. Throws ModelError for eps outside (0, 1).
LevyDerived levy_derive(const LevyMeasureSpec& measure);

/// Draws one jump from nu restricted to |z| > eps, normalised by lambda_eps.
void sample_large_jump(const LevyDerived& derived, const LevyMeasureSpec& measure,
                       RandomStream& rng, std::span<double> out);

/// Symmetric PSD square root via eigendecomposition (scalar sqrt for 1x1).
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m);

/// int_R (exp(f z) - 1 - f z 1{|z|<1}) nu(dz) by adaptive quadrature split at
/// {-1, 0, 1}. Throws ModelError if the integral diverges or fails to
/// converge to the requested relative tolerance.
double exponential_compensator(const LevyMeasureSpec& measure, double loading,
                               double rel_tol = 1e-10);

}  // namespace ncv
