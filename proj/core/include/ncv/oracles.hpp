#pragma once

#include <optional>
#include <string>

namespace ncv {

enum class ReferenceMethod { BlackScholesClosed, MertonSeries, PublishedTable };

struct ReferencePrice {
  double value = 0.0;
  ReferenceMethod method = ReferenceMethod::BlackScholesClosed;
  int terms = 0;  ///< series terms used (MertonSeries only)
};

std::string to_string(ReferenceMethod method);

/// Standard normal CDF via erfc.
double normal_cdf(double x);
/// Standard normal quantile.
double normal_quantile(double p);

double bs_call(double x, double K, double r, double sigma, double T);

/// G*(t, x) = -sigma x Delta(t, x) for the Black-Scholes call.
double bs_optimal_control(double t, double x, double K, double r, double sigma, double T);

/// Poisson mixture of Black-Scholes prices, truncated once the dropped
/// Poisson tail falls below 1e-10 (relative to x).
ReferencePrice merton_call(double x, double K, double r, double sigma, double lambda,
                           double jump_log_mean, double jump_log_stdev, double T);

/// u(0, 1) of the Heston call for the published strike grid
/// K in {0.7, ..., 1.3} (r = 0.02, kappa = 0.25, theta = 0.5, sigma_v = 0.3,
/// rho = -0.3, v0 = 0.15, T = 3); empty for other strikes.
std::optional<ReferencePrice> heston_table_reference(double K);

}  // namespace ncv
