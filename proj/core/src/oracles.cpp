#include "ncv/oracles.hpp"

#include <array>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ncv {

std::string to_string(ReferenceMethod method) {
  switch (method) {
    case ReferenceMethod::BlackScholesClosed: return "black_scholes";
    case ReferenceMethod::MertonSeries: return "merton_series";
    case ReferenceMethod::PublishedTable: return "table";
  }
  return "unknown";
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

double bs_call(double x, double K, double r, double sigma, double T) {
  if (!(x > 0.0 && K > 0.0 && T > 0.0 && sigma >= 0.0))
    throw std::invalid_argument("bs_call: x, K, T must be positive");
  const double disc = std::exp(-r * T);
  if (sigma == 0.0) return std::max(x - K * disc, 0.0);
  const double sd = sigma * std::sqrt(T);
  const double d1 = (std::log(x / K) + (r + 0.5 * sigma * sigma) * T) / sd;
  const double d2 = d1 - sd;
  return x * normal_cdf(d1) - K * disc * normal_cdf(d2);
}

double bs_optimal_control(double t, double x, double K, double r, double sigma, double T) {
  if (x <= 0.0) return 0.0;
  const double tau = T - t;
  if (tau <= 0.0) {
    if (x > K) return -sigma * x;
    if (x < K) return 0.0;
    return -0.5 * sigma * x;
  }
  const double sd = sigma * std::sqrt(tau);
  const double d1 = (std::log(x / K) + (r + 0.5 * sigma * sigma) * tau) / sd;
  return -sigma * x * normal_cdf(d1);
}

ReferencePrice merton_call(double x, double K, double r, double sigma, double lambda,
                           double jump_log_mean, double jump_log_stdev, double T) {
  ReferencePrice out;
  out.method = ReferenceMethod::MertonSeries;
  if (lambda == 0.0) {
    out.value = bs_call(x, K, r, sigma, T);
    out.terms = 1;
    return out;
  }
  const double beta = std::exp(jump_log_mean + 0.5 * jump_log_stdev * jump_log_stdev) - 1.0;
  const double lt = lambda * (1.0 + beta) * T;
  double weight = std::exp(-lt);
  double mass = 0.0;
  double sum = 0.0;
  int j = 0;
  // Each Black-Scholes term is bounded by x, so the dropped tail is below
  // x (1 - accumulated Poisson mass).
  for (; j < 10000; ++j) {
    const double rj = r - lambda * beta + j * std::log1p(beta) / T;
    const double sj = std::sqrt(sigma * sigma + j * jump_log_stdev * jump_log_stdev / T);
    sum += weight * bs_call(x, K, rj, sj, T);
    mass += weight;
    if (j > lt && (1.0 - mass) * x < 1e-12) break;
    weight *= lt / (j + 1);
  }
  out.value = sum;
  out.terms = j + 1;
  return out;
}

std::optional<ReferencePrice> heston_table_reference(double K) {
  static constexpr std::array<double, 7> strikes{0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3};
  static constexpr std::array<double, 7> prices{0.47517, 0.42623, 0.38271, 0.34406,
                                                0.30977, 0.27934, 0.25232};
  for (std::size_t i = 0; i < strikes.size(); ++i) {
    if (std::abs(K - strikes[i]) < 1e-12) return ReferencePrice{prices[i], ReferenceMethod::PublishedTable, 0};
  }
  return std::nullopt;
}

}  // namespace ncv
