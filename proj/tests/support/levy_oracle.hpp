#pragma once

// Independent reference values for the tempered-stable measure, computed by
// adaptive Gauss-Kronrod quadrature of the density itself.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>

#include "ncv/levy.hpp"

namespace ncv::oracle {

struct LevyQuadrature {
  double gamma_eps = 0.0;
  double B_eps = 0.0;
  double lambda_eps = 0.0;
  double linear_compensator = 0.0;
};

template <class F>
double integrate(F f, double a, double b) {
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(f, a, b, 8, 1e-12);
}

/// Splits the power region at a geometric ladder so the kronrod rule never
/// sees the singular end of an interval with a large dynamic range.
template <class F>
double integrate_power(F f, double a, double b) {
  double total = 0.0;
  double lo = a;
  while (lo < b) {
    const double hi = std::min(b, lo * 4.0);
    total += integrate(f, lo, hi);
    lo = hi;
  }
  return total;
}

/// int_0^b of an integrand with an integrable singularity at 0, summed over
/// [b 4^-(j+1), b 4^-j] until the pieces stop mattering.
template <class F>
double integrate_to_zero(F f, double b) {
  double total = 0.0;
  for (double hi = b; hi > b * 1e-40; hi *= 0.25) total += integrate(f, hi * 0.25, hi);
  return total;
}

inline LevyQuadrature quadrature_derive(const LevyMeasureSpec& m) {
  const double eps = m.truncation;
  const double inf = std::numeric_limits<double>::infinity();
  auto nu = [&](double z) { return m.density(z); };
  LevyQuadrature q;
  // Power region, both sides, eps <= |z| <= 1.
  const double pos_mass = integrate_power(nu, eps, 1.0);
  const double neg_mass = integrate_power([&](double z) { return nu(-z); }, eps, 1.0);
  const double pos_first = integrate_power([&](double z) { return z * nu(z); }, eps, 1.0);
  const double neg_first = integrate_power([&](double z) { return z * nu(-z); }, eps, 1.0);
  const double pos_tail = integrate(nu, 1.0, inf);
  const double neg_tail = integrate([&](double z) { return nu(-z); }, 1.0, inf);
  const double pos_tail_first = integrate([&](double z) { return z * nu(z); }, 1.0, inf);
  const double neg_tail_first = integrate([&](double z) { return z * nu(-z); }, 1.0, inf);
  // Small jumps: int_{|z|<eps} z^2 nu, integrable since alpha < 2.
  const double small = integrate_to_zero([&](double z) { return z * z * nu(z); }, eps) +
                       integrate_to_zero([&](double z) { return z * z * nu(-z); }, eps);

  q.gamma_eps = pos_first - neg_first;
  q.B_eps = small;
  q.lambda_eps = pos_mass + neg_mass + pos_tail + neg_tail;
  q.linear_compensator = q.gamma_eps + pos_tail_first - neg_tail_first;
  return q;
}

/// int (e^{fz} - 1 - f z 1{|z|<1}) nu(dz)
inline double quadrature_exponential_compensator(const LevyMeasureSpec& m, double f) {
  const double inf = std::numeric_limits<double>::infinity();
  auto inner = [&](double z) {
    const double x = f * z;
    const double core = std::abs(x) < 1e-4 ? x * x * (0.5 + x / 6.0 + x * x / 24.0)
                                           : std::expm1(x) - x;
    return core * m.density(z);
  };
  auto outer = [&](double z) {
    const double d = m.density(z);
    return d == 0.0 ? 0.0 : std::expm1(f * z) * d;
  };
  return integrate_to_zero([&](double z) { return inner(-z); }, 1.0) +
         integrate_to_zero(inner, 1.0) + integrate(outer, -inf, -1.0) +
         integrate(outer, 1.0, inf);
}

}  // namespace ncv::oracle
