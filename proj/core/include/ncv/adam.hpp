#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ncv {

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> m, v;
  std::int64_t step = 0;

  explicit AdamState(std::size_t n = 0, double lr = 1e-3) : learning_rate(lr), m(n, 0.0), v(n, 0.0) {}
};

/// In-place Adam update with bias correction.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad);

}  // namespace ncv
