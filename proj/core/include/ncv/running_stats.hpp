#pragma once

#include <cstddef>
#include <span>

namespace ncv {

/// Streaming mean and variance (Welford); partial results merge exactly
/// in the order they are combined.
class RunningStats {
 public:
  void add(double x);
  void add(std::span<const double> xs);
  void merge(const RunningStats& other);

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  /// Unbiased (divisor n - 1); zero for fewer than two samples.
  double variance() const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace ncv
