#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ncv {

enum class StepKind : std::uint8_t { Deterministic = 0, Jump = 1, Terminal = 2 };

/// Ragged storage for many recorded paths (compressed rows).
///
/// Point k of a path holds the state at t_k together with the noise that
/// drives the step t_k -> t_{k+1}; the last point of each path sits at T and
/// has kind Terminal and zero increments.
struct TrajectoryBatch {
  int dim = 0;       ///< d
  int brownian = 0;  ///< dimension of w
  int jumps = 0;     ///< q (0 for pure diffusions)

  std::vector<std::size_t> offsets{0};  ///< path m owns points [offsets[m], offsets[m+1])
  std::vector<double> t;
  std::vector<double> x;   ///< dim per point
  std::vector<double> y;
  std::vector<StepKind> kind;
  std::vector<double> dw;  ///< brownian per point
  std::vector<double> dW;  ///< jumps per point
  std::vector<double> jump;  ///< jumps per point, zero unless kind == Jump
  std::vector<double> gamma_base;  ///< one per path

  std::size_t paths() const { return offsets.size() - 1; }
  std::size_t points() const { return t.size(); }

  void clear();
  void reserve(std::size_t points);
};

/// Read-only view of one recorded path.
class TrajectoryView {
 public:
  TrajectoryView(const TrajectoryBatch& batch, std::size_t path);

  std::size_t size() const { return end_ - begin_; }
  double time(std::size_t k) const { return b_->t[begin_ + k]; }
  std::span<const double> state(std::size_t k) const;
  double discount(std::size_t k) const { return b_->y[begin_ + k]; }
  StepKind kind(std::size_t k) const { return b_->kind[begin_ + k]; }
  std::span<const double> dw(std::size_t k) const;
  std::span<const double> dW(std::size_t k) const;
  std::span<const double> jump(std::size_t k) const;
  double gamma_base() const { return b_->gamma_base[path_]; }

 private:
  const TrajectoryBatch* b_;
  std::size_t path_, begin_, end_;
};

}  // namespace ncv
