#include "ncv/trajectory.hpp"

namespace ncv {

void TrajectoryBatch::clear() {
  offsets.assign(1, 0);
  t.clear();
  x.clear();
  y.clear();
  kind.clear();
  dw.clear();
  dW.clear();
  jump.clear();
  gamma_base.clear();
}

void TrajectoryBatch::reserve(std::size_t n) {
  t.reserve(n);
  x.reserve(n * dim);
  y.reserve(n);
  kind.reserve(n);
  dw.reserve(n * brownian);
  dW.reserve(n * jumps);
  jump.reserve(n * jumps);
}

TrajectoryView::TrajectoryView(const TrajectoryBatch& batch, std::size_t path)
    : b_(&batch), path_(path), begin_(batch.offsets.at(path)), end_(batch.offsets.at(path + 1)) {}

std::span<const double> TrajectoryView::state(std::size_t k) const {
  return {b_->x.data() + (begin_ + k) * b_->dim, static_cast<std::size_t>(b_->dim)};
}

std::span<const double> TrajectoryView::dw(std::size_t k) const {
  return {b_->dw.data() + (begin_ + k) * b_->brownian, static_cast<std::size_t>(b_->brownian)};
}

std::span<const double> TrajectoryView::dW(std::size_t k) const {
  return {b_->dW.data() + (begin_ + k) * b_->jumps, static_cast<std::size_t>(b_->jumps)};
}

std::span<const double> TrajectoryView::jump(std::size_t k) const {
  return {b_->jump.data() + (begin_ + k) * b_->jumps, static_cast<std::size_t>(b_->jumps)};
}

}  // namespace ncv
