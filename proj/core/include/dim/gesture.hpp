#pragma once

#include <string>
#include <vector>

#include "dim/tensor.hpp"

namespace dim {

// Full-body pose track at 20 fps: 3 exponential-map channels per joint plus
// 6 root channels (3 translational + 3 rotational velocities).
struct GestureSequence {
  Tensor values;  // T × (D+6)
  double fps = 20.0;

  int64_t frames() const { return values.dim(0); }
  int64_t channels() const { return values.dim(1); }
};

// Per-channel z-score statistics from a training set.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // floored at 1e-8

  static ChannelStats fit(const std::vector<GestureSequence>& clips);
  Tensor normalize(const Tensor& y) const;
  Tensor denormalize(const Tensor& y) const;
};

}  // namespace dim
