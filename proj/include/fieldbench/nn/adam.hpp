#pragma once

#include <optional>
#include <vector>

#include "fieldbench/nn/layers.hpp"

namespace fieldbench::nn {

/// Adam with optional global-norm gradient clipping. Holds first/second
/// moment buffers per registered parameter tensor.
class Adam {
 public:
  Adam(std::vector<ParamRef> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  /// One update from the currently accumulated gradients. When clip_max_norm
  /// is set, gradients are scaled so their global L2 norm is at most that.
  void step(std::optional<double> clip_max_norm = std::nullopt);

  double learning_rate() const { return lr_; }

 private:
  std::vector<ParamRef> params_;
  std::vector<std::vector<float>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace fieldbench::nn
