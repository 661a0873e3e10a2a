#pragma once

#include <cstddef>
#include <vector>

namespace fieldbench::nn {

/// Dense float tensor in NCHW layout. All network compute is float32; the
/// double-precision loss math lives outside the net and casts at the border.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_) { resize(n_, c_, h_, w_); }

  void resize(int n_, int c_, int h_, int w_) {
    n = n_;
    c = c_;
    h = h_;
    w = w_;
    v.assign(count(), 0.0f);
  }
  std::size_t count() const { return std::size_t(n) * c * h * w; }
  std::size_t sample_count() const { return std::size_t(c) * h * w; }

  float* sample(int i) { return v.data() + std::size_t(i) * sample_count(); }
  const float* sample(int i) const { return v.data() + std::size_t(i) * sample_count(); }
  float* chan(int i, int ci) { return sample(i) + std::size_t(ci) * h * w; }
  const float* chan(int i, int ci) const { return sample(i) + std::size_t(ci) * h * w; }

  void zero() { std::fill(v.begin(), v.end(), 0.0f); }
};

}  // namespace fieldbench::nn
