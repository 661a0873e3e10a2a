#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fieldbench/core/rng.hpp"
#include "fieldbench/nn/tensor.hpp"

namespace fieldbench::nn {

/// A learnable tensor and its gradient accumulator.
struct Param {
  std::vector<float> w;
  std::vector<float> g;

  void resize(std::size_t size) {
    w.assign(size, 0.0f);
    g.assign(size, 0.0f);
  }
};

struct ParamRef {
  std::string name;
  std::vector<float>* w;
  std::vector<float>* g;
};

/// Named persistent tensor (parameters plus batch-norm running statistics),
/// the unit of checkpoint serialization.
struct StateRef {
  std::string name;
  std::vector<float>* data;
};

/// 3x3 convolution, stride 1, zero padding 1. Forward caches the im2col
/// buffer for the whole batch; backward reuses it for the weight gradient.
class Conv3x3 {
 public:
  Conv3x3(int cin, int cout);

  void init(Rng& rng);
  void forward(const Tensor& x, Tensor& y);
  /// d_y -> d_x (accumulated into weight/bias gradients). Requires the cache
  /// of the immediately preceding forward call.
  void backward(const Tensor& d_y, Tensor& d_x, bool need_dx);

  int cin() const { return cin_; }
  int cout() const { return cout_; }
  Param weight;  // [cout][cin*9]
  Param bias;    // [cout]

 private:
  int cin_, cout_;
  std::vector<float> col_;  // [n][cin*9][h*w]
  int cached_n_ = 0, cached_h_ = 0, cached_w_ = 0;
};

/// 1x1 convolution (the output head). Forward caches its input.
class Conv1x1 {
 public:
  Conv1x1(int cin, int cout);

  void init(Rng& rng);
  void forward(const Tensor& x, Tensor& y);
  void backward(const Tensor& d_y, Tensor& d_x, bool need_dx);

  Param weight;  // [cout][cin]
  Param bias;

 private:
  int cin_, cout_;
  Tensor x_;
};

/// 2x2 transposed convolution with stride 2 (the decoder upsampler).
class ConvT2x2 {
 public:
  ConvT2x2(int cin, int cout);

  void init(Rng& rng);
  void forward(const Tensor& x, Tensor& y);
  void backward(const Tensor& d_y, Tensor& d_x, bool need_dx);

  Param weight;  // [4][cout][cin], sub-kernel k = dr*2 + dc
  Param bias;

 private:
  int cin_, cout_;
  Tensor x_;
};

class BatchNorm2d {
 public:
  explicit BatchNorm2d(int c);

  void init();
  void forward(const Tensor& x, Tensor& y, bool train);
  void backward(const Tensor& d_y, Tensor& d_x);

  Param gamma, beta;
  std::vector<float> running_mean, running_var;

 private:
  int c_;
  double momentum_ = 0.1;
  double eps_ = 1e-5;
  std::vector<float> xhat_;    // cached normalized activations (train only)
  std::vector<float> invstd_;  // per channel
  int cached_n_ = 0, cached_hw_ = 0;
};

/// ReLU keyed off the stored output sign; y may alias x.
void relu_forward(const Tensor& x, Tensor& y);
void relu_backward(const Tensor& y, const Tensor& d_y, Tensor& d_x);

/// 2x2 max pooling, stride 2. Argmax indices cached for backward.
class MaxPool2 {
 public:
  void forward(const Tensor& x, Tensor& y);
  void backward(const Tensor& d_y, Tensor& d_x);

 private:
  std::vector<std::uint8_t> arg_;
  int n_ = 0, c_ = 0, oh_ = 0, ow_ = 0;
};

/// Inverted dropout with a counter-based mask: the mask is a pure function
/// of (key, element index), so backward regenerates it instead of storing it.
class Dropout {
 public:
  explicit Dropout(double rate) : rate_(rate) {}

  /// active=false (or rate 0) is the identity.
  void forward(const Tensor& x, Tensor& y, bool active, std::uint64_t key);
  void backward(const Tensor& d_y, Tensor& d_x);

  double rate() const { return rate_; }

 private:
  double rate_;
  bool active_ = false;
  std::uint64_t key_ = 0;
};

/// Channel concatenation [a ; b] and its adjoint.
void concat_forward(const Tensor& a, const Tensor& b, Tensor& y);
void concat_backward(const Tensor& d_y, Tensor& d_a, Tensor& d_b);

}  // namespace fieldbench::nn
