#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fieldbench/nn/layers.hpp"

namespace fieldbench::nn {

enum class HeadKind { MeanOnly, Heteroscedastic, Evidential };

const char* head_kind_name(HeadKind k);
std::optional<HeadKind> head_kind_from_name(const std::string& name);

struct BackboneConfig {
  std::vector<int> encoder_channels = {32, 64, 128, 256, 512};
  int bottleneck_channels = 1024;
  HeadKind head_kind = HeadKind::MeanOnly;
  double dropout_rate = 0.0;
  /// Zero-pad inputs to the next multiple of 2^depth and crop the output.
  /// When off, non-divisible inputs raise ShapeMismatch.
  bool pad_inputs = true;

  int depth() const { return int(encoder_channels.size()); }
  int divisor() const { return 1 << depth(); }
  int head_channels() const;
  void validate() const;
};

struct ShapeMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Post-activation head output. Channel semantics depend on the head:
///   mean-only:       [mean]
///   heteroscedastic: [mean, log aleatoric variance]
///   evidential:      [gamma, nu, alpha, beta] with nu, beta > 0 and
///                    alpha > 1 enforced by softplus (+1e-4 floor).
struct RawHeadOutput {
  Tensor channels;
  HeadKind head_kind = HeadKind::MeanOnly;
};

/// Lower bound added to each softplus output so the evidential constraints
/// stay strict even when the pre-activation underflows in float32.
inline constexpr float kEvidentialFloor = 1e-4f;

float softplus(float x);
float evidential_nu(float raw);
float evidential_alpha(float raw);
float evidential_beta(float raw);

/// Encoder-decoder with skip connections: `depth` encoder blocks of
/// (conv3x3 + BN + ReLU) x2 followed by 2x2 max-pooling, a bottleneck block,
/// and mirrored decoder blocks with 2x2 transposed-conv upsampling and skip
/// concatenation. Dropout (if configured) follows every encoder and decoder
/// block; a 1x1 convolution forms the head.
class UNetBackbone {
 public:
  explicit UNetBackbone(BackboneConfig cfg);

  void init_weights(std::uint64_t seed);

  /// train=true uses batch statistics in BN and records everything backward
  /// needs; stochastic=true keeps dropout active (dropout_key selects the
  /// mask stream). Output spatial dims always equal input dims.
  RawHeadOutput forward(const Tensor& input, bool train, bool stochastic,
                        std::uint64_t dropout_key = 0);

  /// d(loss)/d(activated head output) -> parameter gradients. Requires the
  /// caches of an immediately preceding forward(train=true) on this batch.
  void backward(const Tensor& d_output);

  void zero_grad();
  std::vector<ParamRef> params();
  std::vector<StateRef> state();

  const BackboneConfig& config() const { return cfg_; }
  std::int64_t parameter_count();

 private:
  struct ConvUnit {
    ConvUnit(int cin, int cout) : conv(cin, cout), bn(cout) {}
    Conv3x3 conv;
    BatchNorm2d bn;
    Tensor out;  // post-ReLU activation
  };
  struct EncBlock {
    EncBlock(int cin, int cout, double p) : a(cin, cout), b(cout, cout), drop(p) {}
    ConvUnit a, b;
    Dropout drop;
    Tensor dropped;       // post-dropout block output; doubles as the skip
    Tensor dropped_grad;  // skip-path gradient stashed by the decoder pass
    MaxPool2 pool;
  };
  struct DecBlock {
    DecBlock(int cin, int cout, double p)
        : up(cin, cout), a(2 * cout, cout), b(cout, cout), drop(p) {}
    ConvT2x2 up;
    ConvUnit a, b;
    Dropout drop;
    Tensor cat_in;  // concatenated convT output and skip
    Tensor dropped;
  };

  void run_unit(ConvUnit& u, const Tensor& x, bool train);
  void unit_backward(ConvUnit& u, const Tensor& d_out, Tensor& d_in, bool need_dx);

  BackboneConfig cfg_;
  std::vector<EncBlock> enc_;
  std::unique_ptr<ConvUnit> bott_a_, bott_b_;
  std::vector<DecBlock> dec_;
  std::unique_ptr<Conv1x1> head_;

  // forward bookkeeping
  int in_h_ = 0, in_w_ = 0;      // original (pre-pad) spatial dims
  int pad_h_ = 0, pad_w_ = 0;    // padded dims
  bool train_mode_ = false;
  Tensor head_raw_;  // pre-activation head output (padded dims)
};

}  // namespace fieldbench::nn
