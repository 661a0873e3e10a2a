#include "fieldbench/nn/backbone.hpp"

#include <cmath>
#include <cstring>

namespace fieldbench::nn {

const char* head_kind_name(HeadKind k) {
  switch (k) {
    case HeadKind::MeanOnly: return "mean_only";
    case HeadKind::Heteroscedastic: return "heteroscedastic";
    case HeadKind::Evidential: return "evidential";
  }
  return "?";
}

std::optional<HeadKind> head_kind_from_name(const std::string& name) {
  if (name == "mean_only") return HeadKind::MeanOnly;
  if (name == "heteroscedastic") return HeadKind::Heteroscedastic;
  if (name == "evidential") return HeadKind::Evidential;
  return std::nullopt;
}

int BackboneConfig::head_channels() const {
  switch (head_kind) {
    case HeadKind::MeanOnly: return 1;
    case HeadKind::Heteroscedastic: return 2;
    case HeadKind::Evidential: return 4;
  }
  return 1;
}

void BackboneConfig::validate() const {
  if (encoder_channels.empty())
    throw std::invalid_argument("BackboneConfig: encoder_channels must be nonempty");
  for (std::size_t i = 0; i < encoder_channels.size(); ++i) {
    if (encoder_channels[i] < 1)
      throw std::invalid_argument("BackboneConfig: channels must be positive");
    if (i > 0 && encoder_channels[i] <= encoder_channels[i - 1])
      throw std::invalid_argument("BackboneConfig: encoder_channels must be strictly increasing");
  }
  if (bottleneck_channels < 1)
    throw std::invalid_argument("BackboneConfig: bottleneck_channels must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw std::invalid_argument("BackboneConfig: dropout_rate must be in [0, 1)");
}

float softplus(float x) {
  // log(1 + e^x) without overflow; exact identity: max(x,0) + log1p(e^{-|x|}).
  return std::max(x, 0.0f) + std::log1p(std::exp(-std::fabs(x)));
}
float evidential_nu(float raw) { return softplus(raw) + kEvidentialFloor; }
float evidential_alpha(float raw) { return 1.0f + softplus(raw) + kEvidentialFloor; }
float evidential_beta(float raw) { return softplus(raw) + kEvidentialFloor; }

UNetBackbone::UNetBackbone(BackboneConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto& ch = cfg_.encoder_channels;
  const double p = cfg_.dropout_rate;
  int cin = 2;
  for (int c : ch) {
    enc_.emplace_back(cin, c, p);
    cin = c;
  }
  bott_a_ = std::make_unique<ConvUnit>(cin, cfg_.bottleneck_channels);
  bott_b_ = std::make_unique<ConvUnit>(cfg_.bottleneck_channels, cfg_.bottleneck_channels);
  int cur = cfg_.bottleneck_channels;
  for (int i = cfg_.depth() - 1; i >= 0; --i) {
    dec_.emplace_back(cur, ch[std::size_t(i)], p);  // dec_[0] is the deepest block
    cur = ch[std::size_t(i)];
  }
  head_ = std::make_unique<Conv1x1>(cur, cfg_.head_channels());
}

void UNetBackbone::init_weights(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x1417));
  for (auto& blk : enc_) {
    blk.a.conv.init(rng);
    blk.a.bn.init();
    blk.b.conv.init(rng);
    blk.b.bn.init();
  }
  bott_a_->conv.init(rng);
  bott_a_->bn.init();
  bott_b_->conv.init(rng);
  bott_b_->bn.init();
  for (auto& blk : dec_) {
    blk.up.init(rng);
    blk.a.conv.init(rng);
    blk.a.bn.init();
    blk.b.conv.init(rng);
    blk.b.bn.init();
  }
  head_->init(rng);
}

void UNetBackbone::run_unit(ConvUnit& u, const Tensor& x, bool train) {
  Tensor conv_out, bn_out;
  u.conv.forward(x, conv_out);
  u.bn.forward(conv_out, bn_out, train);
  relu_forward(bn_out, u.out);
}

void UNetBackbone::unit_backward(ConvUnit& u, const Tensor& d_out, Tensor& d_in,
                                 bool need_dx) {
  Tensor d_bn, d_conv;
  relu_backward(u.out, d_out, d_bn);
  u.bn.backward(d_bn, d_conv);
  u.conv.backward(d_conv, d_in, need_dx);
}

RawHeadOutput UNetBackbone::forward(const Tensor& input, bool train, bool stochastic,
                                    std::uint64_t dropout_key) {
  if (input.c != 2) throw ShapeMismatch("backbone expects a 2-channel input");
  in_h_ = input.h;
  in_w_ = input.w;
  const int div = cfg_.divisor();
  pad_h_ = (input.h + div - 1) / div * div;
  pad_w_ = (input.w + div - 1) / div * div;
  if (!cfg_.pad_inputs && (pad_h_ != input.h || pad_w_ != input.w))
    throw ShapeMismatch("input dims must be divisible by " + std::to_string(div) +
                        " when padding is disabled");

  Tensor cur;
  if (pad_h_ == input.h && pad_w_ == input.w) {
    cur = input;
  } else {
    cur.resize(input.n, 2, pad_h_, pad_w_);
    for (int i = 0; i < input.n; ++i)
      for (int ci = 0; ci < 2; ++ci)
        for (int r = 0; r < input.h; ++r)
          std::memcpy(cur.chan(i, ci) + std::size_t(r) * pad_w_,
                      input.chan(i, ci) + std::size_t(r) * input.w,
                      std::size_t(input.w) * sizeof(float));
  }

  train_mode_ = train;
  const bool drop_active = (train || stochastic) && cfg_.dropout_rate > 0.0;

  std::uint64_t key = mix_seed(dropout_key, 0xd20);
  for (std::size_t i = 0; i < enc_.size(); ++i) {
    auto& blk = enc_[i];
    run_unit(blk.a, cur, train);
    run_unit(blk.b, blk.a.out, train);
    blk.drop.forward(blk.b.out, blk.dropped, drop_active, mix_seed(key, 2 * i));
    blk.pool.forward(blk.dropped, cur);
  }

  run_unit(*bott_a_, cur, train);
  run_unit(*bott_b_, bott_a_->out, train);
  const Tensor* up_in = &bott_b_->out;

  for (std::size_t i = 0; i < dec_.size(); ++i) {
    auto& blk = dec_[i];
    const auto& skip = enc_[enc_.size() - 1 - i].dropped;
    Tensor up_out;
    blk.up.forward(*up_in, up_out);
    concat_forward(up_out, skip, blk.cat_in);
    run_unit(blk.a, blk.cat_in, train);
    run_unit(blk.b, blk.a.out, train);
    blk.drop.forward(blk.b.out, blk.dropped, drop_active, mix_seed(key, 2 * i + 1));
    up_in = &blk.dropped;
  }
  head_->forward(*up_in, head_raw_);

  RawHeadOutput out;
  out.head_kind = cfg_.head_kind;
  out.channels.resize(input.n, head_raw_.c, in_h_, in_w_);
  for (int i = 0; i < input.n; ++i) {
    for (int ci = 0; ci < head_raw_.c; ++ci) {
      for (int r = 0; r < in_h_; ++r) {
        const float* src = head_raw_.chan(i, ci) + std::size_t(r) * pad_w_;
        float* dst = out.channels.chan(i, ci) + std::size_t(r) * in_w_;
        if (cfg_.head_kind == HeadKind::Evidential && ci > 0) {
          for (int c = 0; c < in_w_; ++c)
            dst[c] = ci == 2 ? evidential_alpha(src[c])
                             : (ci == 1 ? evidential_nu(src[c]) : evidential_beta(src[c]));
        } else {
          std::memcpy(dst, src, std::size_t(in_w_) * sizeof(float));
        }
      }
    }
  }
  return out;
}

void UNetBackbone::backward(const Tensor& d_output) {
  if (!train_mode_) throw std::logic_error("backward requires forward(train=true)");
  // Route the gradient through the head activation and undo the crop.
  Tensor d_raw(head_raw_.n, head_raw_.c, pad_h_, pad_w_);
  for (int i = 0; i < d_output.n; ++i) {
    for (int ci = 0; ci < head_raw_.c; ++ci) {
      for (int r = 0; r < in_h_; ++r) {
        const float* src = d_output.chan(i, ci) + std::size_t(r) * in_w_;
        const float* raw = head_raw_.chan(i, ci) + std::size_t(r) * pad_w_;
        float* dst = d_raw.chan(i, ci) + std::size_t(r) * pad_w_;
        if (cfg_.head_kind == HeadKind::Evidential && ci > 0) {
          for (int c = 0; c < in_w_; ++c) {
            const float sig = 1.0f / (1.0f + std::exp(-raw[c]));  // d softplus
            dst[c] = src[c] * sig;
          }
        } else {
          std::memcpy(dst, src, std::size_t(in_w_) * sizeof(float));
        }
      }
    }
  }

  Tensor d_cur;
  head_->backward(d_raw, d_cur, true);

  for (std::size_t i = dec_.size(); i-- > 0;) {
    auto& blk = dec_[i];
    const auto skip_index = enc_.size() - 1 - i;
    Tensor d_dropped;
    blk.drop.backward(d_cur, d_dropped);
    Tensor d_a, d_cat;
    unit_backward(blk.b, d_dropped, d_a, true);
    unit_backward(blk.a, d_a, d_cat, true);
    Tensor d_up(d_cat.n, blk.cat_in.c - enc_[skip_index].dropped.c, d_cat.h, d_cat.w);
    Tensor d_skip(d_cat.n, enc_[skip_index].dropped.c, d_cat.h, d_cat.w);
    concat_backward(d_cat, d_up, d_skip);
    blk.up.backward(d_up, d_cur, true);
    // stash the skip gradient on the encoder block; consumed on the way down
    enc_[skip_index].dropped_grad = std::move(d_skip);
  }

  Tensor d_bott_a;
  unit_backward(*bott_b_, d_cur, d_bott_a, true);
  unit_backward(*bott_a_, d_bott_a, d_cur, true);

  for (std::size_t i = enc_.size(); i-- > 0;) {
    auto& blk = enc_[i];
    Tensor d_pool_in;
    blk.pool.backward(d_cur, d_pool_in);
    // gradient reaching the dropped activation: pooled path + skip path
    for (std::size_t j = 0; j < d_pool_in.count(); ++j)
      d_pool_in.v[j] += blk.dropped_grad.v[j];
    Tensor d_b_out;
    blk.drop.backward(d_pool_in, d_b_out);
    Tensor d_a_out;
    unit_backward(blk.b, d_b_out, d_a_out, true);
    unit_backward(blk.a, d_a_out, d_cur, i > 0);  // no input gradient needed at the first block
  }
}

void UNetBackbone::zero_grad() {
  for (auto ref : params()) std::fill(ref.g->begin(), ref.g->end(), 0.0f);
}

std::vector<ParamRef> UNetBackbone::params() {
  std::vector<ParamRef> out;
  auto add_unit = [&out](const std::string& prefix, ConvUnit& u) {
    out.push_back({prefix + ".conv.weight", &u.conv.weight.w, &u.conv.weight.g});
    out.push_back({prefix + ".conv.bias", &u.conv.bias.w, &u.conv.bias.g});
    out.push_back({prefix + ".bn.gamma", &u.bn.gamma.w, &u.bn.gamma.g});
    out.push_back({prefix + ".bn.beta", &u.bn.beta.w, &u.bn.beta.g});
  };
  for (std::size_t i = 0; i < enc_.size(); ++i) {
    const std::string p = "enc" + std::to_string(i);
    add_unit(p + ".a", enc_[i].a);
    add_unit(p + ".b", enc_[i].b);
  }
  add_unit("bott.a", *bott_a_);
  add_unit("bott.b", *bott_b_);
  for (std::size_t i = 0; i < dec_.size(); ++i) {
    const std::string p = "dec" + std::to_string(i);
    out.push_back({p + ".up.weight", &dec_[i].up.weight.w, &dec_[i].up.weight.g});
    out.push_back({p + ".up.bias", &dec_[i].up.bias.w, &dec_[i].up.bias.g});
    add_unit(p + ".a", dec_[i].a);
    add_unit(p + ".b", dec_[i].b);
  }
  out.push_back({"head.weight", &head_->weight.w, &head_->weight.g});
  out.push_back({"head.bias", &head_->bias.w, &head_->bias.g});
  return out;
}

std::vector<StateRef> UNetBackbone::state() {
  std::vector<StateRef> out;
  for (auto ref : params()) out.push_back({ref.name, ref.w});
  auto add_bn = [&out](const std::string& prefix, BatchNorm2d& bn) {
    out.push_back({prefix + ".running_mean", &bn.running_mean});
    out.push_back({prefix + ".running_var", &bn.running_var});
  };
  for (std::size_t i = 0; i < enc_.size(); ++i) {
    const std::string p = "enc" + std::to_string(i);
    add_bn(p + ".a.bn", enc_[i].a.bn);
    add_bn(p + ".b.bn", enc_[i].b.bn);
  }
  add_bn("bott.a.bn", bott_a_->bn);
  add_bn("bott.b.bn", bott_b_->bn);
  for (std::size_t i = 0; i < dec_.size(); ++i) {
    const std::string p = "dec" + std::to_string(i);
    add_bn(p + ".a.bn", dec_[i].a.bn);
    add_bn(p + ".b.bn", dec_[i].b.bn);
  }
  return out;
}

std::int64_t UNetBackbone::parameter_count() {
  std::int64_t total = 0;
  for (auto ref : params()) total += std::int64_t(ref.w->size());
  return total;
}

}  // namespace fieldbench::nn
