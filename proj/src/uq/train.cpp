#include "fieldbench/uq/train.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

#include "fieldbench/core/rng.hpp"
#include "fieldbench/nn/adam.hpp"
#include "fieldbench/uq/losses.hpp"

namespace fieldbench::uq {

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1 || t_passes < 1 || m_members < 1)
    throw std::invalid_argument("TrainConfig: epochs, batch_size, T, M must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate > 0");
  if (lambda < 0.0) throw std::invalid_argument("TrainConfig: lambda must be >= 0");
  if (grad_clip_max_norm && !(*grad_clip_max_norm > 0.0))
    throw std::invalid_argument("TrainConfig: grad_clip_max_norm must be > 0 when set");
}

const char* train_method_name(TrainMethod m) {
  switch (m) {
    case TrainMethod::Mcd: return "mcd";
    case TrainMethod::Ensemble: return "ensemble";
    case TrainMethod::Edl: return "edl";
  }
  return "?";
}

std::optional<TrainMethod> train_method_from_name(const std::string& name) {
  if (name == "mcd") return TrainMethod::Mcd;
  if (name == "ensemble") return TrainMethod::Ensemble;
  if (name == "edl") return TrainMethod::Edl;
  return std::nullopt;
}

nn::HeadKind required_head(TrainMethod method) {
  return method == TrainMethod::Edl ? nn::HeadKind::Evidential
                                    : nn::HeadKind::Heteroscedastic;
}

namespace {

struct BatchBuffers {
  nn::Tensor input;
  std::vector<double> target;
  std::vector<double> ch[4];   // flattened per-channel head outputs
  std::vector<double> grad[4]; // per-channel loss gradients
  nn::Tensor d_out;
};

void fill_batch(const std::vector<TrainSample>& data, const std::vector<int>& order,
                std::size_t begin, std::size_t end, BatchBuffers& buf) {
  const int b = int(end - begin);
  const auto& first = data[std::size_t(order[begin])];
  const int h = first.field.rows, w = first.field.cols;
  const std::size_t hw = std::size_t(h) * w;
  buf.input.resize(b, 2, h, w);
  buf.target.resize(std::size_t(b) * hw);
  for (int i = 0; i < b; ++i) {
    const auto& s = data[std::size_t(order[begin + std::size_t(i)])];
    if (s.field.rows != h || s.field.cols != w)
      throw std::invalid_argument("train: samples must share one grid size");
    std::memcpy(buf.input.chan(i, 0), s.input.mask.data(), hw * sizeof(float));
    std::memcpy(buf.input.chan(i, 1), s.input.value.data(), hw * sizeof(float));
    for (std::size_t j = 0; j < hw; ++j)
      buf.target[std::size_t(i) * hw + j] = double(s.field.v[j]);
  }
}

// Computes the batch loss and writes d(loss)/d(activated output) into
// buf.d_out. All loss math runs in double.
double batch_loss_and_grad(TrainMethod method, const TrainConfig& cfg,
                           const nn::RawHeadOutput& out, BatchBuffers& buf) {
  const int b = out.channels.n, ch_count = out.channels.c;
  const std::size_t hw = std::size_t(out.channels.h) * out.channels.w;
  const std::size_t n = std::size_t(b) * hw;

  for (int c = 0; c < ch_count; ++c) {
    buf.ch[c].resize(n);
    buf.grad[c].assign(n, 0.0);
    for (int i = 0; i < b; ++i) {
      const float* src = out.channels.chan(i, c);
      for (std::size_t j = 0; j < hw; ++j)
        buf.ch[c][std::size_t(i) * hw + j] = double(src[j]);
    }
  }

  double loss;
  if (method == TrainMethod::Edl) {
    loss = edl_loss(buf.ch[0], buf.ch[1], buf.ch[2], buf.ch[3], buf.target, cfg.lambda,
                    buf.grad[0], buf.grad[1], buf.grad[2], buf.grad[3]);
  } else {
    loss = heteroscedastic_nll(buf.ch[0], buf.ch[1], buf.target, buf.grad[0], buf.grad[1]);
  }

  buf.d_out.resize(b, ch_count, out.channels.h, out.channels.w);
  for (int c = 0; c < ch_count; ++c) {
    for (int i = 0; i < b; ++i) {
      float* dst = buf.d_out.chan(i, c);
      for (std::size_t j = 0; j < hw; ++j)
        dst[j] = float(buf.grad[c][std::size_t(i) * hw + j]);
    }
  }
  return loss;
}

std::vector<EpochLogEntry> train_single(TrainMethod method,
                                        const std::vector<TrainSample>& dataset,
                                        const TrainConfig& cfg, nn::UNetBackbone& model,
                                        std::uint64_t seed) {
  model.init_weights(seed);
  nn::Adam opt(model.params(), cfg.learning_rate);
  Rng shuffle_rng(mix_seed(seed, 0x5bff1e));

  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  BatchBuffers buf;
  std::vector<EpochLogEntry> log;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = std::size_t(shuffle_rng.uniform_int(0, std::int64_t(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double loss_sum = 0.0;
    std::size_t cell_sum = 0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += std::size_t(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + std::size_t(cfg.batch_size));
      fill_batch(dataset, order, begin, end, buf);

      const std::uint64_t drop_key =
          mix_seed(seed, 0xd0b, std::uint64_t(epoch), batch_index);
      const auto out = model.forward(buf.input, /*train=*/true, /*stochastic=*/true, drop_key);
      double loss;
      try {
        loss = batch_loss_and_grad(method, cfg, out, buf);
      } catch (const NonFiniteLoss& e) {
        throw NonFiniteLoss(std::string(e.what()) + " (epoch " + std::to_string(epoch + 1) +
                            ", batch " + std::to_string(batch_index + 1) + ")");
      }
      model.zero_grad();
      model.backward(buf.d_out);
      opt.step(cfg.grad_clip_max_norm);

      const std::size_t cells = std::size_t(end - begin) * std::size_t(out.channels.h) *
                                std::size_t(out.channels.w);
      loss_sum += loss * double(cells);
      cell_sum += cells;
      ++batch_index;
    }
    const double epoch_loss = loss_sum / double(cell_sum);
    if (!std::isfinite(epoch_loss))
      throw NonFiniteLoss("epoch loss is non-finite at epoch " + std::to_string(epoch + 1));
    log.push_back({epoch + 1, "train", epoch_loss});
  }
  return log;
}

}  // namespace

TrainResult train(TrainMethod method, const std::vector<TrainSample>& dataset,
                  const TrainConfig& cfg, const nn::BackboneConfig& bb) {
  cfg.validate();
  bb.validate();
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  if (bb.head_kind != required_head(method))
    throw ConfigMismatch(std::string("train: method `") + train_method_name(method) +
                         "` requires a " + nn::head_kind_name(required_head(method)) +
                         " head");
  if (method == TrainMethod::Mcd && !(bb.dropout_rate > 0.0))
    throw ConfigMismatch("train: MC Dropout requires dropout_rate > 0");

  const int n_models = method == TrainMethod::Ensemble ? cfg.m_members : 1;
  TrainResult result;
  for (int m = 0; m < n_models; ++m) {
    auto model = std::make_unique<nn::UNetBackbone>(bb);
    result.logs.push_back(train_single(method, dataset, cfg, *model, cfg.seed + std::uint64_t(m)));
    result.models.push_back(std::move(model));
  }
  return result;
}

}  // namespace fieldbench::uq
