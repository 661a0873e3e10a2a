#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fieldbench/nn/backbone.hpp"
#include "fieldbench/perception/observe.hpp"

namespace fieldbench::uq {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 16;
  double learning_rate = 3e-4;
  std::optional<double> grad_clip_max_norm;  // 1.0 for evidential training
  double lambda = 1e-3;                      // evidence regularizer weight
  int t_passes = 30;                         // MC Dropout inference passes
  int m_members = 5;                         // ensemble size
  std::uint64_t seed = 0;

  void validate() const;
};

enum class TrainMethod { Mcd, Ensemble, Edl };

const char* train_method_name(TrainMethod m);
std::optional<TrainMethod> train_method_from_name(const std::string& name);

/// In-memory training sample: rasterized observations and the dense target.
struct TrainSample {
  perception::InputPair input;
  GridF field;
};

struct EpochLogEntry {
  int epoch = 0;
  std::string split = "train";
  double loss = 0.0;
};

struct ConfigMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct TrainResult {
  std::vector<std::unique_ptr<nn::UNetBackbone>> models;  // m_members for Ensemble, else 1
  std::vector<std::vector<EpochLogEntry>> logs;           // parallel to models
};

/// Required head for each method (heteroscedastic for MCD/ensemble,
/// evidential for EDL).
nn::HeadKind required_head(TrainMethod method);

/// Fixed-budget supervised training against the full ground-truth field.
/// Ensemble members differ only by seed (seed + m for member m); MCD
/// requires a positive dropout rate. Deterministic for fixed inputs.
TrainResult train(TrainMethod method, const std::vector<TrainSample>& dataset,
                  const TrainConfig& cfg, const nn::BackboneConfig& bb);

}  // namespace fieldbench::uq
