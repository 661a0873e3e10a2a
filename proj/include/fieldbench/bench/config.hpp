#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "fieldbench/gp/gp.hpp"
#include "fieldbench/metrics/metrics.hpp"
#include "fieldbench/nn/backbone.hpp"
#include "fieldbench/perception/observe.hpp"
#include "fieldbench/sim/spill.hpp"
#include "fieldbench/sim/trajectory.hpp"
#include "fieldbench/uq/train.hpp"

namespace fieldbench::bench {

inline constexpr int kSchemaVersion = 1;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class PerceptualModel { Pointwise, Conic, Nadir };
const char* perceptual_model_name(PerceptualModel m);
std::optional<PerceptualModel> perceptual_model_from_name(const std::string& name);

enum class EvalMethod { Edl, Ensemble, Mcd, Gp };
const char* eval_method_name(EvalMethod m);
std::optional<EvalMethod> eval_method_from_name(const std::string& name);

enum class Profile { Desk, Full };
std::optional<Profile> profile_from_name(const std::string& name);

struct DatasetConfig {
  PerceptualModel model = PerceptualModel::Pointwise;
  int n_samples = 2000;
  double train_fraction = 0.8;
  std::uint64_t root_seed = 0;
  sim::SimParams sim;
  bool randomize_wind_direction = true;
  sim::TrajectoryParams trajectory;
  perception::NoiseModel noise;
  perception::ConeParams cone;
  perception::NadirParams nadir;
  std::filesystem::path output_dir;

  void validate() const;
};

struct TrainRunConfig {
  uq::TrainMethod method = uq::TrainMethod::Edl;
  std::filesystem::path dataset_path;
  std::filesystem::path output_dir;
  uq::TrainConfig train;
  nn::BackboneConfig backbone;

  void validate() const;
};

struct EvalRunConfig {
  EvalMethod method = EvalMethod::Gp;
  std::filesystem::path dataset_path;
  std::filesystem::path checkpoint_dir;  // deep methods only
  std::filesystem::path output_dir;
  int eval_bins = 10;
  metrics::UceNormalization uce_normalize = metrics::UceNormalization::Variance;
  int t_passes = 30;
  std::uint64_t seed = 0;
  bool emit_plots = true;
  gp::GPFitOptions gp;

  void validate() const;
};

/// Strict JSON loaders: unknown keys are configuration errors.
DatasetConfig parse_dataset_config(const std::filesystem::path& path);
TrainRunConfig parse_train_config(const std::filesystem::path& path);
EvalRunConfig parse_eval_config(const std::filesystem::path& path);

/// Built-in presets. `desk` is the laptop-scale profile the acceptance suite
/// runs (64x64 grid, 300/60 samples, 15 epochs, encoder 16..128, bottleneck
/// 256); `full` mirrors the reference experimental protocol (100x100 grid,
/// 2000 samples, 50 epochs, encoder 32..512, bottleneck 1024).
DatasetConfig profile_dataset_config(Profile profile, PerceptualModel model,
                                     std::uint64_t root_seed);
TrainRunConfig profile_train_config(Profile profile, uq::TrainMethod method,
                                    std::uint64_t seed);
EvalRunConfig profile_eval_config(Profile profile, EvalMethod method, std::uint64_t seed);

}  // namespace fieldbench::bench
