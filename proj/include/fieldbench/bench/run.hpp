#pragma once

#include <filesystem>
#include <vector>

#include "fieldbench/bench/config.hpp"
#include "fieldbench/bench/dataset.hpp"
#include "fieldbench/metrics/metrics.hpp"

namespace fieldbench::bench {

struct RunError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainRunResult {
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path log_csv;
};

/// Trains per the config and writes checkpoint(s), JSON sidecar(s) and the
/// per-epoch CSV log into output_dir. Ensemble members train independently
/// (parallel across `jobs`); member m uses seed cfg.train.seed + m.
TrainRunResult run_training(const TrainRunConfig& cfg, int jobs);

/// Checkpoint sidecar contents needed to reconstruct a model for inference.
struct Sidecar {
  int schema_version = kSchemaVersion;
  std::string method;
  int member_index = 0;
  nn::BackboneConfig backbone;
  uq::TrainConfig train;
};

void write_sidecar(const std::filesystem::path& path, const Sidecar& s);
Sidecar read_sidecar(const std::filesystem::path& path);

struct EvalOutputs {
  std::filesystem::path results_csv;
  std::filesystem::path summary_json;
  std::filesystem::path curves_json;
  std::vector<std::filesystem::path> plots;
  std::vector<metrics::EvalRecord> records;
};

/// Evaluates one method on the dataset's test split: per-sample RMSE, UCE,
/// calibration curve and wall-clock inference time (model passes or GP
/// fit+predict; file I/O excluded). Writes results.csv, summary.json,
/// curves.json and (optionally) a calibration plot.
EvalOutputs run_evaluation(const EvalRunConfig& cfg, int jobs);

}  // namespace fieldbench::bench
