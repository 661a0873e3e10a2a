#pragma once

#include <filesystem>
#include <vector>

#include "fieldbench/bench/config.hpp"

namespace fieldbench::bench {

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetManifest {
  int schema_version = kSchemaVersion;
  DatasetConfig config;
  std::vector<int> train_ids;
  std::vector<int> test_ids;
};

/// Writes manifest.json plus sample_%05d/{field,mask,value}.uf2d under
/// out_dir. Fully deterministic from the config's root_seed; sample
/// generation parallelizes across `jobs` threads without changing bytes.
DatasetManifest generate_dataset(const DatasetConfig& config,
                                 const std::filesystem::path& out_dir, int jobs);

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir);
void write_manifest(const std::filesystem::path& dataset_dir, const DatasetManifest& m);

struct LoadedSample {
  int id = 0;
  GridF field;
  GridF mask;
  GridF value;
};

LoadedSample load_sample(const std::filesystem::path& dataset_dir, int id);

std::filesystem::path sample_dir(const std::filesystem::path& dataset_dir, int id);

}  // namespace fieldbench::bench
