#pragma once

#include <filesystem>

#include "fieldbench/nn/backbone.hpp"

namespace fieldbench::nn {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Binary checkpoint: magic "UQCK", u32-LE format version, u32-LE tensor
/// count, then per tensor a u16-LE name length, the name bytes, u8 dtype
/// (0 = float32) and u64-LE element count followed by the raw little-endian
/// payload. Every named state tensor of the backbone is included (weights,
/// biases, batch-norm affine parameters and running statistics).
void save_checkpoint(const std::filesystem::path& path, UNetBackbone& model);

/// Fills an existing model (built from the sidecar's config) by tensor name.
/// Unknown names, missing names, or size mismatches raise CheckpointError.
void load_checkpoint(const std::filesystem::path& path, UNetBackbone& model);

}  // namespace fieldbench::nn
