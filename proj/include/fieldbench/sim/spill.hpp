#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>

#include "fieldbench/core/grid.hpp"

namespace fieldbench::sim {

/// Particle advection-diffusion simulator configuration. Particles start
/// uniformly in a disc of spill_radius around the spill center, drift by
/// wind_velocity * tidal_speed per step with an isotropic Gaussian
/// perturbation of scale diffusion_sigma, and are finally deposited on the
/// grid with a Gaussian kernel of bandwidth deposition_bandwidth.
struct SimParams {
  int grid_height = 100;
  int grid_width = 100;
  int n_particles = 2000;
  double spill_radius = 5.0;                      // cells
  std::array<double, 2> wind_velocity = {0.25, 0.0};  // cells/step, (dx, dy)
  double tidal_speed = 1.0;                       // dimensionless multiplier
  double diffusion_sigma = 0.8;                   // cells/step^(1/2)
  int n_steps = 60;
  double deposition_bandwidth = 1.5;              // cells
  /// Fixed spill center (col, row). Unset means drawn uniformly per seed.
  std::optional<std::array<double, 2>> spill_center;

  void validate() const;
};

struct Field {
  GridD values;            // in [0,1], max == 1
  std::uint64_t params_hash = 0;
};

struct DegenerateField : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Deterministic per (params, seed). Throws DegenerateField when no particle
/// mass lands inside the domain; callers resample with a fresh seed.
Field generate_field(const SimParams& params, std::uint64_t seed);

std::uint64_t hash_params(const SimParams& params, std::uint64_t seed);

}  // namespace fieldbench::sim
