#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fieldbench/core/grid.hpp"

namespace fieldbench::sim {

struct TrajectoryParams {
  int min_steps = 50;
  int max_steps = 200;
  double max_turn_rate = 0.35;  // radians/step
  double step_length = 1.0;     // cells/step

  void validate() const;
};

struct Pose {
  double x = 0.0;      // continuous column coordinate in [0, W-1]
  double y = 0.0;      // continuous row coordinate in [0, H-1]
  double heading = 0.0;  // radians, accumulated (not wrapped)
};

struct Trajectory {
  std::vector<Pose> poses;
};

/// Heading random walk: per step the heading picks up a uniform increment in
/// [-max_turn_rate, +max_turn_rate] and the position advances by step_length
/// along it. Positions are folded back into the grid by specular reflection;
/// the stored heading accumulates only the commanded increments, so the
/// per-step heading delta is bounded by max_turn_rate at reflections too.
Trajectory generate_trajectory(const TrajectoryParams& params, GridDims grid,
                               std::uint64_t seed);

}  // namespace fieldbench::sim
