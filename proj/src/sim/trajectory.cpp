#include "fieldbench/sim/trajectory.hpp"

#include <cmath>

#include "fieldbench/core/rng.hpp"

namespace fieldbench::sim {

void TrajectoryParams::validate() const {
  if (min_steps < 1 || min_steps > max_steps)
    throw std::invalid_argument("TrajectoryParams: need 1 <= min_steps <= max_steps");
  if (!(max_turn_rate >= 0.0) || max_turn_rate > M_PI)
    throw std::invalid_argument("TrajectoryParams: need 0 <= max_turn_rate <= pi");
  if (!(step_length > 0.0))
    throw std::invalid_argument("TrajectoryParams: step_length must be > 0");
}

namespace {

// Specular fold into [0, hi]; handles displacements larger than the span.
double fold(double v, double hi) {
  if (hi <= 0.0) return 0.0;
  while (v < 0.0 || v > hi) {
    if (v < 0.0) v = -v;
    if (v > hi) v = 2.0 * hi - v;
  }
  return v;
}

}  // namespace

Trajectory generate_trajectory(const TrajectoryParams& params, GridDims grid,
                               std::uint64_t seed) {
  params.validate();
  if (grid.rows < 2 || grid.cols < 2)
    throw std::invalid_argument("generate_trajectory: grid too small");

  Rng rng(mix_seed(seed, 0x7a11));
  const int n_poses = int(rng.uniform_int(params.min_steps, params.max_steps));
  const double max_x = double(grid.cols - 1);
  const double max_y = double(grid.rows - 1);

  Trajectory traj;
  traj.poses.reserve(std::size_t(n_poses));

  Pose p;
  p.x = rng.uniform(0.0, max_x);
  p.y = rng.uniform(0.0, max_y);
  p.heading = rng.uniform(-M_PI, M_PI);
  traj.poses.push_back(p);

  for (int i = 1; i < n_poses; ++i) {
    p.heading += rng.uniform(-params.max_turn_rate, params.max_turn_rate);
    p.x = fold(p.x + params.step_length * std::cos(p.heading), max_x);
    p.y = fold(p.y + params.step_length * std::sin(p.heading), max_y);
    traj.poses.push_back(p);
  }
  return traj;
}

}  // namespace fieldbench::sim
