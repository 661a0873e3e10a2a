#include <doctest.h>

#include <cmath>

#include "fieldbench/sim/spill.hpp"
#include "fieldbench/sim/trajectory.hpp"

using namespace fieldbench;
using namespace fieldbench::sim;

namespace {

SimParams small_params() {
  SimParams p;
  p.grid_height = 40;
  p.grid_width = 40;
  p.n_particles = 400;
  p.n_steps = 20;
  p.wind_velocity = {0.2, 0.1};
  return p;
}

}  // namespace

TEST_CASE("generate_field is deterministic per (params, seed)") {
  const SimParams p = small_params();
  const Field a = generate_field(p, 123);
  const Field b = generate_field(p, 123);
  CHECK(a.values.v == b.values.v);
  CHECK(a.params_hash == b.params_hash);
  const Field c = generate_field(p, 124);
  CHECK(a.values.v != c.values.v);
}

TEST_CASE("generated fields are normalized to [0,1] with max exactly 1") {
  const SimParams p = small_params();
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const Field f = generate_field(p, seed);
    double mx = 0.0;
    for (double v : f.values.v) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      mx = std::max(mx, v);
    }
    CHECK(mx == 1.0);
  }
}

TEST_CASE("single becalmed particle peaks at the spill center cell") {
  // Oracle: with one particle pinned (tiny radius and diffusion) at the grid
  // center and no wind, brute-force evaluation of the deposition kernel puts
  // the argmax at the center cell.
  SimParams p;
  p.grid_height = 33;
  p.grid_width = 33;
  p.n_particles = 1;
  p.n_steps = 1;
  p.wind_velocity = {0.0, 0.0};
  p.spill_radius = 1e-9;
  p.diffusion_sigma = 1e-9;
  p.spill_center = {{16.0, 16.0}};
  const Field f = generate_field(p, 7);

  std::size_t argmax = 0;
  for (std::size_t i = 1; i < f.values.size(); ++i)
    if (f.values.v[i] > f.values.v[argmax]) argmax = i;
  CHECK(argmax == std::size_t(16 * 33 + 16));
  CHECK(f.values.at(16, 16) == 1.0);
}

TEST_CASE("mass stays local with zero wind and one step") {
  SimParams p;
  p.grid_height = 64;
  p.grid_width = 64;
  p.n_particles = 2000;
  p.n_steps = 1;
  p.wind_velocity = {0.0, 0.0};
  p.spill_radius = 5.0;
  p.spill_center = {{32.0, 32.0}};
  const Field f = generate_field(p, 11);

  const double capture_radius = p.spill_radius + 3.0 * p.deposition_bandwidth;
  double inside = 0.0, total = 0.0;
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 64; ++c) {
      const double d = std::hypot(r - 32.0, c - 32.0);
      total += f.values.at(r, c);
      if (d <= capture_radius) inside += f.values.at(r, c);
    }
  }
  CHECK(inside / total >= 0.99);
}

TEST_CASE("degenerate fields are rejected") {
  SimParams p = small_params();
  p.spill_center = {{-2000.0, -2000.0}};  // all mass far outside the grid
  p.wind_velocity = {0.0, 0.0};
  CHECK_THROWS_AS(generate_field(p, 5), DegenerateField);
}

TEST_CASE("sim params invariants are enforced") {
  SimParams p;
  p.grid_height = 4;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = SimParams{};
  p.n_particles = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = SimParams{};
  p.diffusion_sigma = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = SimParams{};
  p.deposition_bandwidth = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("trajectories satisfy length, containment and turn-rate bounds") {
  TrajectoryParams tp;
  const GridDims grid{64, 64};
  int len_min = 1 << 30, len_max = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const Trajectory t = generate_trajectory(tp, grid, seed);
    const int n = int(t.poses.size());
    len_min = std::min(len_min, n);
    len_max = std::max(len_max, n);
    REQUIRE(n >= tp.min_steps);
    REQUIRE(n <= tp.max_steps);
    for (int i = 0; i < n; ++i) {
      const auto& p = t.poses[std::size_t(i)];
      REQUIRE(p.x >= 0.0);
      REQUIRE(p.x <= 63.0);
      REQUIRE(p.y >= 0.0);
      REQUIRE(p.y <= 63.0);
      if (i > 0)
        REQUIRE(std::fabs(p.heading - t.poses[std::size_t(i - 1)].heading) <=
                tp.max_turn_rate + 1e-12);
    }
  }
  // the random lengths should sweep most of the allowed range
  CHECK(len_min < 60);
  CHECK(len_max > 190);
}

TEST_CASE("zero turn rate gives a constant heading") {
  TrajectoryParams tp;
  tp.max_turn_rate = 0.0;
  const Trajectory t = generate_trajectory(tp, {32, 32}, 9);
  for (const auto& p : t.poses) CHECK(p.heading == t.poses[0].heading);
}

TEST_CASE("trajectory generation is deterministic per seed") {
  TrajectoryParams tp;
  const Trajectory a = generate_trajectory(tp, {64, 64}, 77);
  const Trajectory b = generate_trajectory(tp, {64, 64}, 77);
  REQUIRE(a.poses.size() == b.poses.size());
  for (std::size_t i = 0; i < a.poses.size(); ++i) {
    CHECK(a.poses[i].x == b.poses[i].x);
    CHECK(a.poses[i].y == b.poses[i].y);
    CHECK(a.poses[i].heading == b.poses[i].heading);
  }
}
