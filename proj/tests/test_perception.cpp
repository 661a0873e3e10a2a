#include <doctest.h>

#include <cmath>
#include <set>

#include "fieldbench/core/rng.hpp"
#include "fieldbench/perception/observe.hpp"

using namespace fieldbench;
using namespace fieldbench::perception;

namespace {

sim::Field constant_field(int h, int w, double value) {
  sim::Field f;
  f.values = GridD(h, w, value);
  return f;
}

sim::Field ramp_field(int h, int w) {
  sim::Field f;
  f.values = GridD(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) f.values.at(r, c) = double(r * w + c) / double(h * w);
  return f;
}

sim::Trajectory single_pose(double x, double y, double heading) {
  sim::Trajectory t;
  t.poses.push_back({x, y, heading});
  return t;
}

}  // namespace

TEST_CASE("pointwise: one record per pose, zero noise reads the field") {
  const auto field = ramp_field(16, 16);
  sim::Trajectory traj;
  for (int i = 0; i < 50; ++i) traj.poses.push_back({double(i % 16), double(i / 16), 0.0});

  const auto obs = observe_pointwise(field, traj, NoiseModel::fixed(0.0), 1);
  REQUIRE(obs.records.size() == 50);
  for (const auto& rec : obs.records)
    CHECK(rec.value == field.values.at(rec.row, rec.col));
}

TEST_CASE("pointwise: noise std matches sigma on a constant field") {
  const auto field = constant_field(64, 64, 0.5);
  sim::Trajectory traj;
  Rng rng(4);
  const int n = 100000;
  for (int i = 0; i < n; ++i)
    traj.poses.push_back({rng.uniform(0.0, 63.0), rng.uniform(0.0, 63.0), 0.0});

  const auto obs = observe_pointwise(field, traj, NoiseModel::fixed(0.1), 2);
  REQUIRE(obs.records.size() == std::size_t(n));
  double sum = 0.0, sq = 0.0;
  for (const auto& rec : obs.records) {
    const double e = rec.value - 0.5;
    sum += e;
    sq += e * e;
  }
  const double mean = sum / n;
  const double std_dev = std::sqrt(sq / n - mean * mean);
  CHECK(std_dev == doctest::Approx(0.1).epsilon(0.03));
  CHECK(std::fabs(std_dev - 0.1) < 0.003);
}

TEST_CASE("conical: footprint matches brute-force enumeration") {
  const auto field = ramp_field(64, 64);
  ConeParams cone;  // 30 degrees, range 20
  const auto traj = single_pose(32.0, 32.0, 0.0);
  const auto obs =
      observe_conical(field, traj, cone, NoiseModel::distance_linear(0.0, 0.0), 3);

  // independent enumeration over all cells
  std::set<std::pair<int, int>> expected;
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 64; ++c) {
      const double dx = c - 32.0, dy = r - 32.0;
      const double d = std::hypot(dx, dy);
      if (d > cone.max_range) continue;
      if (d > 0.0) {
        double a = std::atan2(dy, dx) - 0.0;
        while (a > M_PI) a -= 2.0 * M_PI;
        while (a < -M_PI) a += 2.0 * M_PI;
        if (std::fabs(a) > cone.half_angle) continue;
      }
      expected.insert({r, c});
    }
  }
  std::set<std::pair<int, int>> got;
  for (const auto& rec : obs.records) got.insert({rec.row, rec.col});
  CHECK(got == expected);
  CHECK(obs.records.size() == expected.size());
}

TEST_CASE("conical: zero-noise constant field reads exactly c; sigma law is linear") {
  const auto field = constant_field(64, 64, 0.37);
  ConeParams cone;
  const auto traj = single_pose(30.0, 31.0, 0.7);
  const auto zero =
      observe_conical(field, traj, cone, NoiseModel::distance_linear(0.0, 0.0), 5);
  REQUIRE(!zero.records.empty());
  for (const auto& rec : zero.records) CHECK(rec.value == 0.37);

  const auto noisy =
      observe_conical(field, traj, cone, NoiseModel::distance_linear(0.01, 0.08), 5);
  for (const auto& rec : noisy.records) {
    const double d = std::hypot(rec.col - 30.0, rec.row - 31.0);
    const double expected = 0.01 + (0.08 - 0.01) * d / cone.max_range;
    CHECK(rec.noise_sigma == doctest::Approx(expected).epsilon(1e-12));
    CHECK(rec.noise_sigma <= 0.08 + 1e-12);
    CHECK(rec.noise_sigma >= 0.01 - 1e-12);
  }
}

TEST_CASE("conical: record at full range carries sigma_max") {
  // place the pose so one footprint cell lies exactly at distance d_max
  const auto field = constant_field(64, 64, 0.0);
  ConeParams cone;
  const auto traj = single_pose(10.0, 32.0, 0.0);  // facing +x; (32, 30) is 20 cells away
  const auto obs =
      observe_conical(field, traj, cone, NoiseModel::distance_linear(0.01, 0.08), 6);
  bool found = false;
  for (const auto& rec : obs.records) {
    if (rec.row == 32 && rec.col == 30) {
      CHECK(rec.noise_sigma == doctest::Approx(0.08).epsilon(1e-12));
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("conical: pose facing out of the domain contributes nothing") {
  const auto field = constant_field(32, 32, 0.5);
  ConeParams cone;
  cone.max_range = 10.0;
  // at the left edge, facing -x: the whole cone is out of the grid except the apex
  const auto traj = single_pose(0.0, 16.0, M_PI);
  const auto obs =
      observe_conical(field, traj, cone, NoiseModel::distance_linear(0.0, 0.0), 7);
  // only the apex cell (distance 0) can remain
  for (const auto& rec : obs.records) {
    CHECK(rec.row == 16);
    CHECK(rec.col == 0);
  }
}

TEST_CASE("nadir: interior pose yields s^2 records, corner pose only in-bounds ones") {
  const auto field = ramp_field(32, 32);
  NadirParams nadir;  // s = 5
  const auto obs_interior = observe_nadir(field, single_pose(16.0, 16.0, 0.0), nadir,
                                          NoiseModel::fixed(0.0), 8);
  CHECK(obs_interior.records.size() == 25);

  const auto obs_corner =
      observe_nadir(field, single_pose(0.0, 0.0, 0.0), nadir, NoiseModel::fixed(0.0), 8);
  CHECK(obs_corner.records.size() == 9);  // 3x3 quadrant of the 5x5 patch
  for (const auto& rec : obs_corner.records) {
    CHECK(rec.row >= 0);
    CHECK(rec.row <= 2);
    CHECK(rec.col >= 0);
    CHECK(rec.col <= 2);
  }
}

TEST_CASE("nadir with s=1 equals pointwise under the same seed") {
  const auto field = ramp_field(24, 24);
  sim::Trajectory traj;
  Rng rng(5);
  for (int i = 0; i < 40; ++i)
    traj.poses.push_back({rng.uniform(0.0, 23.0), rng.uniform(0.0, 23.0), 0.0});
  NadirParams nadir;
  nadir.patch_side = 1;
  const auto noise = NoiseModel::fixed(0.1);
  const auto a = observe_nadir(field, traj, nadir, noise, 99);
  const auto b = observe_pointwise(field, traj, noise, 99);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].row == b.records[i].row);
    CHECK(a.records[i].col == b.records[i].col);
    CHECK(a.records[i].value == b.records[i].value);
  }
}

TEST_CASE("nadir rejects even patch sides") {
  NadirParams nadir;
  nadir.patch_side = 4;
  CHECK_THROWS_AS(nadir.validate(), std::invalid_argument);
}

TEST_CASE("rasterize: empty set, mean aggregation, mask counting") {
  const GridDims dims{8, 8};
  SUBCASE("empty observation set") {
    const auto pair = rasterize(ObservationSet{}, dims);
    for (float m : pair.mask.v) CHECK(m == 0.0f);
    for (float v : pair.value.v) CHECK(v == 0.0f);
  }
  SUBCASE("two records on one cell average") {
    ObservationSet obs;
    obs.records.push_back({3, 4, 0.2, 0.0, 0});
    obs.records.push_back({3, 4, 0.4, 0.0, 1});
    const auto pair = rasterize(obs, dims);
    CHECK(pair.value.at(3, 4) == doctest::Approx(0.3).epsilon(1e-7));
    CHECK(pair.mask.at(3, 4) == 1.0f);
  }
  SUBCASE("mask sum equals distinct observed cells") {
    ObservationSet obs;
    Rng rng(3);
    std::set<std::pair<int, int>> distinct;
    for (int i = 0; i < 200; ++i) {
      const int r = int(rng.uniform_int(0, 7)), c = int(rng.uniform_int(0, 7));
      obs.records.push_back({r, c, rng.uniform(), 0.0, i});
      distinct.insert({r, c});
    }
    const auto pair = rasterize(obs, dims);
    double mask_sum = 0.0;
    for (float m : pair.mask.v) mask_sum += m;
    CHECK(mask_sum == double(distinct.size()));
  }
  SUBCASE("out-of-bounds records are rejected") {
    ObservationSet obs;
    obs.records.push_back({8, 0, 0.1, 0.0, 0});
    CHECK_THROWS_AS(rasterize(obs, dims), std::out_of_range);
  }
}

TEST_CASE("masking consistency V (1-M) = 0 on random observation sets") {
  const GridDims dims{16, 16};
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    ObservationSet obs;
    const int n = int(rng.uniform_int(0, 60));
    for (int i = 0; i < n; ++i)
      obs.records.push_back({int(rng.uniform_int(0, 15)), int(rng.uniform_int(0, 15)),
                             rng.uniform(-1.0, 1.0), 0.0, i});
    const auto pair = rasterize(obs, dims);
    for (std::size_t i = 0; i < pair.mask.size(); ++i)
      if (pair.mask.v[i] == 0.0f) CHECK(pair.value.v[i] == 0.0f);
  }
}

TEST_CASE("per-pose means recover the cone average") {
  const auto field = ramp_field(32, 32);
  ConeParams cone;
  const auto traj = single_pose(16.0, 16.0, 1.1);
  const auto obs =
      observe_conical(field, traj, cone, NoiseModel::distance_linear(0.0, 0.0), 12);
  const auto means = per_pose_means(obs, 1);
  REQUIRE(means.size() == 1);
  double acc = 0.0;
  for (const auto& rec : obs.records) acc += field.values.at(rec.row, rec.col);
  CHECK(means[0] == doctest::Approx(acc / double(obs.records.size())).epsilon(1e-12));
}
