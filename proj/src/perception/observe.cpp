#include "fieldbench/perception/observe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fieldbench/core/rng.hpp"

namespace fieldbench::perception {

void NoiseModel::validate() const {
  if (kind == Kind::Fixed) {
    if (sigma < 0.0) throw std::invalid_argument("NoiseModel: sigma must be >= 0");
  } else {
    if (sigma_min < 0.0 || sigma_min > sigma_max)
      throw std::invalid_argument("NoiseModel: need 0 <= sigma_min <= sigma_max");
  }
}

void ConeParams::validate() const {
  if (!(half_angle > 0.0) || half_angle >= M_PI / 2.0)
    throw std::invalid_argument("ConeParams: need 0 < half_angle < pi/2");
  if (max_range < 1.0) throw std::invalid_argument("ConeParams: max_range must be >= 1");
}

void NadirParams::validate() const {
  if (patch_side < 1) throw std::invalid_argument("NadirParams: patch_side must be >= 1");
  if (patch_side % 2 == 0)
    throw std::invalid_argument("NadirParams: patch_side must be odd (patch is centered)");
}

namespace {

int nearest(double v) { return int(std::lround(v)); }

// Noise draws are addressed by (pose, absolute cell) so that degenerate
// configurations coincide exactly: nadir with s=1 reproduces pointwise draws.
double noise_at(const CounterRng& rng, std::int64_t pose, std::int64_t cell_index) {
  return rng.normal_at(std::uint64_t(pose) * 0x100000001ull + std::uint64_t(cell_index));
}

double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

}  // namespace

ObservationSet observe_pointwise(const sim::Field& field, const sim::Trajectory& traj,
                                 const NoiseModel& noise, std::uint64_t seed) {
  noise.validate();
  if (noise.kind != NoiseModel::Kind::Fixed)
    throw std::invalid_argument("observe_pointwise requires a fixed noise model");
  const auto& grid = field.values;
  CounterRng rng(mix_seed(seed, 0x0b5));

  ObservationSet out;
  out.records.reserve(traj.poses.size());
  for (std::size_t i = 0; i < traj.poses.size(); ++i) {
    const int r = nearest(traj.poses[i].y);
    const int c = nearest(traj.poses[i].x);
    const std::int64_t cell = std::int64_t(r) * grid.cols + c;
    const double y = grid.at(r, c) + noise.sigma * noise_at(rng, std::int64_t(i), cell);
    out.records.push_back({r, c, y, noise.sigma, int(i)});
  }
  return out;
}

ObservationSet observe_conical(const sim::Field& field, const sim::Trajectory& traj,
                               const ConeParams& cone, const NoiseModel& noise,
                               std::uint64_t seed) {
  cone.validate();
  noise.validate();
  if (noise.kind != NoiseModel::Kind::DistanceLinear)
    throw std::invalid_argument("observe_conical requires a distance-linear noise model");
  const auto& grid = field.values;
  CounterRng rng(mix_seed(seed, 0x0b5));
  const double d_max = cone.max_range;
  const double sigma_span = noise.sigma_max - noise.sigma_min;

  ObservationSet out;
  for (std::size_t i = 0; i < traj.poses.size(); ++i) {
    const auto& p = traj.poses[i];
    const int r0 = std::max(0, int(std::ceil(p.y - d_max)));
    const int r1 = std::min(grid.rows - 1, int(std::floor(p.y + d_max)));
    const int c0 = std::max(0, int(std::ceil(p.x - d_max)));
    const int c1 = std::min(grid.cols - 1, int(std::floor(p.x + d_max)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double dx = c - p.x;
        const double dy = r - p.y;
        const double d = std::hypot(dx, dy);
        if (d > d_max) continue;
        if (d > 0.0 && std::fabs(wrap_angle(std::atan2(dy, dx) - p.heading)) > cone.half_angle)
          continue;
        const double sigma = noise.sigma_min + sigma_span * d / d_max;
        const std::int64_t cell = std::int64_t(r) * grid.cols + c;
        const double y = grid.at(r, c) + sigma * noise_at(rng, std::int64_t(i), cell);
        out.records.push_back({r, c, y, sigma, int(i)});
      }
    }
  }
  return out;
}

ObservationSet observe_nadir(const sim::Field& field, const sim::Trajectory& traj,
                             const NadirParams& nadir, const NoiseModel& noise,
                             std::uint64_t seed) {
  nadir.validate();
  noise.validate();
  if (noise.kind != NoiseModel::Kind::Fixed)
    throw std::invalid_argument("observe_nadir requires a fixed noise model");
  const auto& grid = field.values;
  CounterRng rng(mix_seed(seed, 0x0b5));
  const int half = (nadir.patch_side - 1) / 2;

  ObservationSet out;
  for (std::size_t i = 0; i < traj.poses.size(); ++i) {
    const int pr = nearest(traj.poses[i].y);
    const int pc = nearest(traj.poses[i].x);
    for (int dr = -half; dr <= half; ++dr) {
      for (int dc = -half; dc <= half; ++dc) {
        const int r = pr + dr;
        const int c = pc + dc;
        if (!grid.in_bounds(r, c)) continue;
        const std::int64_t cell = std::int64_t(r) * grid.cols + c;
        const double y = grid.at(r, c) + noise.sigma * noise_at(rng, std::int64_t(i), cell);
        out.records.push_back({r, c, y, noise.sigma, int(i)});
      }
    }
  }
  return out;
}

InputPair rasterize(const ObservationSet& obs, GridDims grid) {
  GridD sum(grid, 0.0);
  Grid2D<int> count(grid, 0);
  for (const auto& rec : obs.records) {
    if (rec.row < 0 || rec.row >= grid.rows || rec.col < 0 || rec.col >= grid.cols)
      throw std::out_of_range("rasterize: observation record outside the grid");
    sum.at(rec.row, rec.col) += rec.value;
    count.at(rec.row, rec.col) += 1;
  }
  InputPair out{GridF(grid, 0.0f), GridF(grid, 0.0f)};
  for (std::size_t i = 0; i < sum.size(); ++i) {
    if (count.v[i] > 0) {
      out.mask.v[i] = 1.0f;
      out.value.v[i] = float(sum.v[i] / count.v[i]);
    }
  }
  return out;
}

std::vector<double> per_pose_means(const ObservationSet& obs, int n_poses) {
  std::vector<double> sum(std::size_t(n_poses), 0.0);
  std::vector<int> count(std::size_t(n_poses), 0);
  for (const auto& rec : obs.records) {
    sum[std::size_t(rec.pose_index)] += rec.value;
    count[std::size_t(rec.pose_index)] += 1;
  }
  std::vector<double> mean(std::size_t(n_poses),
                           std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < n_poses; ++i)
    if (count[std::size_t(i)] > 0) mean[std::size_t(i)] = sum[std::size_t(i)] / count[std::size_t(i)];
  return mean;
}

}  // namespace fieldbench::perception
