#include "fieldbench/sim/spill.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "fieldbench/core/rng.hpp"

namespace fieldbench::sim {

void SimParams::validate() const {
  if (grid_height < 8 || grid_width < 8)
    throw std::invalid_argument("SimParams: grid must be at least 8x8");
  if (n_particles < 1) throw std::invalid_argument("SimParams: n_particles must be >= 1");
  if (n_steps < 1) throw std::invalid_argument("SimParams: n_steps must be >= 1");
  if (!(diffusion_sigma > 0.0))
    throw std::invalid_argument("SimParams: diffusion_sigma must be > 0");
  if (!(deposition_bandwidth > 0.0))
    throw std::invalid_argument("SimParams: deposition_bandwidth must be > 0");
  if (spill_radius < 0.0) throw std::invalid_argument("SimParams: spill_radius must be >= 0");
}

std::uint64_t hash_params(const SimParams& p, std::uint64_t seed) {
  auto mix_double = [](std::uint64_t h, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    return splitmix64(h ^ bits);
  };
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ std::uint64_t(p.grid_height));
  h = splitmix64(h ^ std::uint64_t(p.grid_width));
  h = splitmix64(h ^ std::uint64_t(p.n_particles));
  h = splitmix64(h ^ std::uint64_t(p.n_steps));
  h = mix_double(h, p.spill_radius);
  h = mix_double(h, p.wind_velocity[0]);
  h = mix_double(h, p.wind_velocity[1]);
  h = mix_double(h, p.tidal_speed);
  h = mix_double(h, p.diffusion_sigma);
  h = mix_double(h, p.deposition_bandwidth);
  if (p.spill_center) {
    h = mix_double(h, (*p.spill_center)[0]);
    h = mix_double(h, (*p.spill_center)[1]);
  }
  return h;
}

Field generate_field(const SimParams& params, std::uint64_t seed) {
  params.validate();
  const int H = params.grid_height;
  const int W = params.grid_width;
  Rng rng(mix_seed(seed, 0x5f1e1d));

  double cx, cy;
  if (params.spill_center) {
    cx = (*params.spill_center)[0];
    cy = (*params.spill_center)[1];
  } else {
    cx = rng.uniform(0.0, double(W - 1));
    cy = rng.uniform(0.0, double(H - 1));
  }

  // Uniform disc init: radius R*sqrt(u) gives uniform area density.
  std::vector<double> px(params.n_particles), py(params.n_particles);
  for (int i = 0; i < params.n_particles; ++i) {
    const double r = params.spill_radius * std::sqrt(rng.uniform());
    const double a = rng.uniform(0.0, 2.0 * M_PI);
    px[i] = cx + r * std::cos(a);
    py[i] = cy + r * std::sin(a);
  }

  const double drift_x = params.wind_velocity[0] * params.tidal_speed;
  const double drift_y = params.wind_velocity[1] * params.tidal_speed;
  for (int step = 0; step < params.n_steps; ++step) {
    for (int i = 0; i < params.n_particles; ++i) {
      px[i] += drift_x + params.diffusion_sigma * rng.normal();
      py[i] += drift_y + params.diffusion_sigma * rng.normal();
    }
  }

  // Gaussian deposition, truncated at 3.5 bandwidths.
  const double h = params.deposition_bandwidth;
  const double cutoff = 3.5 * h;
  const double inv2h2 = 1.0 / (2.0 * h * h);
  GridD field(H, W, 0.0);
  for (int i = 0; i < params.n_particles; ++i) {
    if (px[i] < -cutoff || px[i] > W - 1 + cutoff || py[i] < -cutoff || py[i] > H - 1 + cutoff)
      continue;
    const int r0 = std::max(0, int(std::ceil(py[i] - cutoff)));
    const int r1 = std::min(H - 1, int(std::floor(py[i] + cutoff)));
    const int c0 = std::max(0, int(std::ceil(px[i] - cutoff)));
    const int c1 = std::min(W - 1, int(std::floor(px[i] + cutoff)));
    for (int r = r0; r <= r1; ++r) {
      const double dy = r - py[i];
      for (int c = c0; c <= c1; ++c) {
        const double dx = c - px[i];
        const double d2 = dx * dx + dy * dy;
        if (d2 <= cutoff * cutoff) field.at(r, c) += std::exp(-d2 * inv2h2);
      }
    }
  }

  double mx = 0.0, mn = std::numeric_limits<double>::infinity();
  for (double v : field.v) {
    mx = std::max(mx, v);
    mn = std::min(mn, v);
  }
  if (!(mx > 0.0) || mn == mx)
    throw DegenerateField("all particle mass left the domain; resample with a new seed");
  for (double& v : field.v) v /= mx;

  return Field{std::move(field), hash_params(params, seed)};
}

}  // namespace fieldbench::sim
