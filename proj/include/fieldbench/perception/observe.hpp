#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fieldbench/core/grid.hpp"
#include "fieldbench/sim/spill.hpp"
#include "fieldbench/sim/trajectory.hpp"

namespace fieldbench::perception {

struct NoiseModel {
  enum class Kind { Fixed, DistanceLinear };
  Kind kind = Kind::Fixed;
  double sigma = 0.1;       // Fixed
  double sigma_min = 0.01;  // DistanceLinear
  double sigma_max = 0.08;

  void validate() const;
  static NoiseModel fixed(double s) { return {Kind::Fixed, s, 0.0, 0.0}; }
  static NoiseModel distance_linear(double lo, double hi) {
    return {Kind::DistanceLinear, 0.0, lo, hi};
  }
};

struct ConeParams {
  double half_angle = 30.0 * M_PI / 180.0;  // radians
  double max_range = 20.0;                  // cells

  void validate() const;
};

struct NadirParams {
  int patch_side = 5;      // odd, patch centered on the vehicle
  double altitude = 10.0;  // meters, metadata only

  void validate() const;
};

struct ObservationRecord {
  int row = 0;
  int col = 0;
  double value = 0.0;
  double noise_sigma = 0.0;
  int pose_index = 0;
};

struct ObservationSet {
  std::vector<ObservationRecord> records;
};

/// Two-channel network input: binary observation mask M and value raster V
/// (mean of all records per cell; zero where unobserved).
struct InputPair {
  GridF mask;
  GridF value;
};

/// One record per pose: the field value at the pose's nearest cell plus
/// N(0, sigma^2) noise. Requires a fixed-sigma noise model.
ObservationSet observe_pointwise(const sim::Field& field, const sim::Trajectory& traj,
                                 const NoiseModel& noise, std::uint64_t seed);

/// One record per (pose, footprint cell). The footprint is every cell within
/// max_range of the pose whose bearing deviates from the pose heading by at
/// most half_angle; the pose's own cell (distance 0) belongs to it. Noise is
/// distance-linear: sigma(d) = sigma_min + (sigma_max - sigma_min) * d/d_max.
/// Poses facing out of the domain simply contribute no records.
ObservationSet observe_conical(const sim::Field& field, const sim::Trajectory& traj,
                               const ConeParams& cone, const NoiseModel& noise,
                               std::uint64_t seed);

/// Per pose, one record per cell of the patch_side x patch_side block
/// centered on the pose's cell; out-of-grid cells are dropped. Fixed sigma.
ObservationSet observe_nadir(const sim::Field& field, const sim::Trajectory& traj,
                             const NadirParams& nadir, const NoiseModel& noise,
                             std::uint64_t seed);

/// M(x) = 1 where at least one record lands on x; V(x) = arithmetic mean of
/// the record values at x, 0 elsewhere.
InputPair rasterize(const ObservationSet& obs, GridDims grid);

/// Per-pose mean of record values, the cone-integrated scalar reading.
/// Entries are NaN for poses that produced no records.
std::vector<double> per_pose_means(const ObservationSet& obs, int n_poses);

}  // namespace fieldbench::perception
