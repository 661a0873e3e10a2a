#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fieldbench/core/grid.hpp"

namespace fieldbench::metrics {

struct CalibrationCurve {
  std::vector<double> bin_edges;     // B+1 edges spanning [0,1]
  std::vector<double> mean_pred_unc; // per-bin mean normalized uncertainty (0 if empty)
  std::vector<double> mean_emp_err;  // per-bin mean normalized squared error (0 if empty)
  std::vector<std::int64_t> bin_counts;
};

struct UceResult {
  double uce = 0.0;
  CalibrationCurve curve;
  /// Set when the uncertainty map was constant (min == max); all cells were
  /// assigned to bin 0 with normalized uncertainty 0.
  bool degenerate_uncertainty = false;
};

/// What gets min-max normalized before binning: the variance map itself or
/// its square root.
enum class UceNormalization { Variance, StdDev };

struct EvalRecord {
  int sample_id = 0;
  std::string method_tag;
  double rmse = 0.0;
  double uce = 0.0;
  CalibrationCurve curve;
  bool degenerate_uncertainty = false;
  double inference_ms = 0.0;
  std::int64_t n_obs = 0;
};

/// Root mean squared residual over every cell of the grid.
double rmse(const GridD& pred_mean, const GridD& truth);

/// Binned L1 gap between min-max-normalized predicted uncertainty and
/// min-max-normalized squared error, weighted by bin occupancy. Both maps are
/// normalized per call (per sample), so any increasing affine rescaling of
/// the raw uncertainty leaves the result unchanged.
UceResult uce(const GridD& total_var, const GridD& pred_mean, const GridD& truth, int n_bins,
              UceNormalization norm = UceNormalization::Variance);

/// Count-weighted mean absolute deviation between the curve's empirical-error
/// and predicted-uncertainty bin means; empty bins carry no weight.
double calibration_deviation(const CalibrationCurve& curve);

struct TimingStats {
  double mean_ms = 0.0;
  double std_ms = 0.0;
  int n_timed = 0;
};

/// Wall-clock per-call statistics for `run(input_index)` over the given
/// number of repeats of all inputs. The first `warmup` calls are discarded.
/// Valid only without concurrent load on the machine.
TimingStats time_inference(const std::function<void(int)>& run, int n_inputs, int repeats,
                           int warmup = 3);

}  // namespace fieldbench::metrics
