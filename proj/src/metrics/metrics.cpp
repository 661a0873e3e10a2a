#include "fieldbench/metrics/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace fieldbench::metrics {

double rmse(const GridD& pred_mean, const GridD& truth) {
  if (pred_mean.dims() != truth.dims())
    throw std::invalid_argument("rmse: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double r = pred_mean.v[i] - truth.v[i];
    acc += r * r;
  }
  return std::sqrt(acc / double(truth.size()));
}

namespace {

// Min-max to [0,1]; a constant map collapses to all zeros.
std::vector<double> minmax_normalize(const std::vector<double>& v, bool* degenerate) {
  double lo = v[0], hi = v[0];
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  std::vector<double> out(v.size(), 0.0);
  if (hi > lo) {
    const double inv = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) * inv;
    if (degenerate) *degenerate = false;
  } else {
    if (degenerate) *degenerate = true;
  }
  return out;
}

}  // namespace

UceResult uce(const GridD& total_var, const GridD& pred_mean, const GridD& truth, int n_bins,
              UceNormalization norm) {
  if (n_bins < 1) throw std::invalid_argument("uce: need at least one bin");
  if (total_var.dims() != truth.dims() || pred_mean.dims() != truth.dims())
    throw std::invalid_argument("uce: shape mismatch");
  const std::size_t n = truth.size();

  std::vector<double> unc(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (total_var.v[i] < 0.0) throw std::invalid_argument("uce: negative variance");
    unc[i] = norm == UceNormalization::Variance ? total_var.v[i] : std::sqrt(total_var.v[i]);
  }
  std::vector<double> err2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = pred_mean.v[i] - truth.v[i];
    err2[i] = r * r;
  }

  bool degenerate = false;
  const std::vector<double> u = minmax_normalize(unc, &degenerate);
  const std::vector<double> e = minmax_normalize(err2, nullptr);

  UceResult res;
  res.degenerate_uncertainty = degenerate;
  auto& curve = res.curve;
  curve.bin_edges.resize(std::size_t(n_bins) + 1);
  for (int b = 0; b <= n_bins; ++b) curve.bin_edges[std::size_t(b)] = double(b) / n_bins;
  curve.mean_pred_unc.assign(std::size_t(n_bins), 0.0);
  curve.mean_emp_err.assign(std::size_t(n_bins), 0.0);
  curve.bin_counts.assign(std::size_t(n_bins), 0);

  for (std::size_t i = 0; i < n; ++i) {
    const int b = std::min(n_bins - 1, int(u[i] * n_bins));
    curve.mean_pred_unc[std::size_t(b)] += u[i];
    curve.mean_emp_err[std::size_t(b)] += e[i];
    curve.bin_counts[std::size_t(b)] += 1;
  }
  double total = 0.0;
  for (int b = 0; b < n_bins; ++b) {
    const auto cnt = curve.bin_counts[std::size_t(b)];
    if (cnt == 0) continue;
    curve.mean_pred_unc[std::size_t(b)] /= double(cnt);
    curve.mean_emp_err[std::size_t(b)] /= double(cnt);
    total += (double(cnt) / double(n)) *
             std::fabs(curve.mean_pred_unc[std::size_t(b)] - curve.mean_emp_err[std::size_t(b)]);
  }
  res.uce = total;
  return res;
}

double calibration_deviation(const CalibrationCurve& curve) {
  double weighted = 0.0;
  std::int64_t total = 0;
  for (std::size_t b = 0; b < curve.bin_counts.size(); ++b) {
    if (curve.bin_counts[b] == 0) continue;
    weighted += double(curve.bin_counts[b]) *
                std::fabs(curve.mean_emp_err[b] - curve.mean_pred_unc[b]);
    total += curve.bin_counts[b];
  }
  return total > 0 ? weighted / double(total) : 0.0;
}

TimingStats time_inference(const std::function<void(int)>& run, int n_inputs, int repeats,
                           int warmup) {
  using clock = std::chrono::steady_clock;
  if (n_inputs < 1 || repeats < 1)
    throw std::invalid_argument("time_inference: need inputs and repeats");
  for (int w = 0; w < warmup; ++w) run(w % n_inputs);

  std::vector<double> ms;
  ms.reserve(std::size_t(n_inputs) * repeats);
  for (int rep = 0; rep < repeats; ++rep) {
    for (int i = 0; i < n_inputs; ++i) {
      const auto t0 = clock::now();
      run(i);
      ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
    }
  }
  TimingStats stats;
  stats.n_timed = int(ms.size());
  for (double m : ms) stats.mean_ms += m;
  stats.mean_ms /= double(ms.size());
  double var = 0.0;
  for (double m : ms) var += (m - stats.mean_ms) * (m - stats.mean_ms);
  stats.std_ms = ms.size() > 1 ? std::sqrt(var / double(ms.size() - 1)) : 0.0;
  return stats;
}

}  // namespace fieldbench::metrics
