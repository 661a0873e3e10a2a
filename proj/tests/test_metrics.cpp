#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fieldbench/core/rng.hpp"
#include "fieldbench/metrics/metrics.hpp"

using namespace fieldbench;
using namespace fieldbench::metrics;

namespace {

GridD random_grid(int h, int w, Rng& rng, double lo = 0.0, double hi = 1.0) {
  GridD g(h, w);
  for (auto& v : g.v) v = rng.uniform(lo, hi);
  return g;
}

// Independent UCE oracle: separate normalization and binning code path.
double uce_oracle(const GridD& total_var, const GridD& pred, const GridD& truth, int bins) {
  const std::size_t n = truth.size();
  std::vector<double> u(n), e(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = total_var.v[i];
    const double r = pred.v[i] - truth.v[i];
    e[i] = r * r;
  }
  auto normalize = [](std::vector<double>& v) {
    const double lo = *std::min_element(v.begin(), v.end());
    const double hi = *std::max_element(v.begin(), v.end());
    for (auto& x : v) x = hi > lo ? (x - lo) / (hi - lo) : 0.0;
  };
  normalize(u);
  normalize(e);
  double total = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double lo = double(b) / bins;
    const double hi = double(b + 1) / bins;
    double su = 0.0, se = 0.0;
    std::int64_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool in_bin = b + 1 == bins ? (u[i] >= lo && u[i] <= hi) : (u[i] >= lo && u[i] < hi);
      if (!in_bin) continue;
      su += u[i];
      se += e[i];
      ++count;
    }
    if (count == 0) continue;
    total += (double(count) / double(n)) * std::fabs(su / count - se / count);
  }
  return total;
}

}  // namespace

TEST_CASE("rmse basics") {
  GridD truth(2, 2);
  truth.v = {0.1, 0.2, 0.3, 0.4};
  GridD pred = truth;
  CHECK(rmse(pred, truth) == 0.0);

  for (auto& v : pred.v) v += 0.1;
  CHECK(rmse(pred, truth) == doctest::Approx(0.1).epsilon(1e-12));

  GridD zeros(2, 2, 0.0);
  CHECK(rmse(zeros, truth) == doctest::Approx(std::sqrt(0.075)).epsilon(1e-12));
}

TEST_CASE("rmse satisfies the triangle inequality on random triples") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const GridD a = random_grid(6, 7, rng), b = random_grid(6, 7, rng),
                c = random_grid(6, 7, rng);
    CHECK(rmse(a, c) <= rmse(a, b) + rmse(b, c) + 1e-12);
  }
}

TEST_CASE("uce matches the independent binning oracle on random maps") {
  Rng rng(34);
  for (int trial = 0; trial < 100; ++trial) {
    const int h = 5 + int(rng.uniform_int(0, 10));
    const int w = 5 + int(rng.uniform_int(0, 10));
    const GridD var = random_grid(h, w, rng, 0.0, 2.0);
    const GridD pred = random_grid(h, w, rng);
    const GridD truth = random_grid(h, w, rng);
    const int bins = 1 + int(rng.uniform_int(0, 19));
    const auto res = uce(var, pred, truth, bins);
    const double expected = uce_oracle(var, pred, truth, bins);
    CHECK(res.uce == doctest::Approx(expected).epsilon(1e-12));
    CHECK(res.uce >= 0.0);
    CHECK(res.uce <= 1.0);
    std::int64_t count_sum = 0;
    for (auto c : res.curve.bin_counts) count_sum += c;
    CHECK(count_sum == std::int64_t(h) * w);
  }
}

TEST_CASE("uce is zero when normalized uncertainty equals normalized error") {
  Rng rng(55);
  GridD pred = random_grid(12, 12, rng);
  GridD truth = random_grid(12, 12, rng);
  // predicted variance == squared error implies identical normalized maps
  GridD var(12, 12);
  for (std::size_t i = 0; i < var.size(); ++i) {
    const double r = pred.v[i] - truth.v[i];
    var.v[i] = r * r;
  }
  for (int bins : {1, 3, 10, 17}) {
    const auto res = uce(var, pred, truth, bins);
    CHECK(res.uce == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("uce is invariant to increasing affine rescaling of the uncertainty") {
  Rng rng(56);
  const GridD pred = random_grid(10, 10, rng);
  const GridD truth = random_grid(10, 10, rng);
  const GridD var = random_grid(10, 10, rng, 0.0, 1.0);
  GridD scaled(10, 10);
  for (std::size_t i = 0; i < var.size(); ++i) scaled.v[i] = 3.7 * var.v[i] + 0.45;
  const auto a = uce(var, pred, truth, 10);
  const auto b = uce(scaled, pred, truth, 10);
  CHECK(a.uce == doctest::Approx(b.uce).epsilon(1e-12));
}

TEST_CASE("constant uncertainty map is flagged and lands in bin zero") {
  Rng rng(57);
  const GridD pred = random_grid(8, 8, rng);
  const GridD truth = random_grid(8, 8, rng);
  const GridD var(8, 8, 0.25);
  const auto res = uce(var, pred, truth, 10);
  CHECK(res.degenerate_uncertainty);
  CHECK(res.curve.bin_counts[0] == 64);
  for (std::size_t b = 1; b < res.curve.bin_counts.size(); ++b)
    CHECK(res.curve.bin_counts[b] == 0);
}

TEST_CASE("calibration deviation: diagonal curve scores zero, offsets pass through") {
  CalibrationCurve curve;
  curve.bin_edges = {0.0, 0.5, 1.0};
  curve.mean_pred_unc = {0.2, 0.8};
  curve.mean_emp_err = {0.2, 0.8};
  curve.bin_counts = {10, 30};
  CHECK(calibration_deviation(curve) == 0.0);

  curve.mean_emp_err = {0.25, 0.8};
  curve.bin_counts = {10, 0};
  CHECK(calibration_deviation(curve) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("calibration deviation equals a direct weighted recomputation") {
  Rng rng(77);
  CalibrationCurve curve;
  const int bins = 10;
  curve.bin_edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) curve.bin_edges[std::size_t(b)] = double(b) / bins;
  double direct_num = 0.0;
  double direct_den = 0.0;
  for (int b = 0; b < bins; ++b) {
    curve.mean_pred_unc.push_back(rng.uniform());
    curve.mean_emp_err.push_back(rng.uniform());
    curve.bin_counts.push_back(std::int64_t(rng.uniform_int(0, 40)));
    direct_num += double(curve.bin_counts.back()) *
                  std::fabs(curve.mean_emp_err.back() - curve.mean_pred_unc.back());
    direct_den += double(curve.bin_counts.back());
  }
  CHECK(calibration_deviation(curve) ==
        doctest::Approx(direct_num / direct_den).epsilon(1e-12));
}

TEST_CASE("time_inference reports positive means over repeats") {
  int calls = 0;
  const auto stats = time_inference(
      [&](int) {
        volatile double acc = 0.0;
        for (int i = 0; i < 20000; ++i) acc += std::sqrt(double(i));
        ++calls;
      },
      4, 3, 2);
  CHECK(stats.n_timed == 12);
  CHECK(calls == 14);  // 2 warmup + 12 timed
  CHECK(stats.mean_ms > 0.0);
}
