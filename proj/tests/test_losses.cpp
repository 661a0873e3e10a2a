#include <doctest.h>

#include <cmath>
#include <vector>

#include "fieldbench/core/rng.hpp"
#include "fieldbench/uq/losses.hpp"

using namespace fieldbench;
using namespace fieldbench::uq;

namespace {

// Central finite difference of a scalar functional.
template <typename F>
double central_diff(F f, std::vector<double>& x, std::size_t i, double h) {
  const double orig = x[i];
  x[i] = orig + h;
  const double hi = f();
  x[i] = orig - h;
  const double lo = f();
  x[i] = orig;
  return (hi - lo) / (2.0 * h);
}

double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-8});
}

}  // namespace

TEST_CASE("heteroscedastic nll pinned values") {
  std::vector<double> mean{0.3}, target{0.3}, log_var{0.0};
  CHECK(heteroscedastic_nll(mean, log_var, target) == doctest::Approx(0.0));

  mean = {1.3};  // residual 1, variance 1
  CHECK(heteroscedastic_nll(mean, log_var, target) == doctest::Approx(0.5).epsilon(1e-12));

  log_var = {1.0};  // residual 1, variance e
  CHECK(heteroscedastic_nll(mean, log_var, target) ==
        doctest::Approx(0.5 / M_E + 0.5).epsilon(1e-12));
}

TEST_CASE("heteroscedastic nll gradient matches finite differences") {
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + std::size_t(rng.uniform_int(0, 5));
    std::vector<double> mean(n), log_var(n), target(n), d_mean(n), d_lv(n);
    for (std::size_t i = 0; i < n; ++i) {
      mean[i] = rng.uniform(-1.0, 1.0);
      log_var[i] = rng.uniform(-2.0, 2.0);
      target[i] = rng.uniform(-1.0, 1.0);
    }
    heteroscedastic_nll(mean, log_var, target, d_mean, d_lv);
    const auto f = [&] { return heteroscedastic_nll(mean, log_var, target); };
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(rel_err(central_diff(f, mean, i, 1e-6), d_mean[i]) < 1e-4);
      CHECK(rel_err(central_diff(f, log_var, i, 1e-6), d_lv[i]) < 1e-4);
    }
  }
}

TEST_CASE("nig nll pinned value from an independent evaluation") {
  // gamma=0, nu=1, alpha=2, beta=1, y=0: Omega=4,
  // 0.5 log(pi) - 2 log 4 + 2.5 log 4 + log(Gamma(2)/Gamma(2.5)) ~= 0.980829
  std::vector<double> g{0.0}, nu{1.0}, al{2.0}, be{1.0}, y{0.0};
  const double expected = 0.5 * std::log(M_PI) - 2.0 * std::log(4.0) +
                          2.5 * std::log(4.0) + std::lgamma(2.0) - std::lgamma(2.5);
  CHECK(expected == doctest::Approx(0.9808).epsilon(1e-4));
  CHECK(nig_nll(g, nu, al, be, y) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("nig nll is symmetric in the residual") {
  Rng rng(102);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> g{rng.uniform(-1.0, 1.0)}, nu{rng.uniform(0.1, 3.0)},
        al{rng.uniform(1.1, 4.0)}, be{rng.uniform(0.1, 3.0)};
    std::vector<double> y{rng.uniform(-1.0, 1.0)};
    std::vector<double> y_mirror{2.0 * g[0] - y[0]};
    CHECK(nig_nll(g, nu, al, be, y) ==
          doctest::Approx(nig_nll(g, nu, al, be, y_mirror)).epsilon(1e-12));
  }
}

TEST_CASE("nig nll gradients match finite differences at 100 random points") {
  Rng rng(103);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + std::size_t(rng.uniform_int(0, 3));
    std::vector<double> g(n), nu(n), al(n), be(n), y(n);
    std::vector<double> dg(n), dnu(n), dal(n), dbe(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = rng.uniform(-1.0, 1.0);
      nu[i] = rng.uniform(0.05, 4.0);
      al[i] = rng.uniform(1.05, 5.0);
      be[i] = rng.uniform(0.05, 4.0);
      y[i] = rng.uniform(-1.0, 1.0);
    }
    nig_nll(g, nu, al, be, y, dg, dnu, dal, dbe);
    const auto f = [&] { return nig_nll(g, nu, al, be, y); };
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(rel_err(central_diff(f, g, i, 1e-6), dg[i]) < 1e-4);
      CHECK(rel_err(central_diff(f, nu, i, 1e-7 * std::max(1.0, nu[i])), dnu[i]) < 1e-4);
      CHECK(rel_err(central_diff(f, al, i, 1e-6), dal[i]) < 1e-4);
      CHECK(rel_err(central_diff(f, be, i, 1e-7 * std::max(1.0, be[i])), dbe[i]) < 1e-4);
    }
  }
}

TEST_CASE("edl loss reduces to nig nll at lambda 0 and adds the evidence penalty") {
  Rng rng(104);
  std::vector<double> g{0.2}, nu{1.0}, al{2.0}, be{0.5}, y{0.7};
  CHECK(edl_loss(g, nu, al, be, y, 0.0) ==
        doctest::Approx(nig_nll(g, nu, al, be, y)).epsilon(1e-15));

  // single cell, residual 0.5, nu=1, alpha=2: regularizer = lambda*0.5*4
  const double lam = 1e-3;
  CHECK(edl_loss(g, nu, al, be, y, lam) - nig_nll(g, nu, al, be, y) ==
        doctest::Approx(lam * 0.5 * 4.0).epsilon(1e-9));

  // zero residual kills the regularizer regardless of the evidence
  std::vector<double> y0{0.2}, nu_big{50.0}, al_big{30.0};
  CHECK(edl_loss(g, nu_big, al_big, be, y0, lam) ==
        doctest::Approx(nig_nll(g, nu_big, al_big, be, y0)).epsilon(1e-15));
  (void)rng;
}

TEST_CASE("edl loss gradients match finite differences at 100 random points") {
  Rng rng(105);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + std::size_t(rng.uniform_int(0, 3));
    std::vector<double> g(n), nu(n), al(n), be(n), y(n);
    std::vector<double> dg(n), dnu(n), dal(n), dbe(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = rng.uniform(-1.0, 1.0);
      nu[i] = rng.uniform(0.05, 4.0);
      al[i] = rng.uniform(1.05, 5.0);
      be[i] = rng.uniform(0.05, 4.0);
      // keep residuals away from the |.| kink so central differences are valid
      do {
        y[i] = rng.uniform(-1.0, 1.0);
      } while (std::fabs(y[i] - g[i]) < 1e-3);
    }
    const double lam = rng.uniform(0.0, 0.01);
    edl_loss(g, nu, al, be, y, lam, dg, dnu, dal, dbe);
    const auto f = [&] { return edl_loss(g, nu, al, be, y, lam); };
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(rel_err(central_diff(f, g, i, 1e-6), dg[i]) < 1e-4);
      CHECK(rel_err(central_diff(f, nu, i, 1e-7 * std::max(1.0, nu[i])), dnu[i]) < 1e-4);
      CHECK(rel_err(central_diff(f, al, i, 1e-6), dal[i]) < 1e-4);
      CHECK(rel_err(central_diff(f, be, i, 1e-7 * std::max(1.0, be[i])), dbe[i]) < 1e-4);
    }
  }
}

TEST_CASE("digamma agrees with the lgamma finite-difference and recurrence") {
  // digamma(1) = -euler_mascheroni
  CHECK(digamma(1.0) == doctest::Approx(-0.5772156649015329).epsilon(1e-12));
  // digamma(x+1) = digamma(x) + 1/x
  Rng rng(106);
  for (int trial = 0; trial < 50; ++trial) {
    const double x = rng.uniform(0.1, 20.0);
    CHECK(digamma(x + 1.0) == doctest::Approx(digamma(x) + 1.0 / x).epsilon(1e-11));
    const double fd = (std::lgamma(x + 1e-6) - std::lgamma(x - 1e-6)) / 2e-6;
    CHECK(digamma(x) == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("losses reject invalid domains and non-finite inputs") {
  std::vector<double> g{0.0}, nu{-1.0}, al{2.0}, be{1.0}, y{0.0};
  CHECK_THROWS_AS(nig_nll(g, nu, al, be, y), std::invalid_argument);
  nu = {1.0};
  al = {1.0};
  CHECK_THROWS_AS(nig_nll(g, nu, al, be, y), std::invalid_argument);
  al = {2.0};
  std::vector<double> bad_mean{std::numeric_limits<double>::infinity()};
  std::vector<double> lv{0.0};
  CHECK_THROWS_AS(heteroscedastic_nll(bad_mean, lv, y), NonFiniteLoss);
}
