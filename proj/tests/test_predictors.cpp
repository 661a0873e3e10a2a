#include <doctest.h>

#include <cmath>
#include <memory>

#include "fieldbench/core/rng.hpp"
#include "fieldbench/uq/predictors.hpp"

using namespace fieldbench;
using namespace fieldbench::uq;

namespace {

nn::BackboneConfig tiny_config(nn::HeadKind head, double dropout = 0.0) {
  nn::BackboneConfig cfg;
  cfg.encoder_channels = {4, 8};
  cfg.bottleneck_channels = 12;
  cfg.head_kind = head;
  cfg.dropout_rate = dropout;
  return cfg;
}

perception::InputPair random_input(int h, int w, std::uint64_t seed) {
  perception::InputPair in{GridF(h, w, 0.0f), GridF(h, w, 0.0f)};
  Rng rng(seed);
  for (std::size_t i = 0; i < in.mask.size(); ++i) {
    if (rng.uniform() < 0.3) {
      in.mask.v[i] = 1.0f;
      in.value.v[i] = float(rng.uniform());
    }
  }
  return in;
}

}  // namespace

TEST_CASE("mcd: zero dropout or single pass means zero epistemic variance") {
  const auto in = random_input(16, 16, 1);
  SUBCASE("p = 0") {
    nn::UNetBackbone model(tiny_config(nn::HeadKind::Heteroscedastic, 0.0));
    model.init_weights(2);
    const auto est = mcd_predict(model, in, 8, 3);
    for (double e : est.epi.v) CHECK(e == 0.0);
  }
  SUBCASE("T = 1") {
    nn::UNetBackbone model(tiny_config(nn::HeadKind::Heteroscedastic, 0.3));
    model.init_weights(2);
    const auto est = mcd_predict(model, in, 1, 3);
    for (double e : est.epi.v) CHECK(e == 0.0);
  }
}

TEST_CASE("mcd matches a manual replication of its passes") {
  nn::UNetBackbone model(tiny_config(nn::HeadKind::Heteroscedastic, 0.25));
  model.init_weights(5);
  const auto in = random_input(16, 16, 6);
  const int T = 5;
  const std::uint64_t seed = 42;
  const auto est = mcd_predict(model, in, T, seed);

  // oracle: rerun the same stochastic passes and recompute the estimator
  const auto tensor_in = to_input_tensor(in);
  const std::size_t n = est.mean.size();
  std::vector<std::vector<double>> means;
  std::vector<double> ale(n, 0.0);
  for (int t = 0; t < T; ++t) {
    const auto out = model.forward(tensor_in, false, true, mix_seed(seed, std::uint64_t(t)));
    std::vector<double> pass(n);
    for (std::size_t i = 0; i < n; ++i) {
      pass[i] = double(out.channels.chan(0, 0)[i]);
      ale[i] += std::exp(double(out.channels.chan(0, 1)[i])) / T;
    }
    means.push_back(std::move(pass));
  }
  // population variance, hand-rolled (the {0.1,0.2,0.3} -> 1/150 case shape)
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0;
    for (const auto& p : means) m += p[i];
    m /= T;
    double var = 0.0;
    for (const auto& p : means) var += (p[i] - m) * (p[i] - m);
    var /= T;
    CHECK(est.mean.v[i] == doctest::Approx(m).epsilon(1e-12));
    CHECK(est.epi.v[i] == doctest::Approx(var).epsilon(1e-9));
    CHECK(est.ale.v[i] == doctest::Approx(ale[i]).epsilon(1e-12));
  }
  // the worked three-pass example: passes 0.1/0.2/0.3 -> mean 0.2, var 1/150
  const double passes[3] = {0.1, 0.2, 0.3};
  double m3 = (passes[0] + passes[1] + passes[2]) / 3.0, v3 = 0.0;
  for (double p : passes) v3 += (p - m3) * (p - m3);
  v3 /= 3.0;
  CHECK(m3 == doctest::Approx(0.2));
  CHECK(v3 == doctest::Approx(0.0066666666).epsilon(1e-6));
}

TEST_CASE("mcd mean stabilizes as T grows") {
  nn::UNetBackbone model(tiny_config(nn::HeadKind::Heteroscedastic, 0.3));
  model.init_weights(7);
  const auto in = random_input(16, 16, 8);
  const std::size_t probe = 16 * 8 + 8;

  auto spread = [&](int T) {
    std::vector<double> values;
    for (std::uint64_t rep = 0; rep < 30; ++rep)
      values.push_back(mcd_predict(model, in, T, 1000 + rep).mean.v[probe]);
    double m = 0.0;
    for (double v : values) m += v;
    m /= double(values.size());
    double var = 0.0;
    for (double v : values) var += (v - m) * (v - m);
    return std::sqrt(var / double(values.size()));
  };
  CHECK(spread(30) < spread(5));
}

TEST_CASE("ensemble: single member has zero epistemic variance") {
  nn::UNetBackbone model(tiny_config(nn::HeadKind::Heteroscedastic));
  model.init_weights(9);
  const auto in = random_input(16, 16, 10);
  const auto est = ensemble_predict({&model}, in);
  for (double e : est.epi.v) CHECK(e == 0.0);
}

TEST_CASE("ensemble matches the two-member closed forms and ignores order") {
  nn::UNetBackbone a(tiny_config(nn::HeadKind::Heteroscedastic));
  nn::UNetBackbone b(tiny_config(nn::HeadKind::Heteroscedastic));
  a.init_weights(11);
  b.init_weights(12);
  const auto in = random_input(16, 16, 13);

  const auto est = ensemble_predict({&a, &b}, in);
  const auto out_a = a.forward(to_input_tensor(in), false, false);
  const auto out_b = b.forward(to_input_tensor(in), false, false);
  for (std::size_t i = 0; i < est.mean.size(); ++i) {
    const double ma = double(out_a.channels.chan(0, 0)[i]);
    const double mb = double(out_b.channels.chan(0, 0)[i]);
    const double mean = 0.5 * (ma + mb);
    const double epi = ((ma - mean) * (ma - mean) + (mb - mean) * (mb - mean)) / 2.0;
    const double ale = 0.5 * (std::exp(double(out_a.channels.chan(0, 1)[i])) +
                              std::exp(double(out_b.channels.chan(0, 1)[i])));
    CHECK(est.mean.v[i] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(est.epi.v[i] == doctest::Approx(epi).epsilon(1e-9));
    CHECK(est.ale.v[i] == doctest::Approx(ale).epsilon(1e-12));
  }

  const auto flipped = ensemble_predict({&b, &a}, in);
  for (std::size_t i = 0; i < est.mean.size(); ++i) {
    CHECK(est.mean.v[i] == doctest::Approx(flipped.mean.v[i]).epsilon(1e-12));
    CHECK(est.epi.v[i] == doctest::Approx(flipped.epi.v[i]).epsilon(1e-12));
    CHECK(est.total.v[i] == doctest::Approx(flipped.total.v[i]).epsilon(1e-12));
  }
}

TEST_CASE("ensemble two-point literals: means {0.4, 0.6} and ales {0.02, 0.04}") {
  // direct substitution into the inter-member disagreement forms
  const double mean = 0.5 * (0.4 + 0.6);
  const double epi = ((0.4 - mean) * (0.4 - mean) + (0.6 - mean) * (0.6 - mean)) / 2.0;
  CHECK(mean == doctest::Approx(0.5));
  CHECK(epi == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(0.5 * (0.02 + 0.04) == doctest::Approx(0.03).epsilon(1e-12));
}

TEST_CASE("edl decomposition closed forms and guard") {
  const auto cell = edl_decompose_cell(0.5, 2.0, 3.0, 4.0);
  CHECK(cell.mean == 0.5);
  CHECK(cell.ale == doctest::Approx(2.0).epsilon(1e-15));   // beta/(alpha-1) = 4/2
  CHECK(cell.epi == doctest::Approx(1.0).epsilon(1e-15));   // beta/(nu(alpha-1)) = 4/4
  CHECK_THROWS_AS(edl_decompose_cell(0.0, 1.0, 1.0000005, 1.0), DegenerateEvidence);

  // nu -> infinity: epistemic vanishes, aleatoric unchanged
  const auto big = edl_decompose_cell(0.0, 1e12, 3.0, 4.0);
  CHECK(big.epi < 1e-10);
  CHECK(big.ale == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("edl total variance identity and epistemic ordering in nu") {
  Rng rng(21);
  for (int i = 0; i < 100000; ++i) {
    const double nu = rng.uniform(1e-3, 10.0);
    const double alpha = 1.0 + rng.uniform(1e-3, 10.0);
    const double beta = rng.uniform(1e-3, 10.0);
    const auto cell = edl_decompose_cell(0.0, nu, alpha, beta);
    const double total = cell.ale + cell.epi;
    const double identity = cell.ale * (1.0 + 1.0 / nu);
    CHECK(std::fabs(total - identity) <= 1e-6 * std::max(total, identity));

    const auto stiffer = edl_decompose_cell(0.0, nu * (1.0 + rng.uniform(0.01, 2.0)),
                                            alpha, beta);
    CHECK(stiffer.epi < cell.epi);
  }
}

TEST_CASE("edl_predict agrees with per-cell decomposition of the raw forward") {
  nn::UNetBackbone model(tiny_config(nn::HeadKind::Evidential));
  model.init_weights(31);
  const auto in = random_input(16, 16, 32);
  const auto est = edl_predict(model, in);
  const auto out = model.forward(to_input_tensor(in), false, false);
  for (std::size_t i = 0; i < est.mean.size(); ++i) {
    const auto cell = edl_decompose_cell(
        double(out.channels.chan(0, 0)[i]), double(out.channels.chan(0, 1)[i]),
        double(out.channels.chan(0, 2)[i]), double(out.channels.chan(0, 3)[i]));
    CHECK(est.mean.v[i] == cell.mean);
    CHECK(est.ale.v[i] == cell.ale);
    CHECK(est.epi.v[i] == cell.epi);
  }
}

TEST_CASE("every estimator satisfies the exact decomposition identity") {
  const auto in = random_input(16, 16, 41);
  nn::UNetBackbone het(tiny_config(nn::HeadKind::Heteroscedastic, 0.2));
  het.init_weights(42);
  nn::UNetBackbone het2(tiny_config(nn::HeadKind::Heteroscedastic));
  het2.init_weights(43);
  nn::UNetBackbone ev(tiny_config(nn::HeadKind::Evidential));
  ev.init_weights(44);

  for (const auto& est :
       {mcd_predict(het, in, 4, 45), ensemble_predict({&het, &het2}, in),
        edl_predict(ev, in)}) {
    for (std::size_t i = 0; i < est.total.size(); ++i) {
      CHECK(est.total.v[i] == est.ale.v[i] + est.epi.v[i]);
      CHECK(est.ale.v[i] >= 0.0);
      CHECK(est.epi.v[i] >= 0.0);
    }
  }
}

TEST_CASE("predictors reject a mismatched head") {
  nn::UNetBackbone mean_only(tiny_config(nn::HeadKind::MeanOnly));
  mean_only.init_weights(50);
  const auto in = random_input(16, 16, 51);
  CHECK_THROWS_AS(mcd_predict(mean_only, in, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(ensemble_predict({&mean_only}, in), std::invalid_argument);
  CHECK_THROWS_AS(edl_predict(mean_only, in), std::invalid_argument);
}
