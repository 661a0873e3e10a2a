#include <doctest.h>

#include <cmath>

#include "fieldbench/core/rng.hpp"
#include "fieldbench/perception/observe.hpp"
#include "fieldbench/sim/spill.hpp"
#include "fieldbench/sim/trajectory.hpp"
#include "fieldbench/uq/train.hpp"

using namespace fieldbench;
using namespace fieldbench::uq;

namespace {

nn::BackboneConfig tiny_backbone(nn::HeadKind head, double dropout = 0.0) {
  nn::BackboneConfig cfg;
  cfg.encoder_channels = {8, 16};
  cfg.bottleneck_channels = 32;
  cfg.head_kind = head;
  cfg.dropout_rate = dropout;
  return cfg;
}

std::vector<TrainSample> make_dataset(int n, int grid, std::uint64_t seed) {
  sim::SimParams sp;
  sp.grid_height = grid;
  sp.grid_width = grid;
  sp.n_particles = 300;
  sp.n_steps = 15;
  sp.wind_velocity = {0.2, 0.0};
  sim::TrajectoryParams tp;
  tp.min_steps = 30;
  tp.max_steps = 60;

  std::vector<TrainSample> out;
  for (int i = 0; i < n; ++i) {
    const auto field = sim::generate_field(sp, mix_seed(seed, std::uint64_t(i)));
    const auto traj =
        sim::generate_trajectory(tp, {grid, grid}, mix_seed(seed, 100 + std::uint64_t(i)));
    const auto obs = perception::observe_pointwise(field, traj, perception::NoiseModel::fixed(0.05),
                                                   mix_seed(seed, 200 + std::uint64_t(i)));
    TrainSample s;
    s.input = perception::rasterize(obs, {grid, grid});
    s.field = field.values.cast<float>();
    out.push_back(std::move(s));
  }
  return out;
}

TrainConfig overfit_config(int epochs, double lr = 1e-3) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 5;
  cfg.learning_rate = lr;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("overfit smoke test: every method crushes its initial loss") {
  const auto data = make_dataset(5, 16, 1);

  SUBCASE("heteroscedastic (ensemble member)") {
    const auto result = train(TrainMethod::Ensemble, data, {.epochs = 200, .batch_size = 5,
                              .learning_rate = 1e-3, .m_members = 1, .seed = 7},
                              tiny_backbone(nn::HeadKind::Heteroscedastic));
    const auto& log = result.logs[0];
    REQUIRE(log.size() == 200);
    CHECK(log.front().loss > 0.0);
    CHECK(log.back().loss < 0.1 * log.front().loss);
  }
  SUBCASE("mcd") {
    const auto result = train(TrainMethod::Mcd, data, {.epochs = 200, .batch_size = 5,
                              .learning_rate = 1e-3, .seed = 7},
                              tiny_backbone(nn::HeadKind::Heteroscedastic, 0.1));
    const auto& log = result.logs[0];
    CHECK(log.back().loss < 0.1 * log.front().loss);
  }
  SUBCASE("edl") {
    const auto result = train(TrainMethod::Edl, data, {.epochs = 200, .batch_size = 5,
                              .learning_rate = 1e-3, .grad_clip_max_norm = 1.0,
                              .lambda = 1e-3, .seed = 7},
                              tiny_backbone(nn::HeadKind::Evidential));
    const auto& log = result.logs[0];
    CHECK(log.back().loss < 0.1 * log.front().loss);
  }
}

TEST_CASE("ensemble training returns M models with distinct weights") {
  const auto data = make_dataset(4, 16, 2);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.m_members = 3;
  cfg.seed = 5;
  const auto result =
      train(TrainMethod::Ensemble, data, cfg, tiny_backbone(nn::HeadKind::Heteroscedastic));
  REQUIRE(result.models.size() == 3);
  REQUIRE(result.logs.size() == 3);
  const auto pa = result.models[0]->params();
  const auto pb = result.models[1]->params();
  bool differ = false;
  for (std::size_t i = 0; i < pa.size(); ++i) differ |= *pa[i].w != *pb[i].w;
  CHECK(differ);
}

TEST_CASE("training is deterministic: identical seeds give identical loss logs") {
  const auto data = make_dataset(6, 16, 3);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.seed = 11;
  const auto bb = tiny_backbone(nn::HeadKind::Evidential);
  const auto a = train(TrainMethod::Edl, data, cfg, bb);
  const auto b = train(TrainMethod::Edl, data, cfg, bb);
  REQUIRE(a.logs[0].size() == b.logs[0].size());
  for (std::size_t i = 0; i < a.logs[0].size(); ++i)
    CHECK(a.logs[0][i].loss == b.logs[0][i].loss);

  cfg.seed = 12;
  const auto c = train(TrainMethod::Edl, data, cfg, bb);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.logs[0].size(); ++i)
    any_diff |= a.logs[0][i].loss != c.logs[0][i].loss;
  CHECK(any_diff);
}

TEST_CASE("config mismatches are rejected") {
  const auto data = make_dataset(2, 16, 4);
  TrainConfig cfg;
  cfg.epochs = 1;
  // mcd needs dropout
  CHECK_THROWS_AS(train(TrainMethod::Mcd, data, cfg,
                        tiny_backbone(nn::HeadKind::Heteroscedastic, 0.0)),
                  ConfigMismatch);
  // edl needs the evidential head
  CHECK_THROWS_AS(train(TrainMethod::Edl, data, cfg,
                        tiny_backbone(nn::HeadKind::Heteroscedastic)),
                  ConfigMismatch);
  // empty dataset
  CHECK_THROWS_AS(train(TrainMethod::Edl, {}, cfg, tiny_backbone(nn::HeadKind::Evidential)),
                  std::invalid_argument);
}

TEST_CASE("a diverging run aborts with NonFiniteLoss") {
  const auto data = make_dataset(4, 16, 5);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e12;  // guaranteed blow-up
  cfg.seed = 3;
  CHECK_THROWS_AS(
      train(TrainMethod::Ensemble, data, cfg, tiny_backbone(nn::HeadKind::Heteroscedastic)),
      NonFiniteLoss);
}
