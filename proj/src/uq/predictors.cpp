#include "fieldbench/uq/predictors.hpp"

#include <cmath>
#include <cstring>

#include "fieldbench/core/rng.hpp"

namespace fieldbench::uq {

nn::Tensor to_input_tensor(const perception::InputPair& input) {
  const int h = input.mask.rows, w = input.mask.cols;
  nn::Tensor t(1, 2, h, w);
  std::memcpy(t.chan(0, 0), input.mask.data(), std::size_t(h) * w * sizeof(float));
  std::memcpy(t.chan(0, 1), input.value.data(), std::size_t(h) * w * sizeof(float));
  return t;
}

namespace {

GridDims dims_of(const perception::InputPair& input) { return input.mask.dims(); }

void require_head(const nn::UNetBackbone& model, nn::HeadKind kind, const char* who) {
  if (model.config().head_kind != kind)
    throw std::invalid_argument(std::string(who) + ": model has the wrong head kind");
}

}  // namespace

UncertainFieldEstimate mcd_predict(nn::UNetBackbone& model, const perception::InputPair& input,
                                   int t_passes, std::uint64_t seed) {
  require_head(model, nn::HeadKind::Heteroscedastic, "mcd_predict");
  if (t_passes < 1) throw std::invalid_argument("mcd_predict: t_passes must be >= 1");
  const GridDims d = dims_of(input);
  const std::size_t n = std::size_t(d.cell_count());
  const nn::Tensor in = to_input_tensor(input);

  std::vector<std::vector<double>> pass_means;
  pass_means.resize(std::size_t(t_passes));
  std::vector<double> ale_acc(n, 0.0);
  for (int t = 0; t < t_passes; ++t) {
    const auto out = model.forward(in, /*train=*/false, /*stochastic=*/true,
                                   mix_seed(seed, std::uint64_t(t)));
    auto& pm = pass_means[std::size_t(t)];
    pm.resize(n);
    const float* mean_ch = out.channels.chan(0, 0);
    const float* lv_ch = out.channels.chan(0, 1);
    for (std::size_t i = 0; i < n; ++i) {
      pm[i] = double(mean_ch[i]);
      ale_acc[i] += std::exp(double(lv_ch[i]));
    }
  }

  UncertainFieldEstimate est;
  est.method_tag = "mcd";
  est.mean = GridD(d);
  est.ale = GridD(d);
  est.epi = GridD(d);
  est.total = GridD(d);
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0;
    for (int t = 0; t < t_passes; ++t) m += pass_means[std::size_t(t)][i];
    m /= double(t_passes);
    double var = 0.0;
    for (int t = 0; t < t_passes; ++t) {
      const double dd = pass_means[std::size_t(t)][i] - m;
      var += dd * dd;
    }
    var /= double(t_passes);  // population form, matching the estimator definition
    est.mean.v[i] = m;
    est.epi.v[i] = var;
    est.ale.v[i] = ale_acc[i] / double(t_passes);
    est.total.v[i] = est.ale.v[i] + est.epi.v[i];
  }
  return est;
}

UncertainFieldEstimate ensemble_predict(std::vector<nn::UNetBackbone*> members,
                                        const perception::InputPair& input) {
  if (members.empty()) throw std::invalid_argument("ensemble_predict: no members");
  for (auto* m : members) require_head(*m, nn::HeadKind::Heteroscedastic, "ensemble_predict");
  const GridDims d = dims_of(input);
  const std::size_t n = std::size_t(d.cell_count());
  const nn::Tensor in = to_input_tensor(input);
  const int m_count = int(members.size());

  std::vector<std::vector<double>> member_means(members.size());
  std::vector<double> ale_acc(n, 0.0);
  for (int m = 0; m < m_count; ++m) {
    const auto out = members[std::size_t(m)]->forward(in, false, false);
    auto& mm = member_means[std::size_t(m)];
    mm.resize(n);
    const float* mean_ch = out.channels.chan(0, 0);
    const float* lv_ch = out.channels.chan(0, 1);
    for (std::size_t i = 0; i < n; ++i) {
      mm[i] = double(mean_ch[i]);
      ale_acc[i] += std::exp(double(lv_ch[i]));
    }
  }

  UncertainFieldEstimate est;
  est.method_tag = "ensemble";
  est.mean = GridD(d);
  est.ale = GridD(d);
  est.epi = GridD(d);
  est.total = GridD(d);
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (int m = 0; m < m_count; ++m) mu += member_means[std::size_t(m)][i];
    mu /= double(m_count);
    double var = 0.0;
    for (int m = 0; m < m_count; ++m) {
      const double dd = member_means[std::size_t(m)][i] - mu;
      var += dd * dd;
    }
    var /= double(m_count);
    est.mean.v[i] = mu;
    est.epi.v[i] = var;
    est.ale.v[i] = ale_acc[i] / double(m_count);
    est.total.v[i] = est.ale.v[i] + est.epi.v[i];
  }
  return est;
}

CellDecomposition edl_decompose_cell(double gamma, double nu, double alpha, double beta) {
  if (alpha <= 1.0 + 1e-6)
    throw DegenerateEvidence("evidential decomposition: alpha too close to 1");
  return {gamma, beta / (alpha - 1.0), beta / (nu * (alpha - 1.0))};
}

UncertainFieldEstimate edl_predict(nn::UNetBackbone& model,
                                   const perception::InputPair& input) {
  require_head(model, nn::HeadKind::Evidential, "edl_predict");
  const GridDims d = dims_of(input);
  const std::size_t n = std::size_t(d.cell_count());
  const auto out = model.forward(to_input_tensor(input), false, false);

  UncertainFieldEstimate est;
  est.method_tag = "edl";
  est.mean = GridD(d);
  est.ale = GridD(d);
  est.epi = GridD(d);
  est.total = GridD(d);
  const float* g = out.channels.chan(0, 0);
  const float* nu = out.channels.chan(0, 1);
  const float* al = out.channels.chan(0, 2);
  const float* be = out.channels.chan(0, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cell =
        edl_decompose_cell(double(g[i]), double(nu[i]), double(al[i]), double(be[i]));
    est.mean.v[i] = cell.mean;
    est.ale.v[i] = cell.ale;
    est.epi.v[i] = cell.epi;
    est.total.v[i] = cell.ale + cell.epi;
  }
  return est;
}

}  // namespace fieldbench::uq
