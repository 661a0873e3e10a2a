#include "fieldbench/nn/adam.hpp"

#include <cmath>

namespace fieldbench::nn {

Adam::Adam(std::vector<ParamRef> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.w->size(), 0.0f);
    v_.emplace_back(p.w->size(), 0.0f);
  }
}

void Adam::step(std::optional<double> clip_max_norm) {
  double scale = 1.0;
  if (clip_max_norm) {
    double sq = 0.0;
    for (const auto& p : params_)
      for (float g : *p.g) sq += double(g) * g;
    const double norm = std::sqrt(sq);
    if (norm > *clip_max_norm) scale = *clip_max_norm / (norm + 1e-12);
  }

  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    auto& w = *params_[pi].w;
    auto& g = *params_[pi].g;
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = double(g[j]) * scale;
      const double mj = beta1_ * m[j] + (1.0 - beta1_) * gj;
      const double vj = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
      m[j] = float(mj);
      v[j] = float(vj);
      w[j] = float(w[j] - lr_ * (mj / bc1) / (std::sqrt(vj / bc2) + eps_));
    }
  }
}

}  // namespace fieldbench::nn
