#include "fieldbench/nn/layers.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace fieldbench::nn {

namespace {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;

float he_draw(Rng& rng, double fan_in) {
  return float(rng.normal() * std::sqrt(2.0 / fan_in));
}

// Fills one im2col buffer: col[(ci*9 + ky*3 + kx)][r*w + c] = x[ci][r+ky-1][c+kx-1],
// zero outside the image. Row-segment copies keep this memory-bound step cheap.
void im2col_3x3(const float* x, int cin, int h, int w, float* col) {
  const std::size_t hw = std::size_t(h) * w;
  for (int ci = 0; ci < cin; ++ci) {
    const float* xc = x + std::size_t(ci) * hw;
    for (int ky = 0; ky < 3; ++ky) {
      const int dy = ky - 1;
      for (int kx = 0; kx < 3; ++kx) {
        const int dx = kx - 1;
        float* row = col + (std::size_t(ci) * 9 + std::size_t(ky) * 3 + kx) * hw;
        for (int r = 0; r < h; ++r) {
          float* dst = row + std::size_t(r) * w;
          const int rr = r + dy;
          if (rr < 0 || rr >= h) {
            std::memset(dst, 0, std::size_t(w) * sizeof(float));
            continue;
          }
          const float* src = xc + std::size_t(rr) * w;
          if (dx == 0) {
            std::memcpy(dst, src, std::size_t(w) * sizeof(float));
          } else if (dx < 0) {
            dst[0] = 0.0f;
            std::memcpy(dst + 1, src, std::size_t(w - 1) * sizeof(float));
          } else {
            std::memcpy(dst, src + 1, std::size_t(w - 1) * sizeof(float));
            dst[w - 1] = 0.0f;
          }
        }
      }
    }
  }
}

// Adjoint of im2col_3x3: scatter-add column gradients back onto the image.
void col2im_add_3x3(const float* col, int cin, int h, int w, float* dx) {
  const std::size_t hw = std::size_t(h) * w;
  for (int ci = 0; ci < cin; ++ci) {
    float* xc = dx + std::size_t(ci) * hw;
    for (int ky = 0; ky < 3; ++ky) {
      const int dy = ky - 1;
      for (int kx = 0; kx < 3; ++kx) {
        const int dx_off = kx - 1;
        const float* row = col + (std::size_t(ci) * 9 + std::size_t(ky) * 3 + kx) * hw;
        for (int r = 0; r < h; ++r) {
          const int rr = r + dy;
          if (rr < 0 || rr >= h) continue;
          const float* src = row + std::size_t(r) * w;
          float* dst = xc + std::size_t(rr) * w;
          if (dx_off == 0) {
            for (int c = 0; c < w; ++c) dst[c] += src[c];
          } else if (dx_off < 0) {
            for (int c = 1; c < w; ++c) dst[c - 1] += src[c];
          } else {
            for (int c = 0; c < w - 1; ++c) dst[c + 1] += src[c];
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv3x3

Conv3x3::Conv3x3(int cin, int cout) : cin_(cin), cout_(cout) {
  weight.resize(std::size_t(cout) * cin * 9);
  bias.resize(std::size_t(cout));
}

void Conv3x3::init(Rng& rng) {
  const double fan_in = double(cin_) * 9.0;
  for (auto& v : weight.w) v = he_draw(rng, fan_in);
  std::fill(bias.w.begin(), bias.w.end(), 0.0f);
}

void Conv3x3::forward(const Tensor& x, Tensor& y) {
  const int n = x.n, h = x.h, w = x.w;
  const std::size_t hw = std::size_t(h) * w;
  const std::size_t k = std::size_t(cin_) * 9;
  y.resize(n, cout_, h, w);
  col_.assign(std::size_t(n) * k * hw, 0.0f);
  cached_n_ = n;
  cached_h_ = h;
  cached_w_ = w;

  MapCM wm(weight.w.data(), cout_, Eigen::Index(k));
  for (int i = 0; i < n; ++i) {
    float* col = col_.data() + std::size_t(i) * k * hw;
    im2col_3x3(x.sample(i), cin_, h, w, col);
    MapCM cm(col, Eigen::Index(k), Eigen::Index(hw));
    MapM ym(y.sample(i), cout_, Eigen::Index(hw));
    ym.noalias() = wm * cm;
    for (int co = 0; co < cout_; ++co) ym.row(co).array() += bias.w[std::size_t(co)];
  }
}

void Conv3x3::backward(const Tensor& d_y, Tensor& d_x, bool need_dx) {
  const int n = cached_n_, h = cached_h_, w = cached_w_;
  const std::size_t hw = std::size_t(h) * w;
  const std::size_t k = std::size_t(cin_) * 9;
  if (d_y.n != n || d_y.h != h || d_y.w != w || d_y.c != cout_)
    throw std::logic_error("Conv3x3::backward without matching forward");
  if (need_dx) d_x.resize(n, cin_, h, w);

  MapM gw(weight.g.data(), cout_, Eigen::Index(k));
  MapCM wm(weight.w.data(), cout_, Eigen::Index(k));
  std::vector<float> dcol(need_dx ? k * hw : 0);
  for (int i = 0; i < n; ++i) {
    const float* col = col_.data() + std::size_t(i) * k * hw;
    MapCM cm(col, Eigen::Index(k), Eigen::Index(hw));
    MapCM dym(d_y.sample(i), cout_, Eigen::Index(hw));
    gw.noalias() += dym * cm.transpose();
    for (int co = 0; co < cout_; ++co) bias.g[std::size_t(co)] += dym.row(co).sum();
    if (need_dx) {
      MapM dcm(dcol.data(), Eigen::Index(k), Eigen::Index(hw));
      dcm.noalias() = wm.transpose() * dym;
      col2im_add_3x3(dcol.data(), cin_, h, w, d_x.sample(i));
    }
  }
}

// ---------------------------------------------------------------- Conv1x1

Conv1x1::Conv1x1(int cin, int cout) : cin_(cin), cout_(cout) {
  weight.resize(std::size_t(cout) * cin);
  bias.resize(std::size_t(cout));
}

void Conv1x1::init(Rng& rng) {
  for (auto& v : weight.w) v = he_draw(rng, double(cin_));
  std::fill(bias.w.begin(), bias.w.end(), 0.0f);
}

void Conv1x1::forward(const Tensor& x, Tensor& y) {
  const std::size_t hw = std::size_t(x.h) * x.w;
  y.resize(x.n, cout_, x.h, x.w);
  x_ = x;
  MapCM wm(weight.w.data(), cout_, cin_);
  for (int i = 0; i < x.n; ++i) {
    MapCM xm(x.sample(i), cin_, Eigen::Index(hw));
    MapM ym(y.sample(i), cout_, Eigen::Index(hw));
    ym.noalias() = wm * xm;
    for (int co = 0; co < cout_; ++co) ym.row(co).array() += bias.w[std::size_t(co)];
  }
}

void Conv1x1::backward(const Tensor& d_y, Tensor& d_x, bool need_dx) {
  const std::size_t hw = std::size_t(x_.h) * x_.w;
  if (need_dx) d_x.resize(x_.n, cin_, x_.h, x_.w);
  MapM gw(weight.g.data(), cout_, cin_);
  MapCM wm(weight.w.data(), cout_, cin_);
  for (int i = 0; i < x_.n; ++i) {
    MapCM xm(x_.sample(i), cin_, Eigen::Index(hw));
    MapCM dym(d_y.sample(i), cout_, Eigen::Index(hw));
    gw.noalias() += dym * xm.transpose();
    for (int co = 0; co < cout_; ++co) bias.g[std::size_t(co)] += dym.row(co).sum();
    if (need_dx) {
      MapM dxm(d_x.sample(i), cin_, Eigen::Index(hw));
      dxm.noalias() = wm.transpose() * dym;
    }
  }
}

// ---------------------------------------------------------------- ConvT2x2

ConvT2x2::ConvT2x2(int cin, int cout) : cin_(cin), cout_(cout) {
  weight.resize(std::size_t(4) * cout * cin);
  bias.resize(std::size_t(cout));
}

void ConvT2x2::init(Rng& rng) {
  for (auto& v : weight.w) v = he_draw(rng, double(cin_));
  std::fill(bias.w.begin(), bias.w.end(), 0.0f);
}

void ConvT2x2::forward(const Tensor& x, Tensor& y) {
  const int n = x.n, h = x.h, w = x.w;
  const std::size_t hw = std::size_t(h) * w;
  y.resize(n, cout_, 2 * h, 2 * w);
  x_ = x;

  std::vector<float> sub(std::size_t(cout_) * hw);
  for (int i = 0; i < n; ++i) {
    MapCM xm(x.sample(i), cin_, Eigen::Index(hw));
    for (int kk = 0; kk < 4; ++kk) {
      const int dr = kk >> 1, dc = kk & 1;
      MapCM wm(weight.w.data() + std::size_t(kk) * cout_ * cin_, cout_, cin_);
      MapM sm(sub.data(), cout_, Eigen::Index(hw));
      sm.noalias() = wm * xm;
      for (int co = 0; co < cout_; ++co) {
        const float b = bias.w[std::size_t(co)];
        const float* src = sub.data() + std::size_t(co) * hw;
        float* dst = y.chan(i, co);
        for (int r = 0; r < h; ++r) {
          float* drow = dst + std::size_t(2 * r + dr) * (2 * w) + dc;
          const float* srow = src + std::size_t(r) * w;
          for (int c = 0; c < w; ++c) drow[2 * c] = srow[c] + b;
        }
      }
    }
  }
}

void ConvT2x2::backward(const Tensor& d_y, Tensor& d_x, bool need_dx) {
  const int n = x_.n, h = x_.h, w = x_.w;
  const std::size_t hw = std::size_t(h) * w;
  if (need_dx) d_x.resize(n, cin_, h, w);

  std::vector<float> dsub(std::size_t(cout_) * hw);
  for (int i = 0; i < n; ++i) {
    MapCM xm(x_.sample(i), cin_, Eigen::Index(hw));
    for (int kk = 0; kk < 4; ++kk) {
      const int dr = kk >> 1, dc = kk & 1;
      // gather the strided quadrant of d_y
      for (int co = 0; co < cout_; ++co) {
        const float* src = d_y.chan(i, co);
        float* dst = dsub.data() + std::size_t(co) * hw;
        for (int r = 0; r < h; ++r) {
          const float* srow = src + std::size_t(2 * r + dr) * (2 * w) + dc;
          float* drow = dst + std::size_t(r) * w;
          for (int c = 0; c < w; ++c) drow[c] = srow[2 * c];
        }
      }
      MapCM dsm(dsub.data(), cout_, Eigen::Index(hw));
      MapM gw(weight.g.data() + std::size_t(kk) * cout_ * cin_, cout_, cin_);
      gw.noalias() += dsm * xm.transpose();
      if (need_dx) {
        MapCM wm(weight.w.data() + std::size_t(kk) * cout_ * cin_, cout_, cin_);
        MapM dxm(d_x.sample(i), cin_, Eigen::Index(hw));
        dxm.noalias() += wm.transpose() * dsm;
      }
    }
    for (int co = 0; co < cout_; ++co) {
      const float* src = d_y.chan(i, co);
      double acc = 0.0;
      for (std::size_t j = 0; j < std::size_t(4) * hw; ++j) acc += src[j];
      bias.g[std::size_t(co)] += float(acc);
    }
  }
}

// ---------------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int c) : c_(c) {
  gamma.resize(std::size_t(c));
  beta.resize(std::size_t(c));
  running_mean.assign(std::size_t(c), 0.0f);
  running_var.assign(std::size_t(c), 1.0f);
  init();
}

void BatchNorm2d::init() {
  std::fill(gamma.w.begin(), gamma.w.end(), 1.0f);
  std::fill(beta.w.begin(), beta.w.end(), 0.0f);
  std::fill(running_mean.begin(), running_mean.end(), 0.0f);
  std::fill(running_var.begin(), running_var.end(), 1.0f);
}

void BatchNorm2d::forward(const Tensor& x, Tensor& y, bool train) {
  const int n = x.n;
  const std::size_t hw = std::size_t(x.h) * x.w;
  const std::size_t count = std::size_t(n) * hw;
  y.resize(n, c_, x.h, x.w);

  if (train) {
    xhat_.assign(x.count(), 0.0f);
    invstd_.assign(std::size_t(c_), 0.0f);
    cached_n_ = n;
    cached_hw_ = int(hw);
    for (int ci = 0; ci < c_; ++ci) {
      double sum = 0.0;
      for (int i = 0; i < n; ++i) {
        const float* xc = x.chan(i, ci);
        for (std::size_t j = 0; j < hw; ++j) sum += xc[j];
      }
      const double mean = sum / double(count);
      double var_acc = 0.0;
      for (int i = 0; i < n; ++i) {
        const float* xc = x.chan(i, ci);
        for (std::size_t j = 0; j < hw; ++j) {
          const double d = xc[j] - mean;
          var_acc += d * d;
        }
      }
      const double var = var_acc / double(count);
      const double invstd = 1.0 / std::sqrt(var + eps_);
      invstd_[std::size_t(ci)] = float(invstd);

      const double unbiased = count > 1 ? var_acc / double(count - 1) : var;
      running_mean[std::size_t(ci)] =
          float((1.0 - momentum_) * running_mean[std::size_t(ci)] + momentum_ * mean);
      running_var[std::size_t(ci)] =
          float((1.0 - momentum_) * running_var[std::size_t(ci)] + momentum_ * unbiased);

      const float g = gamma.w[std::size_t(ci)], b = beta.w[std::size_t(ci)];
      const float fm = float(mean), fs = float(invstd);
      for (int i = 0; i < n; ++i) {
        const float* xc = x.chan(i, ci);
        float* yc = y.chan(i, ci);
        float* xh = xhat_.data() + (std::size_t(i) * c_ + ci) * hw;
        for (std::size_t j = 0; j < hw; ++j) {
          const float h = (xc[j] - fm) * fs;
          xh[j] = h;
          yc[j] = g * h + b;
        }
      }
    }
  } else {
    for (int ci = 0; ci < c_; ++ci) {
      const float fm = running_mean[std::size_t(ci)];
      const float fs = 1.0f / std::sqrt(running_var[std::size_t(ci)] + float(eps_));
      const float g = gamma.w[std::size_t(ci)], b = beta.w[std::size_t(ci)];
      for (int i = 0; i < n; ++i) {
        const float* xc = x.chan(i, ci);
        float* yc = y.chan(i, ci);
        for (std::size_t j = 0; j < hw; ++j) yc[j] = g * (xc[j] - fm) * fs + b;
      }
    }
  }
}

void BatchNorm2d::backward(const Tensor& d_y, Tensor& d_x) {
  const int n = cached_n_;
  const std::size_t hw = std::size_t(cached_hw_);
  const double count = double(n) * double(hw);
  if (d_y.n != n || d_y.c != c_)
    throw std::logic_error("BatchNorm2d::backward without matching train forward");
  d_x.resize(d_y.n, d_y.c, d_y.h, d_y.w);

  for (int ci = 0; ci < c_; ++ci) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < n; ++i) {
      const float* dyc = d_y.chan(i, ci);
      const float* xh = xhat_.data() + (std::size_t(i) * c_ + ci) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        sum_dy += dyc[j];
        sum_dy_xhat += double(dyc[j]) * xh[j];
      }
    }
    gamma.g[std::size_t(ci)] += float(sum_dy_xhat);
    beta.g[std::size_t(ci)] += float(sum_dy);

    const double g = gamma.w[std::size_t(ci)];
    const double invstd = invstd_[std::size_t(ci)];
    const double k = g * invstd / count;
    for (int i = 0; i < n; ++i) {
      const float* dyc = d_y.chan(i, ci);
      const float* xh = xhat_.data() + (std::size_t(i) * c_ + ci) * hw;
      float* dxc = d_x.chan(i, ci);
      for (std::size_t j = 0; j < hw; ++j)
        dxc[j] = float(k * (count * dyc[j] - sum_dy - double(xh[j]) * sum_dy_xhat));
    }
  }
}

// ---------------------------------------------------------------- ReLU

void relu_forward(const Tensor& x, Tensor& y) {
  y.resize(x.n, x.c, x.h, x.w);
  for (std::size_t i = 0; i < x.count(); ++i) y.v[i] = x.v[i] > 0.0f ? x.v[i] : 0.0f;
}

void relu_backward(const Tensor& y, const Tensor& d_y, Tensor& d_x) {
  d_x.resize(y.n, y.c, y.h, y.w);
  for (std::size_t i = 0; i < y.count(); ++i) d_x.v[i] = y.v[i] > 0.0f ? d_y.v[i] : 0.0f;
}

// ---------------------------------------------------------------- MaxPool2

void MaxPool2::forward(const Tensor& x, Tensor& y) {
  if (x.h % 2 != 0 || x.w % 2 != 0) throw std::invalid_argument("MaxPool2: odd input size");
  n_ = x.n;
  c_ = x.c;
  oh_ = x.h / 2;
  ow_ = x.w / 2;
  y.resize(n_, c_, oh_, ow_);
  arg_.assign(y.count(), 0);

  std::size_t o = 0;
  for (int i = 0; i < n_; ++i) {
    for (int ci = 0; ci < c_; ++ci) {
      const float* xc = x.chan(i, ci);
      for (int r = 0; r < oh_; ++r) {
        const float* row0 = xc + std::size_t(2 * r) * x.w;
        const float* row1 = row0 + x.w;
        for (int c = 0; c < ow_; ++c, ++o) {
          const float v00 = row0[2 * c], v01 = row0[2 * c + 1];
          const float v10 = row1[2 * c], v11 = row1[2 * c + 1];
          float best = v00;
          std::uint8_t arg = 0;
          if (v01 > best) { best = v01; arg = 1; }
          if (v10 > best) { best = v10; arg = 2; }
          if (v11 > best) { best = v11; arg = 3; }
          y.v[o] = best;
          arg_[o] = arg;
        }
      }
    }
  }
}

void MaxPool2::backward(const Tensor& d_y, Tensor& d_x) {
  d_x.resize(n_, c_, 2 * oh_, 2 * ow_);
  d_x.zero();
  std::size_t o = 0;
  for (int i = 0; i < n_; ++i) {
    for (int ci = 0; ci < c_; ++ci) {
      float* xc = d_x.chan(i, ci);
      for (int r = 0; r < oh_; ++r) {
        for (int c = 0; c < ow_; ++c, ++o) {
          const int dr = arg_[o] >> 1, dc = arg_[o] & 1;
          xc[std::size_t(2 * r + dr) * (2 * ow_) + (2 * c + dc)] += d_y.v[o];
        }
      }
    }
  }
}

// ---------------------------------------------------------------- Dropout

void Dropout::forward(const Tensor& x, Tensor& y, bool active, std::uint64_t key) {
  y.resize(x.n, x.c, x.h, x.w);
  active_ = active && rate_ > 0.0;
  key_ = key;
  if (!active_) {
    y.v = x.v;
    return;
  }
  const CounterRng rng(key_);
  const float scale = float(1.0 / (1.0 - rate_));
  for (std::size_t i = 0; i < x.count(); ++i)
    y.v[i] = rng.uniform_at(i) >= rate_ ? x.v[i] * scale : 0.0f;
}

void Dropout::backward(const Tensor& d_y, Tensor& d_x) {
  d_x.resize(d_y.n, d_y.c, d_y.h, d_y.w);
  if (!active_) {
    d_x.v = d_y.v;
    return;
  }
  const CounterRng rng(key_);
  const float scale = float(1.0 / (1.0 - rate_));
  for (std::size_t i = 0; i < d_y.count(); ++i)
    d_x.v[i] = rng.uniform_at(i) >= rate_ ? d_y.v[i] * scale : 0.0f;
}

// ---------------------------------------------------------------- concat

void concat_forward(const Tensor& a, const Tensor& b, Tensor& y) {
  y.resize(a.n, a.c + b.c, a.h, a.w);
  for (int i = 0; i < a.n; ++i) {
    std::memcpy(y.sample(i), a.sample(i), a.sample_count() * sizeof(float));
    std::memcpy(y.sample(i) + a.sample_count(), b.sample(i), b.sample_count() * sizeof(float));
  }
}

void concat_backward(const Tensor& d_y, Tensor& d_a, Tensor& d_b) {
  for (int i = 0; i < d_y.n; ++i) {
    std::memcpy(d_a.sample(i), d_y.sample(i), d_a.sample_count() * sizeof(float));
    std::memcpy(d_b.sample(i), d_y.sample(i) + d_a.sample_count(),
                d_b.sample_count() * sizeof(float));
  }
}

}  // namespace fieldbench::nn
