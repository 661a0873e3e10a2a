#include "fieldbench/gp/gp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "fieldbench/core/rng.hpp"

namespace fieldbench::gp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kNoiseFloor = 1e-8;
constexpr double kLog2Pi = 1.8378770664093455;

struct ObsData {
  VectorXd row, col, y;
  int n() const { return int(y.size()); }
};

ObsData collect(const perception::ObservationSet& obs) {
  ObsData d;
  const int n = int(obs.records.size());
  d.row.resize(n);
  d.col.resize(n);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    d.row[i] = obs.records[std::size_t(i)].row;
    d.col[i] = obs.records[std::size_t(i)].col;
    d.y[i] = obs.records[std::size_t(i)].value;
  }
  return d;
}

MatrixXd squared_distances(const ObsData& d) {
  const int n = d.n();
  MatrixXd d2(n, n);
  for (int i = 0; i < n; ++i) {
    d2(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double dr = d.row[i] - d.row[j];
      const double dc = d.col[i] - d.col[j];
      d2(i, j) = d2(j, i) = dr * dr + dc * dc;
    }
  }
  return d2;
}

Eigen::LLT<MatrixXd> chol_with_jitter(MatrixXd& k) {
  Eigen::LLT<MatrixXd> llt(k);
  if (llt.info() == Eigen::Success) return llt;
  for (double jitter : {1e-8, 1e-6, 1e-4}) {
    MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    llt.compute(kj);
    if (llt.info() == Eigen::Success) {
      k = std::move(kj);
      return llt;
    }
  }
  throw CholeskyFailure("Gram matrix not positive definite after jitter escalation");
}

// Objective for the optimizer: negative MLL and its gradient with respect to
// theta = (log sigma_f^2, log l, t) where sigma_n^2 = noise_floor + e^t.
struct MllEval {
  double neg_mll = 0.0;
  Eigen::Vector3d grad = Eigen::Vector3d::Zero();
  bool finite = false;
};

MllEval eval_neg_mll(const ObsData& d, const MatrixXd& d2, const Eigen::Vector3d& theta,
                     bool want_grad) {
  MllEval out;
  const double sv = std::exp(theta[0]);
  const double ls = std::exp(theta[1]);
  const double nv = kNoiseFloor + std::exp(theta[2]);
  if (!std::isfinite(sv) || !std::isfinite(ls) || !std::isfinite(nv)) return out;

  const int n = d.n();
  const MatrixXd r = (-d2 / (2.0 * ls * ls)).array().exp().matrix();
  MatrixXd k = sv * r;
  k.diagonal().array() += nv;

  Eigen::LLT<MatrixXd> llt;
  try {
    llt = chol_with_jitter(k);
  } catch (const CholeskyFailure&) {
    return out;
  }
  const VectorXd alpha = llt.solve(d.y);
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += std::log(llt.matrixLLT()(i, i));
  logdet *= 2.0;
  const double mll = -0.5 * d.y.dot(alpha) - 0.5 * logdet - 0.5 * n * kLog2Pi;
  if (!std::isfinite(mll)) return out;
  out.neg_mll = -mll;
  out.finite = true;

  if (want_grad) {
    const MatrixXd kinv = llt.solve(MatrixXd::Identity(n, n));
    const MatrixXd a = alpha * alpha.transpose() - kinv;
    // d mll / d theta_j = 0.5 tr(A dK/dtheta_j); we return the negative.
    const double g_sv = 0.5 * sv * a.cwiseProduct(r).sum();
    const double g_ls =
        0.5 * (sv / (ls * ls)) * a.cwiseProduct(r.cwiseProduct(d2)).sum();
    const double g_nv = 0.5 * (nv - kNoiseFloor) * a.trace();
    out.grad = Eigen::Vector3d(-g_sv, -g_ls, -g_nv);
  }
  return out;
}

/// Minimal L-BFGS (two-loop recursion, Armijo backtracking). Descent is
/// monotone, so the result never scores worse than the starting point.
struct LbfgsResult {
  Eigen::Vector3d x;
  double f = 0.0;
  bool ok = false;
};

LbfgsResult lbfgs_minimize(const ObsData& d, const MatrixXd& d2, Eigen::Vector3d x,
                           int max_iters) {
  constexpr int kHistory = 8;
  constexpr double kArmijoC1 = 1e-4;

  MllEval cur = eval_neg_mll(d, d2, x, true);
  if (!cur.finite) return {x, 0.0, false};

  std::vector<Eigen::Vector3d> s_hist, y_hist;
  std::vector<double> rho_hist;
  Eigen::Vector3d g = cur.grad;
  double f = cur.neg_mll;

  for (int iter = 0; iter < max_iters; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() < 1e-6) break;

    // two-loop recursion
    Eigen::Vector3d q = g;
    std::vector<double> alpha_coef(s_hist.size());
    for (int i = int(s_hist.size()) - 1; i >= 0; --i) {
      alpha_coef[std::size_t(i)] = rho_hist[std::size_t(i)] * s_hist[std::size_t(i)].dot(q);
      q -= alpha_coef[std::size_t(i)] * y_hist[std::size_t(i)];
    }
    if (!s_hist.empty()) {
      const auto& s = s_hist.back();
      const auto& yv = y_hist.back();
      q *= s.dot(yv) / yv.dot(yv);
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha_coef[i] - beta) * s_hist[i];
    }
    Eigen::Vector3d dir = -q;
    if (dir.dot(g) >= 0.0) dir = -g;  // fall back to steepest descent

    double step = iter == 0 ? std::min(1.0, 1.0 / std::max(1e-12, g.norm())) : 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      const Eigen::Vector3d x_new = x + step * dir;
      const MllEval trial = eval_neg_mll(d, d2, x_new, true);
      if (trial.finite && trial.neg_mll <= f + kArmijoC1 * step * dir.dot(g)) {
        const Eigen::Vector3d s = x_new - x;
        const Eigen::Vector3d yv = trial.grad - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12) {
          s_hist.push_back(s);
          y_hist.push_back(yv);
          rho_hist.push_back(1.0 / sy);
          if (int(s_hist.size()) > kHistory) {
            s_hist.erase(s_hist.begin());
            y_hist.erase(y_hist.begin());
            rho_hist.erase(rho_hist.begin());
          }
        }
        const double improvement = f - trial.neg_mll;
        x = x_new;
        f = trial.neg_mll;
        g = trial.grad;
        accepted = true;
        if (improvement < 1e-10 * (1.0 + std::fabs(f))) iter = max_iters;  // converged
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return {x, f, true};
}

Eigen::Vector3d to_theta(const GPHyper& h) {
  return {std::log(h.signal_var), std::log(h.length_scale),
          std::log(std::max(h.noise_var - kNoiseFloor, 1e-12))};
}

GPHyper from_theta(const Eigen::Vector3d& t) {
  return {std::exp(t[0]), std::exp(t[1]), kNoiseFloor + std::exp(t[2])};
}

}  // namespace

void GPHyper::validate() const {
  if (!(signal_var > 0.0) || !(length_scale > 0.0) || !(noise_var >= 0.0))
    throw std::invalid_argument("GPHyper: need signal_var, length_scale > 0 and noise_var >= 0");
}

double kernel_eval(double r0, double c0, double r1, double c1, const GPHyper& hyper,
                   bool same_index) {
  hyper.validate();
  const double dr = r0 - r1, dc = c0 - c1;
  const double d2 = dr * dr + dc * dc;
  double k = hyper.signal_var *
             std::exp(-d2 / (2.0 * hyper.length_scale * hyper.length_scale));
  if (same_index) k += hyper.noise_var;
  return k;
}

double marginal_log_likelihood(const perception::ObservationSet& obs, const GPHyper& hyper) {
  hyper.validate();
  if (obs.records.empty())
    throw std::invalid_argument("marginal_log_likelihood: no observations");
  const ObsData d = collect(obs);
  const MatrixXd d2 = squared_distances(d);
  const MllEval e = eval_neg_mll(d, d2, to_theta(hyper), false);
  if (!e.finite) throw CholeskyFailure("marginal_log_likelihood: evaluation failed");
  return -e.neg_mll;
}

GPHyper default_init(const perception::ObservationSet& obs, GridDims grid) {
  double mean = 0.0;
  for (const auto& r : obs.records) mean += r.value;
  const double n = double(obs.records.size());
  mean /= std::max(1.0, n);
  double var = 0.0;
  for (const auto& r : obs.records) var += (r.value - mean) * (r.value - mean);
  var = n > 1 ? var / (n - 1) : 1.0;

  GPHyper h;
  h.signal_var = std::max(var, 1e-4);
  h.length_scale = 0.1 * std::hypot(double(grid.rows - 1), double(grid.cols - 1));
  h.noise_var = 0.01;
  return h;
}

GPFitResult gp_fit(const perception::ObservationSet& obs, const GPHyper& init,
                   const GPFitOptions& opts) {
  init.validate();
  if (int(obs.records.size()) < 2)
    throw std::invalid_argument("gp_fit: need at least 2 observations");
  if (opts.cap < 2 || opts.n_restarts < 1 || opts.max_iters < 1)
    throw std::invalid_argument("gp_fit: invalid options");

  GPFitResult res;
  perception::ObservationSet sub;
  const perception::ObservationSet* used = &obs;
  if (int(obs.records.size()) > opts.cap) {
    std::vector<std::size_t> idx(obs.records.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(mix_seed(opts.seed, 0x5ab5));
    for (int i = 0; i < opts.cap; ++i) {
      const auto j = std::size_t(rng.uniform_int(i, std::int64_t(idx.size()) - 1));
      std::swap(idx[std::size_t(i)], idx[j]);
    }
    idx.resize(std::size_t(opts.cap));
    std::sort(idx.begin(), idx.end());
    for (auto i : idx) sub.records.push_back(obs.records[i]);
    used = &sub;
    res.subsampled = true;
  }
  res.n_obs_used = int(used->records.size());

  const ObsData d = collect(*used);
  const MatrixXd d2 = squared_distances(d);
  const Eigen::Vector3d theta0 = to_theta(init);

  const MllEval at_init = eval_neg_mll(d, d2, theta0, false);
  if (!at_init.finite) {
    res.hyper = init;
    res.final_mll = std::numeric_limits<double>::quiet_NaN();
    res.diverged = true;
    return res;
  }

  Eigen::Vector3d best_x = theta0;
  double best_f = at_init.neg_mll;
  Rng restart_rng(mix_seed(opts.seed, 0x4e57a47));
  for (int r = 0; r < opts.n_restarts; ++r) {
    Eigen::Vector3d x0 = theta0;
    if (r > 0)
      for (int j = 0; j < 3; ++j) x0[j] += restart_rng.uniform(-1.0, 1.0);
    const LbfgsResult lr = lbfgs_minimize(d, d2, x0, opts.max_iters);
    if (lr.ok && lr.f < best_f) {
      best_f = lr.f;
      best_x = lr.x;
    }
  }
  res.hyper = from_theta(best_x);
  res.final_mll = -best_f;
  return res;
}

uq::UncertainFieldEstimate gp_predict(const perception::ObservationSet& obs,
                                      const GPHyper& hyper, GridDims grid) {
  hyper.validate();
  if (obs.records.empty()) throw std::invalid_argument("gp_predict: no observations");
  const ObsData d = collect(obs);
  const int n = d.n();

  const double ls2 = 2.0 * hyper.length_scale * hyper.length_scale;
  MatrixXd k(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double dr = d.row[i] - d.row[j];
      const double dc = d.col[i] - d.col[j];
      k(i, j) = k(j, i) = hyper.signal_var * std::exp(-(dr * dr + dc * dc) / ls2);
    }
    k(i, i) += hyper.noise_var;
  }
  const Eigen::LLT<MatrixXd> llt = chol_with_jitter(k);
  const VectorXd alpha = llt.solve(d.y);

  // Cross-covariance of every grid cell against the observations, solved in
  // one triangular pass: V = L^-1 Kstar, var = sigma_f^2 - colwise |V|^2.
  const std::int64_t cells = grid.cell_count();
  MatrixXd kstar(n, cells);
  for (std::int64_t cell = 0; cell < cells; ++cell) {
    const double cr = double(cell / grid.cols);
    const double cc = double(cell % grid.cols);
    for (int i = 0; i < n; ++i) {
      const double dr = d.row[i] - cr;
      const double dc = d.col[i] - cc;
      kstar(i, cell) = hyper.signal_var * std::exp(-(dr * dr + dc * dc) / ls2);
    }
  }

  uq::UncertainFieldEstimate est;
  est.method_tag = "gp";
  est.mean = GridD(grid);
  est.ale = GridD(grid);
  est.epi = GridD(grid);
  est.total = GridD(grid);

  const VectorXd mean = kstar.transpose() * alpha;
  llt.matrixL().solveInPlace(kstar);
  for (std::int64_t cell = 0; cell < cells; ++cell) {
    const double var = hyper.signal_var - kstar.col(cell).squaredNorm();
    est.mean.v[std::size_t(cell)] = mean[cell];
    est.epi.v[std::size_t(cell)] = std::max(0.0, var);
    est.ale.v[std::size_t(cell)] = hyper.noise_var;
    est.total.v[std::size_t(cell)] =
        est.ale.v[std::size_t(cell)] + est.epi.v[std::size_t(cell)];
  }
  return est;
}

}  // namespace fieldbench::gp
