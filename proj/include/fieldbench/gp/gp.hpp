#pragma once

#include <cstdint>
#include <stdexcept>

#include "fieldbench/perception/observe.hpp"
#include "fieldbench/uq/estimate.hpp"

namespace fieldbench::gp {

/// RBF + white-noise kernel hyperparameters.
struct GPHyper {
  double signal_var = 1.0;   // sigma_f^2
  double length_scale = 5.0; // l, in cells
  double noise_var = 0.01;   // sigma_n^2

  void validate() const;
};

struct GPFitOptions {
  int cap = 1500;       // subsample observations beyond this count
  int n_restarts = 3;   // random restarts around the init (first run is exact init)
  int max_iters = 60;   // L-BFGS iterations per restart
  std::uint64_t seed = 0;
};

struct GPFitResult {
  GPHyper hyper;
  double final_mll = 0.0;
  int n_obs_used = 0;
  bool subsampled = false;
  /// Set when the objective was non-finite at the init and the init was
  /// returned unchanged.
  bool diverged = false;
};

struct CholeskyFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// k(x, x') = sigma_f^2 exp(-||x - x'||^2 / (2 l^2)) + sigma_n^2 [i == j].
/// The white-noise delta applies to index identity, so this free-function
/// form treats distinct arguments as distinct indices unless same_index.
double kernel_eval(double r0, double c0, double r1, double c1, const GPHyper& hyper,
                   bool same_index);

/// Log marginal likelihood of the observation values under the composite
/// kernel over the observation cells, zero prior mean. Cholesky failures
/// escalate diagonal jitter 1e-8 -> 1e-6 -> 1e-4 before raising.
double marginal_log_likelihood(const perception::ObservationSet& obs, const GPHyper& hyper);

/// Data-driven starting point: signal variance from the sample variance of
/// the values, length scale a tenth of the grid diagonal, noise 0.01.
GPHyper default_init(const perception::ObservationSet& obs, GridDims grid);

/// Maximizes the marginal log-likelihood over log-parameters with L-BFGS.
/// The returned hyperparameters never score below the init.
GPFitResult gp_fit(const perception::ObservationSet& obs, const GPHyper& init,
                   const GPFitOptions& opts = {});

/// Full-grid posterior with noise-free RBF cross-covariances: epistemic =
/// posterior variance, aleatoric = sigma_n^2 uniformly, zero prior mean.
uq::UncertainFieldEstimate gp_predict(const perception::ObservationSet& obs,
                                      const GPHyper& hyper, GridDims grid);

}  // namespace fieldbench::gp
