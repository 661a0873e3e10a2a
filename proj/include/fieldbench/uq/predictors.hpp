#pragma once

#include <cstdint>
#include <vector>

#include "fieldbench/nn/backbone.hpp"
#include "fieldbench/perception/observe.hpp"
#include "fieldbench/uq/estimate.hpp"

namespace fieldbench::uq {

struct DegenerateEvidence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Packs (mask, value) into the 2-channel network input, batch size 1.
nn::Tensor to_input_tensor(const perception::InputPair& input);

/// T stochastic passes with dropout active (pass t uses mask stream
/// mix(seed, t)): mean over passes, epistemic = population variance of the
/// pass means, aleatoric = mean of exp(log-variance head) over passes.
UncertainFieldEstimate mcd_predict(nn::UNetBackbone& model, const perception::InputPair& input,
                                   int t_passes, std::uint64_t seed);

/// Deterministic pass per member: mean of member means, epistemic =
/// population variance of member means, aleatoric = mean of member
/// aleatoric variances.
UncertainFieldEstimate ensemble_predict(std::vector<nn::UNetBackbone*> members,
                                        const perception::InputPair& input);

/// Closed-form NIG decomposition for one cell: mean = gamma,
/// ale = beta / (alpha - 1), epi = beta / (nu (alpha - 1)).
/// Raises DegenerateEvidence when alpha <= 1 + 1e-6.
struct CellDecomposition {
  double mean, ale, epi;
};
CellDecomposition edl_decompose_cell(double gamma, double nu, double alpha, double beta);

/// Single deterministic pass of an evidential-head model, decomposed with
/// edl_decompose_cell per cell.
UncertainFieldEstimate edl_predict(nn::UNetBackbone& model,
                                   const perception::InputPair& input);

}  // namespace fieldbench::uq
