#pragma once

#include <string>

#include "fieldbench/core/grid.hpp"

namespace fieldbench::uq {

/// Per-cell predictive mean with the aleatoric/epistemic variance split.
/// total is constructed as ale + epi elementwise, so the decomposition
/// identity holds exactly.
struct UncertainFieldEstimate {
  GridD mean;
  GridD ale;
  GridD epi;
  GridD total;
  std::string method_tag;
};

}  // namespace fieldbench::uq
