#pragma once

#include <filesystem>
#include <vector>

#include "fieldbench/bench/config.hpp"

namespace fieldbench::bench {

struct ReportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ReportOutputs {
  std::filesystem::path text;
  std::vector<std::filesystem::path> csvs;  // one per metric
};

/// Combines evaluation result directories into methods x datasets comparison
/// tables (one per metric: rmse, uce, time_ms), pooling per-sample rows when
/// several runs cover the same (method, dataset) cell. The best (lowest)
/// entry per dataset column is starred in the text table; missing cells
/// render as "-". Result directories with a different schema_version are
/// rejected.
ReportOutputs run_report(const std::vector<std::filesystem::path>& results_dirs,
                         const std::filesystem::path& out_dir);

}  // namespace fieldbench::bench
