#pragma once

#include <filesystem>

#include "fieldbench/metrics/metrics.hpp"

namespace fieldbench::bench {

/// Renders a calibration curve (per-bin mean empirical error against mean
/// predicted uncertainty) with the perfect-calibration diagonal and writes
/// it as a PNG. Presentation only; nothing downstream consumes the image.
void write_calibration_png(const std::filesystem::path& path,
                           const metrics::CalibrationCurve& curve);

}  // namespace fieldbench::bench
