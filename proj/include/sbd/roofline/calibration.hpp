#pragma once

#include <string>
#include <vector>

#include "sbd/roofline/roofline.hpp"

namespace sbd::roofline {

// A published reference cell: a slowdown (nfe_speedup == 0) or a wall-clock
// speedup at the given NFE speedup.
struct Anchor {
  std::string name;
  WorkloadPoint point;
  double nfe_speedup = 0.0;
  double expected = 0.0;
  // Acceptance anchors gate; the rest are reported only.
  bool gating = true;
};

const std::vector<Anchor>& reference_anchors();

double evaluate_anchor(const HardwareSpec& hw, const ArchSpec& arch, const Calibration& calib, const Anchor& a);

struct AnchorResidual {
  Anchor anchor;
  double value = 0.0;
  // (value - expected) / expected
  double relative_error = 0.0;
};

struct CalibrationResult {
  Calibration calibration;
  std::vector<AnchorResidual> residuals;
  // Largest |relative_error| over the gating anchors.
  double max_gating_error = 0.0;
  std::size_t candidates = 0;
};

std::vector<AnchorResidual> anchor_residuals(const HardwareSpec& hw, const ArchSpec& arch, const Calibration& calib);

// Every combination of bytes_per_weight {1, 2}, decimal or binary bandwidth,
// activation traffic on or off, and model or head attention scope; keeps the
// one with the smallest worst gating residual (first in sweep order on ties).
CalibrationResult calibrate(const HardwareSpec& hw, const ArchSpec& arch);

}  // namespace sbd::roofline
