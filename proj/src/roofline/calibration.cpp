#include "sbd/roofline/calibration.hpp"

#include <cmath>

namespace sbd::roofline {

const std::vector<Anchor>& reference_anchors() {
  static const std::vector<Anchor> anchors{
      {"slowdown b=1 k=16 L=4096", {1, 16, 4096}, 0.0, 1.004, true},
      {"slowdown b=8 k=64 L=4096", {8, 64, 4096}, 0.0, 1.903, true},
      {"slowdown b=16 k=64 L=16", {16, 64, 16}, 0.0, 3.799, true},
      {"speedup b=1 nfe=4 k=16 L=4096", {1, 16, 4096}, 4.0, 3.982, true},
      {"speedup b=8 nfe=8 k=64 L=4096", {8, 64, 4096}, 8.0, 3.736, true},
      {"slowdown b=1 k=64 L=4194304", {1, 64, 4194304}, 0.0, 1.029, false},
  };
  return anchors;
}

double evaluate_anchor(const HardwareSpec& hw, const ArchSpec& arch, const Calibration& calib, const Anchor& a) {
  if (a.nfe_speedup == 0.0) return slowdown(hw, arch, a.point, calib);
  return wallclock_speedup(hw, arch, a.point, a.nfe_speedup, calib);
}

std::vector<AnchorResidual> anchor_residuals(const HardwareSpec& hw, const ArchSpec& arch, const Calibration& calib) {
  std::vector<AnchorResidual> out;
  for (const Anchor& a : reference_anchors()) {
    const double v = evaluate_anchor(hw, arch, calib, a);
    out.push_back({a, v, (v - a.expected) / a.expected});
  }
  return out;
}

CalibrationResult calibrate(const HardwareSpec& hw, const ArchSpec& arch) {
  hw.validate();
  arch.validate();
  CalibrationResult best;
  bool have = false;
  for (double bpw : {1.0, 2.0}) {
    for (double scale : {1.0, kBinaryBandwidthScale}) {
      for (auto act : {ActivationTraffic::None, ActivationTraffic::InputOutput}) {
        for (auto scope : {AttentionScope::Model, AttentionScope::Head}) {
          const Calibration c{bpw, scale, act, scope};
          CalibrationResult r;
          r.calibration = c;
          r.residuals = anchor_residuals(hw, arch, c);
          for (const AnchorResidual& res : r.residuals) {
            if (res.anchor.gating) r.max_gating_error = std::max(r.max_gating_error, std::abs(res.relative_error));
          }
          ++best.candidates;
          if (!have || r.max_gating_error < best.max_gating_error) {
            const std::size_t n = best.candidates;
            best = std::move(r);
            best.candidates = n;
            have = true;
          }
        }
      }
    }
  }
  return best;
}

}  // namespace sbd::roofline
