#pragma once

#include <vector>

#include "csfdyn/ingest.hpp"
#include "csfdyn/velocity.hpp"

namespace csfdyn {

/// mm^2 * cm/s -> mL/s
inline constexpr double kFlowUnit = 0.01;

/// Flow waveform through an ROI. Positive q is craniocaudal (the systolic
/// flush direction).
struct FlowSamples {
  std::vector<double> timestamps;  // ms
  std::vector<double> q;           // mL/s
  RoiLabel roi_label = RoiLabel::Other;
  double pixel_area = 0.0;  // mm^2
  int n_roi_pixels = 0;
  double venc = 0.0;        // cm/s, of the source field
  double frame_interval = 0.0;

  /// |q| bound implied by |v| <= venc; only meaningful before unwrapping.
  double aliasing_bound() const { return n_roi_pixels * pixel_area * venc * kFlowUnit; }
};

/// q(t) = sign * sum_roi v(t) * pixel_area * 0.01. `sign` is +1 or -1 and
/// lets an acquisition whose encoding direction is reversed be flipped.
FlowSamples extract_flow(const VelocityField& field, const RoiMask& roi, double sign = 1.0);

/// Region growing from a seed: keeps pixels 8-connected to seed pixels
/// whose velocity-time curve correlates with the seed-mean curve at
/// `threshold` or better. Pixels with a flat curve never qualify.
RoiMask refine_roi(const VelocityField& field, const RoiMask& seed, double threshold = 0.7);

}  // namespace csfdyn
