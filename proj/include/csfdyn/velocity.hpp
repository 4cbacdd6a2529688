#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "csfdyn/ingest.hpp"

namespace csfdyn {

/// Velocity maps in cm/s with the geometry of the source series.
struct VelocityField {
  SeriesHeader header;  // encoding is always VelocityCmps
  std::vector<double> values;
  bool unwrapped = false;
  bool background_corrected = false;

  std::span<const double> frame(int k) const {
    return std::span<const double>(values).subspan(k * header.pixels_per_frame(),
                                                   header.pixels_per_frame());
  }
  double at(int frame, std::size_t pixel) const {
    return values[frame * header.pixels_per_frame() + pixel];
  }
};

/// v = (phase / pi) * venc. Throws WrongEncoding for velocity-encoded input.
VelocityField phase_to_velocity(const VelocitySeries& series);

/// phase_to_velocity for phase input, a plain widening copy for series that
/// already hold velocities.
VelocityField to_velocity_field(const VelocitySeries& series);

/// Per-pixel temporal unwrapping. The anchor frame is trusted; walking away
/// from it, each step whose raw jump exceeds venc in magnitude shifts the
/// running offset by 2*venc. A constant aliased velocity is indistinguishable
/// from a true one and is left alone.
VelocityField unwrap_temporal(VelocityField field, int anchor_frame = 0);

struct BackgroundCorrection {
  VelocityField field;
  double offset = 0.0;             // cm/s removed from every pixel
  double static_temporal_sd = 0.0; // largest per-pixel temporal SD inside the static mask
  bool static_warning = false;     // static_temporal_sd > 10% of venc
};

/// Removes one global offset: the mean of the static mask over all frames.
BackgroundCorrection background_correct(VelocityField field, const RoiMask& static_mask);

}  // namespace csfdyn
