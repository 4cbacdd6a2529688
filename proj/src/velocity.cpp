#include "csfdyn/velocity.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "csfdyn/error.hpp"
#include "csfdyn/signal.hpp"

namespace csfdyn {

VelocityField phase_to_velocity(const VelocitySeries& series) {
  if (series.header.encoding != Encoding::PhaseRadians)
    fail(Errc::WrongEncoding, "phase_to_velocity needs a PHASE_RADIANS series");
  VelocityField field;
  field.header = series.header;
  field.header.encoding = Encoding::VelocityCmps;
  field.values.resize(series.frames.size());
  const double scale = series.header.venc / std::numbers::pi;
  for (std::size_t i = 0; i < series.frames.size(); ++i)
    field.values[i] = static_cast<double>(series.frames[i]) * scale;
  return field;
}

VelocityField to_velocity_field(const VelocitySeries& series) {
  if (series.header.encoding == Encoding::PhaseRadians) return phase_to_velocity(series);
  VelocityField field;
  field.header = series.header;
  field.values.assign(series.frames.begin(), series.frames.end());
  return field;
}

VelocityField unwrap_temporal(VelocityField field, int anchor_frame) {
  const int n = field.header.n_frames;
  if (anchor_frame < 0 || anchor_frame >= n)
    fail(Errc::InvalidArgument, fmt::format("anchor frame {} outside [0, {})", anchor_frame, n));
  if (field.unwrapped) return field;

  const std::size_t ppf = field.header.pixels_per_frame();
  const double venc = field.header.venc;
  std::vector<double> raw(static_cast<std::size_t>(n));
  for (std::size_t p = 0; p < ppf; ++p) {
    for (int k = 0; k < n; ++k) raw[k] = field.values[k * ppf + p];
    double offset = 0.0;
    for (int k = anchor_frame + 1; k < n; ++k) {
      const double jump = raw[k] - raw[k - 1];
      if (jump > venc) offset -= 2.0 * venc;
      else if (jump < -venc) offset += 2.0 * venc;
      field.values[k * ppf + p] = raw[k] + offset;
    }
    offset = 0.0;
    for (int k = anchor_frame - 1; k >= 0; --k) {
      const double jump = raw[k] - raw[k + 1];
      if (jump > venc) offset -= 2.0 * venc;
      else if (jump < -venc) offset += 2.0 * venc;
      field.values[k * ppf + p] = raw[k] + offset;
    }
  }
  field.unwrapped = true;
  return field;
}

BackgroundCorrection background_correct(VelocityField field, const RoiMask& static_mask) {
  if (static_mask.label != RoiLabel::StaticTissue)
    fail(Errc::InvalidArgument, "background reference mask must be labelled STATIC_TISSUE");
  check_pairing(static_mask, field.header);
  const auto idx = static_mask.indices();
  const std::size_t ppf = field.header.pixels_per_frame();
  const int n = field.header.n_frames;

  signal::CompensatedSum total;
  double worst_sd = 0.0;
  std::vector<double> series(static_cast<std::size_t>(n));
  for (std::size_t p : idx) {
    for (int k = 0; k < n; ++k) {
      series[k] = field.values[k * ppf + p];
      total.add(series[k]);
    }
    worst_sd = std::max(worst_sd, signal::stddev(series));
  }
  const double offset = total.value() / static_cast<double>(idx.size() * static_cast<std::size_t>(n));
  for (double& v : field.values) v -= offset;
  field.background_corrected = true;

  BackgroundCorrection out;
  out.offset = offset;
  out.static_temporal_sd = worst_sd;
  out.static_warning = worst_sd > 0.1 * field.header.venc;
  out.field = std::move(field);
  return out;
}

}  // namespace csfdyn
