#include "csfdyn/flow.hpp"

#include <cmath>
#include <deque>

#include <fmt/format.h>

#include "csfdyn/error.hpp"
#include "csfdyn/signal.hpp"

namespace csfdyn {

FlowSamples extract_flow(const VelocityField& field, const RoiMask& roi, double sign) {
  check_pairing(roi, field.header);
  if (sign != 1.0 && sign != -1.0) fail(Errc::InvalidArgument, "flow sign must be +1 or -1");
  const auto idx = roi.indices();
  const std::size_t ppf = field.header.pixels_per_frame();
  const double area = field.header.pixel_area();

  FlowSamples out;
  out.roi_label = roi.label;
  out.pixel_area = area;
  out.n_roi_pixels = static_cast<int>(idx.size());
  out.venc = field.header.venc;
  out.frame_interval = field.header.frame_interval;
  out.timestamps.resize(static_cast<std::size_t>(field.header.n_frames));
  out.q.resize(out.timestamps.size());
  for (int k = 0; k < field.header.n_frames; ++k) {
    const double* frame = field.values.data() + k * ppf;
    double s = 0.0;
    for (std::size_t p : idx) s += frame[p];
    out.timestamps[k] = field.header.timestamp(k);
    out.q[k] = sign * s * area * kFlowUnit;
  }
  return out;
}

RoiMask refine_roi(const VelocityField& field, const RoiMask& seed, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    fail(Errc::InvalidThreshold, fmt::format("threshold {} outside [0, 1]", threshold));
  check_pairing(seed, field.header);

  const int w = field.header.width;
  const int h = field.header.height;
  const int n = field.header.n_frames;
  const std::size_t ppf = field.header.pixels_per_frame();
  const auto seed_idx = seed.indices();

  std::vector<double> reference(static_cast<std::size_t>(n), 0.0);
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t p : seed_idx) s += field.values[k * ppf + p];
    reference[k] = s / static_cast<double>(seed_idx.size());
  }

  std::vector<double> curve(static_cast<std::size_t>(n));
  std::vector<signed char> verdict(ppf, -1);  // -1 unknown, 0 reject, 1 accept
  auto qualifies = [&](std::size_t p) {
    if (verdict[p] < 0) {
      for (int k = 0; k < n; ++k) curve[k] = field.values[k * ppf + p];
      const double r = signal::pearson(curve, reference);
      verdict[p] = (std::isfinite(r) && r >= threshold) ? 1 : 0;
    }
    return verdict[p] == 1;
  };

  RoiMask out(w, h, seed.label);
  std::deque<std::size_t> frontier;
  for (std::size_t p : seed_idx) {
    if (qualifies(p)) {
      out.pixels[p] = 1;
      frontier.push_back(p);
    }
  }
  while (!frontier.empty()) {
    const std::size_t p = frontier.front();
    frontier.pop_front();
    const int x = static_cast<int>(p % w);
    const int y = static_cast<int>(p / w);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
        if (out.pixels[q] || !qualifies(q)) continue;
        out.pixels[q] = 1;
        frontier.push_back(q);
      }
    }
  }
  if (out.count() == 0) fail(Errc::EmptyMask, "no pixel correlates with the seed curve");
  return out;
}

}  // namespace csfdyn
