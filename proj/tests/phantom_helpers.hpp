#pragma once

#include <cmath>
#include <algorithm>
#include <numbers>

#include "csfdyn/flow.hpp"
#include "csfdyn/phantom.hpp"

// Phase noise giving the requested flow SNR (peak |Q| over the SD of the
// summed ROI noise) for a plug-profile phantom.
inline double noise_for_snr(const csfdyn::phantom::PhantomSpec& s, double snr) {
  const csfdyn::phantom::PhantomModel m(s);
  double peak = 0;
  for (int i = 0; i < 1000; ++i) peak = std::max(peak, std::abs(m.amplitude() * m.shape(i / 1000.0)));
  const double n = static_cast<double>(m.lumen_mask().count());
  const double area = s.grid.spacing * s.grid.spacing;
  const double sigma_q = peak / snr;
  return sigma_q / (std::sqrt(n) * area * csfdyn::kFlowUnit) * std::numbers::pi / s.acquisition.venc;
}
