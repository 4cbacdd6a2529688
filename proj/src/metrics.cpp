#include "csfdyn/metrics.hpp"

#include <cmath>

#include <fmt/format.h>

#include "csfdyn/error.hpp"
#include "csfdyn/signal.hpp"

namespace csfdyn {

std::string_view to_string(VolumeUnit u) noexcept { return u == VolumeUnit::Microliter ? "uL" : "mL"; }

std::string_view to_string(SvConvention c) noexcept {
  return c == SvConvention::LobeMean ? "lobe-mean" : "flush-lobe";
}

SvConvention parse_sv_convention(std::string_view s) {
  if (s == "lobe-mean") return SvConvention::LobeMean;
  if (s == "flush-lobe") return SvConvention::FlushLobe;
  fail(Errc::InvalidArgument, fmt::format("unknown SV convention '{}'", s));
}

double volume_scale(VolumeUnit u) noexcept { return u == VolumeUnit::Microliter ? 1000.0 : 1.0; }

SvReport stroke_volume(std::span<const double> curve, double rr, VolumeUnit unit,
                       SvConvention convention) {
  if (curve.size() < 2) fail(Errc::InvalidArgument, "flow curve needs at least 2 points");
  if (!(std::isfinite(rr) && rr > 0.0)) fail(Errc::NonFinite, "RR must be finite and > 0");
  for (double v : curve)
    if (!std::isfinite(v)) fail(Errc::NonFinite, "flow curve holds a non-finite value");

  const std::size_t n = curve.size();
  const double dt = rr / static_cast<double>(n) / 1000.0;  // s
  signal::CompensatedSum plus, minus;
  int positive_points = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = curve[k];
    const double b = curve[(k + 1) % n];
    if (a > 0.0) ++positive_points;
    if ((a >= 0.0 && b >= 0.0) || (a <= 0.0 && b <= 0.0)) {
      const double area = 0.5 * (a + b) * dt;
      if (area > 0.0) plus.add(area);
      else minus.add(-area);
    } else {
      // split at the zero of the chord
      const double z = a / (a - b);
      const double first = 0.5 * a * z * dt;
      const double second = 0.5 * b * (1.0 - z) * dt;
      if (a > 0.0) {
        plus.add(first);
        minus.add(-second);
      } else {
        minus.add(-first);
        plus.add(second);
      }
    }
  }

  // sign changes around the loop, ignoring points within the reversal band
  int reversals = 0;
  int first_sign = 0, last_sign = 0;
  for (double v : curve) {
    const int s = v > kReversalEpsilon ? 1 : (v < -kReversalEpsilon ? -1 : 0);
    if (s == 0) continue;
    if (first_sign == 0) first_sign = s;
    else if (s != last_sign) ++reversals;
    last_sign = s;
  }
  if (first_sign != 0 && last_sign != first_sign) ++reversals;

  const double scale = volume_scale(unit);
  SvReport r;
  r.unit = unit;
  r.convention = convention;
  r.v_plus = plus.value() * scale;
  r.v_minus = minus.value() * scale;
  r.sv = convention == SvConvention::LobeMean ? 0.5 * (r.v_plus + r.v_minus) : r.v_plus;
  r.net_flow = (plus.value() - minus.value()) / (rr / 60000.0);
  r.flush_duration_fraction = static_cast<double>(positive_points) / static_cast<double>(n);
  r.direction_reversals = reversals;
  r.mean_rr = rr;
  return r;
}

double sv_modulation(const SvReport& insp, const SvReport& exp) {
  if (insp.unit != exp.unit || insp.convention != exp.convention)
    fail(Errc::UnitMismatch, "inspiration and expiration reports use different units or conventions");
  if (!(exp.sv > 0.0) || !std::isfinite(exp.sv))
    fail(Errc::DivisionByZeroSv, "expiration stroke volume is zero");
  return (insp.sv - exp.sv) / exp.sv;
}

bool reversal_check(std::span<const double> curve, double eps) {
  bool up = false, down = false;
  for (double v : curve) {
    if (!std::isfinite(v)) fail(Errc::NonFinite, "flow curve holds a non-finite value");
    up = up || v > eps;
    down = down || v < -eps;
  }
  return up && down;
}

}  // namespace csfdyn
