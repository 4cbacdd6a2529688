#pragma once

#include <span>
#include <string_view>

namespace csfdyn {

enum class VolumeUnit { Microliter, Milliliter };
enum class SvConvention { LobeMean, FlushLobe };

std::string_view to_string(VolumeUnit u) noexcept;
std::string_view to_string(SvConvention c) noexcept;
SvConvention parse_sv_convention(std::string_view s);
double volume_scale(VolumeUnit u) noexcept;  // mL -> unit

inline constexpr double kReversalEpsilon = 1e-6;  // mL/s

/// Stroke volume and shape descriptors of one periodic flow curve.
struct SvReport {
  double sv = 0.0;       // in `unit`
  double v_plus = 0.0;   // positive (flush) lobe volume, in `unit`
  double v_minus = 0.0;  // negative (filling) lobe volume, in `unit`
  VolumeUnit unit = VolumeUnit::Milliliter;
  SvConvention convention = SvConvention::LobeMean;
  double net_flow = 0.0;  // mL/min
  double flush_duration_fraction = 0.0;
  int direction_reversals = 0;
  double mean_rr = 0.0;  // ms
};

/// Lobe volumes by the trapezoid rule on the periodic grid, dt = rr / N.
/// Grid intervals that change sign are split at the linearly interpolated
/// zero so each lobe only integrates its own sign.
///   lobe-mean:  sv = (v_plus + v_minus) / 2
///   flush-lobe: sv = v_plus
SvReport stroke_volume(std::span<const double> curve, double rr, VolumeUnit unit = VolumeUnit::Milliliter,
                       SvConvention convention = SvConvention::LobeMean);

/// (sv_insp - sv_exp) / sv_exp.
double sv_modulation(const SvReport& insp, const SvReport& exp);

/// True when the curve has points above +eps and below -eps.
bool reversal_check(std::span<const double> curve, double eps = kReversalEpsilon);

}  // namespace csfdyn
