#pragma once

// One subject end to end: phase series -> velocity -> flow -> cycles ->
// 32-point ensembles -> stroke volumes. Module errors leave with the name of
// the stage that raised them.

#include <optional>
#include <string>
#include <vector>

#include "csfdyn/ensemble.hpp"
#include "csfdyn/flow.hpp"
#include "csfdyn/gating.hpp"
#include "csfdyn/ingest.hpp"
#include "csfdyn/metrics.hpp"

namespace csfdyn {

enum class CardiacSource { Flow, Plethysmo };

std::string_view to_string(CardiacSource s) noexcept;
CardiacSource parse_cardiac_source(std::string_view s);

struct ProcessConfig {
  GatingParams gating;
  RespParams resp;
  CardiacSource cardiac_source = CardiacSource::Flow;
  Interpolation interpolation = Interpolation::PeriodicSpline;
  SvConvention sv_convention = SvConvention::LobeMean;
  bool flip_sign = false;
  int anchor_frame = 0;
  bool refine = false;           // grow the ROI by temporal correlation
  double refine_threshold = 0.7;
  bool require_resp = false;     // refuse to run without a belt trace
};

void validate(const ProcessConfig& config);

struct ProcessInputs {
  VelocitySeries series;
  RoiMask roi;
  std::optional<RoiMask> static_mask;
  std::optional<PhysioTrace> belt;
  std::optional<PhysioTrace> plethysmo;
};

struct CycleSummary {
  int id = 0;
  double start = 0.0;
  double end = 0.0;
  int n_samples = 0;
  double inspiration_fraction = 0.0;
  CycleResp resp_label = CycleResp::Unlabeled;
};

struct CurveReport {
  EnsembleCurve curve;
  SvReport sv;
  bool reversal = false;
};

struct SubjectResult {
  RoiLabel roi_label = RoiLabel::Other;
  SeriesKind series_kind = SeriesKind::ContinuousEpi;
  VolumeUnit unit = VolumeUnit::Milliliter;
  int n_roi_pixels = 0;
  double background_offset = 0.0;  // cm/s, 0 without a static mask
  double static_temporal_sd = 0.0;
  FlowSamples flow;
  std::optional<CycleBoundaries> boundaries;  // absent for gated input
  std::vector<CycleSummary> cycles;
  int n_mixed = 0;
  int n_unlabeled = 0;
  CurveReport global;
  std::optional<CurveReport> insp;
  std::optional<CurveReport> exp;
  std::optional<double> modulation;  // (sv_insp - sv_exp) / sv_exp
  std::vector<std::string> warnings;
};

/// Aqueduct volumes in uL, everything else in mL.
VolumeUnit unit_for(RoiLabel label) noexcept;

SubjectResult process_subject(const ProcessInputs& inputs, const ProcessConfig& config = {});

}  // namespace csfdyn
