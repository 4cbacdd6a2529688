#include "csfdyn/pipeline.hpp"

#include <fmt/format.h>

#include "csfdyn/error.hpp"
#include "csfdyn/velocity.hpp"

namespace csfdyn {

std::string_view to_string(CardiacSource s) noexcept {
  return s == CardiacSource::Flow ? "flow" : "plethysmo";
}

CardiacSource parse_cardiac_source(std::string_view s) {
  if (s == "flow") return CardiacSource::Flow;
  if (s == "plethysmo" || s == "pleth") return CardiacSource::Plethysmo;
  fail(Errc::InvalidArgument, fmt::format("unknown cardiac source '{}'", s));
}

void validate(const ProcessConfig& c) {
  validate(c.gating);
  if (!(c.resp.smoothing_window > 0.0)) fail(Errc::InvalidArgument, "resp smoothing window must be > 0");
  if (!(c.resp.hysteresis >= 0.0 && c.resp.hysteresis < 0.5))
    fail(Errc::InvalidArgument, "resp hysteresis must lie in [0, 0.5)");
  if (!(c.resp.min_run >= 0.0)) fail(Errc::InvalidArgument, "resp min run must be >= 0");
  if (c.anchor_frame < 0) fail(Errc::InvalidArgument, "anchor frame must be >= 0");
  if (!(c.refine_threshold >= 0.0 && c.refine_threshold <= 1.0))
    fail(Errc::InvalidThreshold, "refine threshold must lie in [0, 1]");
}

VolumeUnit unit_for(RoiLabel label) noexcept {
  return label == RoiLabel::Aqueduct ? VolumeUnit::Microliter : VolumeUnit::Milliliter;
}

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(name);
  }
}

CurveReport curve_report(const EnsembleCurve& c, VolumeUnit unit, SvConvention conv) {
  CurveReport r;
  r.curve = c;
  r.sv = stroke_volume(c.mean, c.mean_rr, unit, conv);
  r.reversal = reversal_check(c.mean);
  return r;
}

}  // namespace

SubjectResult process_subject(const ProcessInputs& in, const ProcessConfig& config) {
  SubjectResult out;

  stage("ingest", [&] {
    validate(config);
    validate(in.series);
    check_pairing(in.roi, in.series.header);
    if (in.static_mask) check_pairing(*in.static_mask, in.series.header);
    if (in.belt) {
      validate(*in.belt);
      if (in.belt->kind != PhysioKind::RespBelt) fail(Errc::InvalidArgument, "belt trace has the wrong kind");
    }
    if (in.plethysmo) {
      validate(*in.plethysmo);
      if (in.plethysmo->kind != PhysioKind::CardiacPlethysmo)
        fail(Errc::InvalidArgument, "plethysmograph trace has the wrong kind");
    }
    return 0;
  });
  const bool gated = in.series.header.series_kind == SeriesKind::GatedConv;
  out.series_kind = in.series.header.series_kind;
  out.roi_label = in.roi.label;
  out.unit = unit_for(in.roi.label);

  const VelocityField field = stage("velocity", [&] {
    VelocityField f = to_velocity_field(in.series);
    if (in.series.header.encoding == Encoding::PhaseRadians) f = unwrap_temporal(std::move(f), config.anchor_frame);
    if (in.static_mask) {
      auto bc = background_correct(std::move(f), *in.static_mask);
      out.background_offset = bc.offset;
      out.static_temporal_sd = bc.static_temporal_sd;
      if (bc.static_warning)
        out.warnings.push_back(fmt::format("static tissue temporal SD {:.4g} cm/s exceeds 10% of venc",
                                           bc.static_temporal_sd));
      return std::move(bc.field);
    }
    return f;
  });

  out.flow = stage("flow", [&] {
    const RoiMask roi = config.refine ? refine_roi(field, in.roi, config.refine_threshold) : in.roi;
    return extract_flow(field, roi, config.flip_sign ? -1.0 : 1.0);
  });
  out.n_roi_pixels = out.flow.n_roi_pixels;

  if (gated) {
    // a gated series already is the one averaged cycle
    stage("gating", [&] {
      if (config.require_resp) fail(Errc::InvalidArgument, "gated series carry no respiratory phase");
      return 0;
    });
    EnsembleCurve c;
    std::copy(out.flow.q.begin(), out.flow.q.end(), c.mean.begin());
    c.n_cycles = 1;
    c.mean_rr = in.series.header.frame_interval * kPointsPerCycle;
    out.global = stage("metrics", [&] { return curve_report(c, out.unit, config.sv_convention); });
    out.n_unlabeled = 1;
    out.cycles.push_back({0, in.series.header.t0, in.series.header.t0 + c.mean_rr, kPointsPerCycle, 0.0,
                          CycleResp::Unlabeled});
    if (!out.global.reversal) out.warnings.push_back("global curve shows no direction reversal");
    return out;
  }

  std::vector<LabeledCycle> cycles = stage("gating", [&] {
    if (config.require_resp && !in.belt) fail(Errc::MissingInput, "respiratory belt trace required but absent");
    CycleBoundaries b;
    if (config.cardiac_source == CardiacSource::Plethysmo) {
      if (!in.plethysmo) fail(Errc::MissingInput, "plethysmograph timing requested but no trace given");
      b = detect_cycles_from_plethysmo(*in.plethysmo, config.gating);
    } else {
      b = detect_cycles_from_flow(out.flow, config.gating);
    }
    out.boundaries = b;
    if (!in.belt) return split_cycles(b, out.flow);
    const RespPhases phases = classify_resp(*in.belt, config.resp);
    return label_cycles(b, phases, out.flow);
  });
  if (!in.belt) out.warnings.push_back("no respiratory trace: only the global ensemble is available");
  int n_odd = 0;
  for (const auto& c : cycles) {
    out.cycles.push_back({c.id, c.start, c.end, static_cast<int>(c.t.size()), c.inspiration_fraction, c.resp_label});
    if (c.sample_count_warning) ++n_odd;
  }
  if (n_odd > 0) out.warnings.push_back(fmt::format("{} cycles with a sample count outside [4, 24]", n_odd));

  const EnsembleCurves ens = stage("ensemble", [&] {
    std::vector<CanonicalCycle> canon;
    canon.reserve(cycles.size());
    int skipped = 0;
    for (const auto& c : cycles) {
      try {
        canon.push_back(resample_cycle(c, config.interpolation));
      } catch (const Error& e) {
        if (e.code() != Errc::TooFewSamples) throw;
        ++skipped;
      }
    }
    if (skipped > 0) out.warnings.push_back(fmt::format("{} cycles with fewer than 4 samples skipped", skipped));
    return build_ensembles(canon);
  });
  out.n_mixed = ens.n_mixed;
  out.n_unlabeled = ens.n_unlabeled;

  stage("metrics", [&] {
    out.global = curve_report(ens.global, out.unit, config.sv_convention);
    if (ens.insp) out.insp = curve_report(*ens.insp, out.unit, config.sv_convention);
    if (ens.exp) out.exp = curve_report(*ens.exp, out.unit, config.sv_convention);
    if (out.insp && out.exp) out.modulation = sv_modulation(out.insp->sv, out.exp->sv);
    return 0;
  });
  if (in.belt && !out.insp) out.warnings.push_back("no cycle classified as inspiration");
  if (in.belt && !out.exp) out.warnings.push_back("no cycle classified as expiration");
  if (!out.global.reversal) out.warnings.push_back("global curve shows no direction reversal");
  return out;
}

}  // namespace csfdyn
