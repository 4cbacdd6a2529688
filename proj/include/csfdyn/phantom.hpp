#pragma once

// Forward model of a phase-contrast acquisition of pulsatile CSF with known
// ground truth.
//
// Flow through the lumen:
//   Q(t) = A * shape(u(t)) * (1 + m * [t in inspiration]) + drift(t)
// with u the phase inside the current cardiac cycle (each cycle has its own
// RR) and shape(u) = sum_k b_k sin(2 pi k u), zero at the cycle onset.
// A is chosen so that the lobe-mean stroke volume at rr_mean equals sv_true.
// Velocity is profile_weight(pixel) * v_center(t), v_center scaled so the
// pixel sum reproduces Q(t) exactly; phase = wrap(pi * (v + offset) / venc
// + noise).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "csfdyn/ensemble.hpp"
#include "csfdyn/gating.hpp"
#include "csfdyn/ingest.hpp"

namespace csfdyn::phantom {

enum class Profile { Plug, Poiseuille };

struct LumenSpec {
  double center_x = 32.0;  // px, pixel centres sit on integer coordinates
  double center_y = 32.0;
  double radius = 3.0;     // px
  Profile profile = Profile::Plug;
};

struct GridSpec {
  int width = 64;
  int height = 64;
  double spacing = 1.2;    // mm
  double thickness = 4.0;  // mm
};

struct CardiacSpec {
  double rr_mean = 1143.0;     // ms
  double rr_jitter_sd = 0.0;   // ms
  std::vector<double> harmonics{1.0, 0.3};  // sine coefficients b_1, b_2, ...
  double sv_true = 0.05;       // mL, lobe-mean SV of a cycle of length rr_mean
  double first_onset = 400.0;  // ms after t0
};

struct RespSpec {
  double period = 5000.0;        // ms
  double insp_fraction = 0.5;    // of the period
  double modulation_insp = 0.0;  // fractional amplitude gain during inspiration
  double belt_noise_sd = 0.0;    // belt units (peak-to-peak swing is 1)
  double belt_interval = 10.0;   // ms
  double first_insp = 1000.0;    // ms after t0 where an inspiration starts
  double drift_amplitude = 0.0;  // mL/s, additive slow flow drift
  double drift_period = 30000.0; // ms
};

struct AcquisitionSpec {
  double venc = 10.0;             // cm/s
  double frame_interval = 88.0;   // ms
  double duration = 80000.0;      // ms
  double t0 = 0.0;                // ms
  double noise_sd_phase = 0.0;    // rad
  double background_offset = 0.0; // cm/s, every pixel, before wrapping
  SeriesKind series_kind = SeriesKind::ContinuousEpi;
  double pleth_interval = 10.0;   // ms
};

struct PhantomSpec {
  LumenSpec lumen;
  GridSpec grid;
  CardiacSpec cardiac;
  RespSpec resp;
  AcquisitionSpec acquisition;
  RoiLabel roi_label = RoiLabel::Aqueduct;
  std::uint64_t seed = 1;
};

/// Defaults for the two analysis sites at EPI-PC settings.
PhantomSpec aqueduct_spec();
PhantomSpec spinal_spec();

/// Throws InvalidSpec.
void validate(const PhantomSpec& spec);

nlohmann::ordered_json to_json(const PhantomSpec& spec);
/// Missing keys keep their defaults; unknown keys are rejected.
PhantomSpec spec_from_json(const nlohmann::json& j, PhantomSpec base = {});

struct TruthCycle {
  double start = 0.0;
  double end = 0.0;
  double insp_fraction = 0.0;  // fraction of frame timestamps in inspiration
  CycleResp label = CycleResp::Mixed;
};

struct GroundTruth {
  std::vector<double> onsets;     // every onset inside the acquisition window
  std::vector<TruthCycle> cycles; // complete cycles inside the window
  double amplitude = 0.0;         // A, mL/s
  double lobe_integral = 0.0;     // (1/2) integral of |shape| over one phase unit
  double sv_true = 0.0;           // mL
  double sv_insp = 0.0;           // mL
  double sv_exp = 0.0;            // mL
  double peak_center_velocity = 0.0;  // cm/s, largest |v_center| over the frames
  std::vector<double> q_frames;   // analytic Q at frame times, mL/s
};

nlohmann::ordered_json to_json(const GroundTruth& truth);

/// Deterministic evaluation of every analytic quantity of a phantom.
class PhantomModel {
 public:
  explicit PhantomModel(PhantomSpec spec);

  const PhantomSpec& spec() const { return spec_; }
  double flow(double t) const;             // mL/s
  double cardiac_flow(double t) const;     // A * shape(u), no modulation or drift
  bool inspiration(double t) const;
  double belt(double t) const;             // noise-free, swing 0..1
  double pleth(double t) const;            // noise-free pulse train
  double center_velocity(double t) const;  // cm/s
  double shape(double u) const;

  /// Cardiac onsets covering the acquisition window plus one cycle either side.
  const std::vector<double>& schedule() const { return onsets_; }
  double amplitude() const { return amplitude_; }
  double lobe_integral() const { return lobe_integral_; }
  int n_frames() const;
  double frame_time(int k) const;

  const std::vector<double>& weights() const { return weights_; }  // per pixel, 0 outside
  RoiMask lumen_mask() const;
  RoiMask static_mask() const;

 private:
  std::size_t cycle_index(double t) const;

  PhantomSpec spec_;
  std::vector<double> onsets_;
  std::vector<double> weights_;
  double weight_sum_ = 0.0;
  double amplitude_ = 0.0;
  double lobe_integral_ = 0.0;
};

struct PhantomDataset {
  VelocitySeries series;
  PhysioTrace belt;
  PhysioTrace plethysmo;
  RoiMask lumen_mask;
  RoiMask static_mask;
  GroundTruth truth;
};

PhantomDataset generate(const PhantomSpec& spec);

struct GatedSeries {
  VelocitySeries series;  // 32 frames, GATED_CONV
  Curve32 binned_flow{};  // noise-free bin means of Q, mL/s
  int n_cycles = 0;
  double mean_rr = 0.0;
};

/// Conv-PC analogue: every simulated cycle phase-binned onto 32 frames and
/// averaged, noise included, so respiratory modulation blurs into one curve.
GatedSeries generate_gated(const PhantomSpec& spec);

struct CohortJitter {
  double rr_sd_fraction = 0.10;
  double sv_sd_fraction = 0.30;  // log-normal spread
  double modulation_sd = 0.01;   // absolute
};

struct CohortSubject {
  std::string id;
  PhantomSpec epi;   // continuous acquisition
  PhantomSpec conv;  // gated acquisition of the same subject
};

/// Seeded subject variations of `base` (RR, SV and modulation). Each
/// subject's conv spec is its epi spec switched to GATED_CONV at `conv_venc`
/// with an independent noise seed.
std::vector<CohortSubject> cohort_specs(int n_subjects, const CohortJitter& jitter, std::uint64_t seed,
                                        const PhantomSpec& base, double conv_venc = 60.0);

struct CohortDataset {
  std::string id;
  PhantomDataset epi;
  GatedSeries conv;
};

std::vector<CohortDataset> cohort(int n_subjects, const CohortJitter& jitter, std::uint64_t seed,
                                  const PhantomSpec& base, double conv_venc = 60.0);

}  // namespace csfdyn::phantom
