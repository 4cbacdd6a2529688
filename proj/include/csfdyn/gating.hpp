#pragma once

// Retrospective double gating: cardiac cycles found in the flow signal (or a
// plethysmograph), each cycle then tagged with the respiratory phase the
// belt trace puts it in.

#include <cstdint>
#include <string_view>
#include <vector>

#include "csfdyn/flow.hpp"
#include "csfdyn/ingest.hpp"

namespace csfdyn {

enum class CycleMethod { FlowPeaks, Plethysmo };
enum class RespLabel : std::uint8_t { Inspiration, Expiration };
enum class CycleResp { Inspiration, Expiration, Mixed, Unlabeled };

std::string_view to_string(CycleMethod m) noexcept;
std::string_view to_string(RespLabel l) noexcept;
std::string_view to_string(CycleResp r) noexcept;

struct GatingParams {
  double min_rr = 300.0;   // ms, also the refractory period between peaks
  double max_rr = 2000.0;  // ms, also the detrend window
  double prominence_fraction = 0.5;  // of the 75th percentile of positive excursions
  double max_rr_cv = 0.35;
  int min_cycles = 5;
};

/// Throws InvalidArgument for out-of-range parameters.
void validate(const GatingParams& params);

struct CycleBoundaries {
  std::vector<double> onsets;  // ms, strictly increasing
  std::vector<double> peaks;   // ms, systolic peak following each onset
  /// One flag per consecutive onset pair: interval inside [min_rr, max_rr].
  /// Pairs outside the window (a missed or split beat) are not cycles.
  std::vector<std::uint8_t> interval_ok;
  CycleMethod method = CycleMethod::FlowPeaks;
  double mean_rr = 0.0;  // over accepted intervals
  double rr_cv = 0.0;
};

CycleBoundaries detect_cycles_from_flow(const FlowSamples& flow, const GatingParams& params = {});
CycleBoundaries detect_cycles_from_plethysmo(const PhysioTrace& trace,
                                             const GatingParams& params = {});

struct RespParams {
  double smoothing_window = 500.0;  // ms, centered moving average
  double hysteresis = 0.05;         // fraction of the smoothed signal range
  double min_run = 200.0;           // ms, shorter runs are merged away
};

struct RespPhases {
  std::vector<RespLabel> labels;  // one per trace sample
  double t0 = 0.0;
  double sample_interval = 0.0;
  double smoothing_window = 0.0;
  double hysteresis = 0.0;

  /// Label of the trace sample nearest to t (clamped to the trace).
  RespLabel at(double t) const;
  double end_time() const { return t0 + static_cast<double>(labels.size() - 1) * sample_interval; }
};

/// Rising smoothed belt signal is inspiration, falling is expiration. A
/// Schmitt trigger confirms each turn once the signal has retreated by the
/// hysteresis band; the label change is then placed at the extremum itself.
RespPhases classify_resp(const PhysioTrace& trace, const RespParams& params = {});

struct LabeledCycle {
  int id = 0;  // index of the onset that starts the cycle
  double start = 0.0;
  double end = 0.0;
  std::vector<double> t;
  std::vector<double> q;
  CycleResp resp_label = CycleResp::Unlabeled;
  double inspiration_fraction = 0.0;
  bool sample_count_warning = false;  // outside [4, 24] samples

  double rr() const { return end - start; }
};

inline constexpr double kInspirationMajority = 0.7;
inline constexpr double kExpirationMajority = 0.3;

/// Splits the flow into cycles between consecutive accepted onsets and
/// labels them: INSPIRATION at >= 70% inspiration samples, EXPIRATION at
/// <= 30%, MIXED in between.
std::vector<LabeledCycle> label_cycles(const CycleBoundaries& boundaries, const RespPhases& phases,
                                       const FlowSamples& flow);

/// Same split without a belt trace; every cycle is UNLABELED.
std::vector<LabeledCycle> split_cycles(const CycleBoundaries& boundaries, const FlowSamples& flow);

}  // namespace csfdyn
