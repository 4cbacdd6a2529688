#include "csfdyn/gating.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "csfdyn/error.hpp"
#include "csfdyn/signal.hpp"

namespace csfdyn {

std::string_view to_string(CycleMethod m) noexcept {
  return m == CycleMethod::FlowPeaks ? "FLOW_PEAKS" : "PLETHYSMO";
}

std::string_view to_string(RespLabel l) noexcept {
  return l == RespLabel::Inspiration ? "INSPIRATION" : "EXPIRATION";
}

std::string_view to_string(CycleResp r) noexcept {
  switch (r) {
    case CycleResp::Inspiration: return "INSPIRATION";
    case CycleResp::Expiration: return "EXPIRATION";
    case CycleResp::Mixed: return "MIXED";
    case CycleResp::Unlabeled: return "UNLABELED";
  }
  return "UNLABELED";
}

void validate(const GatingParams& p) {
  if (!(p.min_rr > 0.0 && p.max_rr > p.min_rr))
    fail(Errc::InvalidArgument, fmt::format("need 0 < min_rr < max_rr (got {}, {})", p.min_rr, p.max_rr));
  if (!(p.prominence_fraction >= 0.0 && p.prominence_fraction <= 1.0))
    fail(Errc::InvalidArgument, "prominence fraction must lie in [0, 1]");
  if (!(p.max_rr_cv > 0.0)) fail(Errc::InvalidArgument, "max_rr_cv must be > 0");
  if (p.min_cycles < 2) fail(Errc::InvalidArgument, "min_cycles must be >= 2");
}

namespace {

struct PeakSearch {
  std::vector<double> smoothed;    // 3-sample moving average of the input
  std::vector<double> bandpassed;  // detrended, then smoothed
  std::vector<signal::Peak> peaks;
};

// Steps 1-3 shared by both detectors: detrend, smooth, prominent maxima,
// refractory period.
PeakSearch find_cardiac_peaks(std::span<const double> x, double dt, const GatingParams& p) {
  PeakSearch out;
  out.smoothed = signal::moving_average(x, 3);
  const auto trend = signal::moving_average(x, signal::odd_window(p.max_rr, dt));
  std::vector<double> detrended(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) detrended[i] = x[i] - trend[i];
  out.bandpassed = signal::moving_average(detrended, 3);

  double scale = 0.0, swing = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale = std::max(scale, std::abs(x[i]));
    swing = std::max(swing, std::abs(out.bandpassed[i]));
  }
  // a constant input leaves only rounding residue after detrending
  if (swing <= 1e-9 * scale || swing == 0.0) return out;

  std::vector<double> positive;
  for (double v : out.bandpassed)
    if (v > 0.0) positive.push_back(v);
  const double threshold = p.prominence_fraction * signal::percentile(positive, 75.0);

  std::vector<signal::Peak> candidates;
  for (const auto& pk : signal::find_peaks(out.bandpassed))
    if (pk.prominence >= threshold && pk.prominence > 0.0) candidates.push_back(pk);
  out.peaks = signal::enforce_refractory(std::move(candidates), p.min_rr / dt);
  return out;
}

// Last upward zero crossing of y in [lo, peak], linearly interpolated.
std::optional<double> upward_crossing(std::span<const double> y, std::span<const double> t,
                                      std::size_t lo, std::size_t peak) {
  for (std::size_t i = peak; i-- > lo;) {
    if (y[i] <= 0.0 && y[i + 1] > 0.0) {
      const double frac = -y[i] / (y[i + 1] - y[i]);
      return t[i] + frac * (t[i + 1] - t[i]);
    }
  }
  return std::nullopt;
}

void finish_boundaries(CycleBoundaries& b, const GatingParams& p) {
  if (static_cast<int>(b.onsets.size()) < p.min_cycles)
    fail(Errc::TooFewCycles,
         fmt::format("{} cycle onsets detected, need at least {}", b.onsets.size(), p.min_cycles));
  std::vector<double> rr;
  b.interval_ok.assign(b.onsets.size() - 1, 0);
  for (std::size_t i = 0; i + 1 < b.onsets.size(); ++i) {
    const double d = b.onsets[i + 1] - b.onsets[i];
    if (d >= p.min_rr && d <= p.max_rr) {
      b.interval_ok[i] = 1;
      rr.push_back(d);
    }
  }
  if (rr.empty()) fail(Errc::TooFewCycles, "no onset interval lies inside the RR window");
  b.mean_rr = signal::mean(rr);
  b.rr_cv = rr.size() > 1 ? signal::stddev(rr) / b.mean_rr : 0.0;
  if (b.rr_cv > p.max_rr_cv)
    fail(Errc::ArrhythmicSignal,
         fmt::format("RR coefficient of variation {:.3f} exceeds {:.2f}; self-gating is unreliable, "
                     "supply a plethysmograph trace",
                     b.rr_cv, p.max_rr_cv));
}

void require_duration(double duration, const GatingParams& p) {
  if (duration < p.min_cycles * p.min_rr)
    fail(Errc::TooFewCycles, fmt::format("{} ms of data cannot hold {} cycles of at least {} ms",
                                         duration, p.min_cycles, p.min_rr));
}

}  // namespace

CycleBoundaries detect_cycles_from_flow(const FlowSamples& flow, const GatingParams& params) {
  validate(params);
  const std::size_t n = flow.q.size();
  if (n < 3 || flow.timestamps.size() != n) fail(Errc::TooFewCycles, "flow waveform too short");
  require_duration(flow.timestamps.back() - flow.timestamps.front(), params);
  const double dt = (flow.timestamps.back() - flow.timestamps.front()) / static_cast<double>(n - 1);

  const auto search = find_cardiac_peaks(flow.q, dt, params);
  const auto max_back = static_cast<std::size_t>(std::ceil(params.max_rr / dt));

  CycleBoundaries b;
  b.method = CycleMethod::FlowPeaks;
  std::size_t prev_peak = 0;
  bool have_prev = false;
  for (const auto& pk : search.peaks) {
    std::size_t lo = have_prev ? prev_peak : 0;
    if (pk.index > max_back) lo = std::max(lo, pk.index - max_back);
    auto onset = upward_crossing(search.smoothed, flow.timestamps, lo, pk.index);
    if (!onset) onset = upward_crossing(search.bandpassed, flow.timestamps, lo, pk.index);
    prev_peak = pk.index;
    have_prev = true;
    if (!onset || (!b.onsets.empty() && *onset <= b.onsets.back())) continue;
    b.onsets.push_back(*onset);
    b.peaks.push_back(flow.timestamps[pk.index]);
  }
  finish_boundaries(b, params);
  return b;
}

CycleBoundaries detect_cycles_from_plethysmo(const PhysioTrace& trace, const GatingParams& params) {
  validate(params);
  if (trace.kind != PhysioKind::CardiacPlethysmo)
    fail(Errc::InvalidArgument, "plethysmograph gating needs a CARDIAC_PLETHYSMO trace");
  validate(trace);
  require_duration(trace.duration(), params);

  const double dt = trace.sample_interval;
  const auto search = find_cardiac_peaks(trace.samples, dt, params);
  const auto max_back = static_cast<std::size_t>(std::ceil(params.max_rr / dt));

  CycleBoundaries b;
  b.method = CycleMethod::Plethysmo;
  std::size_t prev_peak = 0;
  bool have_prev = false;
  for (const auto& pk : search.peaks) {
    std::size_t lo = have_prev ? prev_peak : 0;
    if (pk.index > max_back) lo = std::max(lo, pk.index - max_back);
    prev_peak = pk.index;
    const bool first = !have_prev;
    have_prev = true;
    // the foot of the first pulse may lie before the trace starts
    if (first && pk.index < 2) continue;
    auto foot = std::min_element(trace.samples.begin() + static_cast<std::ptrdiff_t>(lo),
                                 trace.samples.begin() + static_cast<std::ptrdiff_t>(pk.index) + 1);
    const auto idx = static_cast<std::size_t>(foot - trace.samples.begin());
    if (first && idx == 0) continue;
    const double onset = trace.time(idx);
    if (!b.onsets.empty() && onset <= b.onsets.back()) continue;
    b.onsets.push_back(onset);
    b.peaks.push_back(trace.time(pk.index));
  }
  finish_boundaries(b, params);
  return b;
}

// ---------------------------------------------------------------------------
// respiratory phases

RespLabel RespPhases::at(double t) const {
  const double pos = std::round((t - t0) / sample_interval);
  const double clamped = std::clamp(pos, 0.0, static_cast<double>(labels.size() - 1));
  return labels[static_cast<std::size_t>(clamped)];
}

namespace {

double noise_floor(std::span<const double> x) {
  // MAD of second differences; a smooth breathing curve contributes almost
  // nothing, white noise of sd s gives s * sqrt(6).
  if (x.size() < 3) return 0.0;
  std::vector<double> d2(x.size() - 2);
  for (std::size_t i = 0; i + 2 < x.size(); ++i) d2[i] = x[i + 2] - 2.0 * x[i + 1] + x[i];
  const double med = signal::median(d2);
  for (double& v : d2) v = std::abs(v - med);
  return 1.4826 * signal::median(d2) / std::sqrt(6.0);
}

struct Run {
  std::size_t begin, end;  // [begin, end)
  RespLabel label;
};

std::vector<Run> runs_of(const std::vector<RespLabel>& labels) {
  std::vector<Run> runs;
  for (std::size_t i = 0; i < labels.size();) {
    std::size_t j = i;
    while (j < labels.size() && labels[j] == labels[i]) ++j;
    runs.push_back({i, j, labels[i]});
    i = j;
  }
  return runs;
}

RespLabel flip(RespLabel l) {
  return l == RespLabel::Inspiration ? RespLabel::Expiration : RespLabel::Inspiration;
}

}  // namespace

RespPhases classify_resp(const PhysioTrace& trace, const RespParams& params) {
  if (trace.kind != PhysioKind::RespBelt)
    fail(Errc::InvalidArgument, "respiratory classification needs a RESP_BELT trace");
  validate(trace);
  if (!(params.smoothing_window > 0.0)) fail(Errc::InvalidArgument, "smoothing window must be > 0");
  if (!(params.hysteresis >= 0.0 && params.hysteresis < 0.5))
    fail(Errc::InvalidArgument, "hysteresis must lie in [0, 0.5)");
  if (trace.duration() < 2000.0)
    fail(Errc::InvalidArgument, fmt::format("belt trace spans {} ms, need at least one breath (2000 ms)",
                                            trace.duration()));

  const auto s = signal::moving_average(trace.samples,
                                        signal::odd_window(params.smoothing_window, trace.sample_interval));
  const auto [mn, mx] = std::minmax_element(s.begin(), s.end());
  const double range = *mx - *mn;
  const double noise = noise_floor(trace.samples);
  if (range <= 0.0 || range < 10.0 * noise)
    fail(Errc::FlatSignal, fmt::format("belt signal range {} is below 10x the noise floor {}", range, noise));
  const double band = params.hysteresis * range;

  enum class State { Unknown, Rising, Falling } state = State::Unknown;
  std::vector<std::pair<std::size_t, RespLabel>> turns;  // label starting at index
  std::size_t lo_idx = 0, hi_idx = 0;
  double lo = s[0], hi = s[0];
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double v = s[i];
    switch (state) {
      case State::Unknown:
        if (v < lo) { lo = v; lo_idx = i; }
        if (v > hi) { hi = v; hi_idx = i; }
        if (v - lo >= band && lo_idx < i) {
          if (lo_idx > 0) turns.emplace_back(0, RespLabel::Expiration);
          turns.emplace_back(lo_idx, RespLabel::Inspiration);
          state = State::Rising;
          hi = v;
          hi_idx = i;
        } else if (hi - v >= band && hi_idx < i) {
          if (hi_idx > 0) turns.emplace_back(0, RespLabel::Inspiration);
          turns.emplace_back(hi_idx, RespLabel::Expiration);
          state = State::Falling;
          lo = v;
          lo_idx = i;
        }
        break;
      case State::Rising:
        if (v > hi) {
          hi = v;
          hi_idx = i;
        } else if (hi - v >= band) {
          turns.emplace_back(hi_idx, RespLabel::Expiration);
          state = State::Falling;
          lo = v;
          lo_idx = i;
        }
        break;
      case State::Falling:
        if (v < lo) {
          lo = v;
          lo_idx = i;
        } else if (v - lo >= band) {
          turns.emplace_back(lo_idx, RespLabel::Inspiration);
          state = State::Rising;
          hi = v;
          hi_idx = i;
        }
        break;
    }
  }

  RespPhases out;
  out.t0 = trace.t0;
  out.sample_interval = trace.sample_interval;
  out.smoothing_window = params.smoothing_window;
  out.hysteresis = params.hysteresis;
  out.labels.assign(s.size(), RespLabel::Inspiration);
  for (std::size_t k = 0; k < turns.size(); ++k) {
    const std::size_t end = k + 1 < turns.size() ? turns[k + 1].first : s.size();
    std::fill(out.labels.begin() + static_cast<std::ptrdiff_t>(turns[k].first),
              out.labels.begin() + static_cast<std::ptrdiff_t>(end), turns[k].second);
  }

  // debounce: flip the shortest run under min_run into its neighbours until
  // none is left
  const double min_samples = params.min_run / trace.sample_interval;
  while (true) {
    const auto runs = runs_of(out.labels);
    if (runs.size() < 2) break;
    const Run* shortest = nullptr;
    for (const auto& r : runs)
      if (static_cast<double>(r.end - r.begin) < min_samples &&
          (!shortest || r.end - r.begin < shortest->end - shortest->begin))
        shortest = &r;
    if (!shortest) break;
    std::fill(out.labels.begin() + static_cast<std::ptrdiff_t>(shortest->begin),
              out.labels.begin() + static_cast<std::ptrdiff_t>(shortest->end), flip(shortest->label));
  }
  return out;
}

// ---------------------------------------------------------------------------
// cycle labelling

namespace {

std::vector<LabeledCycle> cut_cycles(const CycleBoundaries& b, const FlowSamples& flow) {
  std::vector<LabeledCycle> cycles;
  for (std::size_t i = 0; i + 1 < b.onsets.size(); ++i) {
    if (i < b.interval_ok.size() && !b.interval_ok[i]) continue;
    LabeledCycle c;
    c.id = static_cast<int>(i);
    c.start = b.onsets[i];
    c.end = b.onsets[i + 1];
    const auto first = std::lower_bound(flow.timestamps.begin(), flow.timestamps.end(), c.start);
    const auto last = std::lower_bound(flow.timestamps.begin(), flow.timestamps.end(), c.end);
    for (auto it = first; it != last; ++it) {
      const auto k = static_cast<std::size_t>(it - flow.timestamps.begin());
      c.t.push_back(*it);
      c.q.push_back(flow.q[k]);
    }
    if (c.t.empty()) continue;
    c.sample_count_warning = c.t.size() < 4 || c.t.size() > 24;
    cycles.push_back(std::move(c));
  }
  return cycles;
}

}  // namespace

std::vector<LabeledCycle> label_cycles(const CycleBoundaries& boundaries, const RespPhases& phases,
                                       const FlowSamples& flow) {
  if (boundaries.onsets.empty()) fail(Errc::InvalidArgument, "no cycle boundaries to label");
  if (flow.timestamps.empty()) fail(Errc::InvalidArgument, "empty flow waveform");
  if (phases.labels.empty()) fail(Errc::ClockMismatch, "empty respiratory labelling");
  const double slack = 0.5 * phases.sample_interval;
  if (flow.timestamps.front() < phases.t0 - slack || flow.timestamps.back() > phases.end_time() + slack)
    fail(Errc::ClockMismatch,
         fmt::format("belt trace covers [{}, {}] ms but flow spans [{}, {}] ms", phases.t0,
                     phases.end_time(), flow.timestamps.front(), flow.timestamps.back()));

  auto cycles = cut_cycles(boundaries, flow);
  for (auto& c : cycles) {
    std::size_t insp = 0;
    for (double t : c.t)
      if (phases.at(t) == RespLabel::Inspiration) ++insp;
    c.inspiration_fraction = static_cast<double>(insp) / static_cast<double>(c.t.size());
    if (c.inspiration_fraction >= kInspirationMajority)
      c.resp_label = CycleResp::Inspiration;
    else if (c.inspiration_fraction <= kExpirationMajority)
      c.resp_label = CycleResp::Expiration;
    else
      c.resp_label = CycleResp::Mixed;
  }
  return cycles;
}

std::vector<LabeledCycle> split_cycles(const CycleBoundaries& boundaries, const FlowSamples& flow) {
  if (boundaries.onsets.empty()) fail(Errc::InvalidArgument, "no cycle boundaries to split");
  auto cycles = cut_cycles(boundaries, flow);
  for (auto& c : cycles) {
    c.resp_label = CycleResp::Unlabeled;
    c.inspiration_fraction = std::nan("");
  }
  return cycles;
}

}  // namespace csfdyn
