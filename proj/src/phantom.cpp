#include "csfdyn/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "csfdyn/error.hpp"
#include "csfdyn/flow.hpp"
#include "csfdyn/random.hpp"

namespace csfdyn::phantom {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPlethRise = 150.0;  // ms from pulse foot to peak

enum Stream : std::uint64_t { kRr = 1, kBelt = 2, kPhase = 3, kGated = 4, kCohort = 5, kSeed = 6 };

// Largest float strictly inside (-pi, pi).
const float kPhaseLimit = std::nextafter(static_cast<float>(kPi), 0.0f);

float wrap_phase(double x) {
  double w = x - 2.0 * kPi * std::floor((x + kPi) / (2.0 * kPi));
  if (w >= kPi) w -= 2.0 * kPi;
  if (w < -kPi) w += 2.0 * kPi;
  float f = static_cast<float>(w);
  if (static_cast<double>(f) >= kPi) f = -kPhaseLimit;
  if (static_cast<double>(f) < -kPi) f = -kPhaseLimit;
  return f;
}

double shape_primitive(const std::vector<double>& b, double u) {
  double s = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) {
    const double w = 2.0 * kPi * static_cast<double>(k + 1);
    s -= b[k] * std::cos(w * u) / w;
  }
  return s;
}

double shape_value(const std::vector<double>& b, double u) {
  double s = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) s += b[k] * std::sin(2.0 * kPi * static_cast<double>(k + 1) * u);
  return s;
}

// Zeros of the shape on [0, 1], 0 and 1 included. Interior roots closer
// than one scan step to either end are not resolved.
std::vector<double> shape_roots(const std::vector<double>& b) {
  constexpr int kScan = 4096;
  std::vector<double> roots{0.0};
  for (int j = 1; j + 1 < kScan; ++j) {
    double lo = static_cast<double>(j) / kScan;
    double hi = static_cast<double>(j + 1) / kScan;
    const double flo = shape_value(b, lo);
    const double fhi = shape_value(b, hi);
    if (flo == 0.0) {
      roots.push_back(lo);
      continue;
    }
    if (flo * fhi >= 0.0) continue;
    for (int it = 0; it < 80; ++it) {
      const double m = 0.5 * (lo + hi);
      if ((shape_value(b, m) < 0.0) == (flo < 0.0)) lo = m;
      else hi = m;
    }
    roots.push_back(0.5 * (lo + hi));
  }
  roots.push_back(1.0);
  return roots;
}

const char* profile_name(Profile p) { return p == Profile::Plug ? "PLUG" : "POISEUILLE"; }

Profile parse_profile(const std::string& s) {
  if (s == "PLUG") return Profile::Plug;
  if (s == "POISEUILLE") return Profile::Poiseuille;
  fail(Errc::InvalidSpec, fmt::format("unknown lumen profile '{}'", s));
}

}  // namespace

PhantomSpec aqueduct_spec() {
  PhantomSpec s;
  s.roi_label = RoiLabel::Aqueduct;
  s.acquisition.venc = 10.0;
  s.cardiac.sv_true = 0.05;
  s.lumen.radius = 3.0;
  return s;
}

PhantomSpec spinal_spec() {
  PhantomSpec s;
  s.roi_label = RoiLabel::SpinalCanal;
  s.acquisition.venc = 5.0;
  s.cardiac.sv_true = 0.5;
  s.lumen.radius = 8.0;
  return s;
}

void validate(const PhantomSpec& s) {
  auto bad = [](const std::string& m) { fail(Errc::InvalidSpec, m); };
  if (s.grid.width < 1 || s.grid.height < 1) bad("grid dimensions must be >= 1");
  if (!(s.grid.spacing > 0.0) || !(s.grid.thickness > 0.0)) bad("grid spacing and thickness must be > 0");
  if (!(s.lumen.radius >= 1.0)) bad("lumen radius must be >= 1 px");
  if (s.lumen.center_x - s.lumen.radius < 0.0 || s.lumen.center_y - s.lumen.radius < 0.0 ||
      s.lumen.center_x + s.lumen.radius > s.grid.width - 1 ||
      s.lumen.center_y + s.lumen.radius > s.grid.height - 1)
    bad("lumen extends beyond the grid");
  if (!(s.cardiac.rr_mean >= 300.0 && s.cardiac.rr_mean <= 2000.0)) bad("rr_mean must lie in [300, 2000] ms");
  if (!(s.cardiac.rr_jitter_sd >= 0.0)) bad("rr_jitter_sd must be >= 0");
  if (!(s.cardiac.sv_true > 0.0)) bad("sv_true must be > 0");
  if (!(s.cardiac.first_onset >= 0.0 && s.cardiac.first_onset < s.cardiac.rr_mean))
    bad("first_onset must lie in [0, rr_mean)");
  if (s.cardiac.harmonics.empty()) bad("waveform needs at least one harmonic");
  double slope = 0.0;
  for (std::size_t k = 0; k < s.cardiac.harmonics.size(); ++k) {
    if (!std::isfinite(s.cardiac.harmonics[k])) bad("harmonic coefficients must be finite");
    slope += static_cast<double>(k + 1) * s.cardiac.harmonics[k];
  }
  if (!(slope > 0.0)) bad("waveform must rise through zero at the cycle onset");
  if (shape_roots(s.cardiac.harmonics).size() != 3) bad("waveform must be biphasic (one flush, one filling lobe)");
  if (!(s.resp.period > 0.0)) bad("respiratory period must be > 0");
  if (!(s.resp.insp_fraction > 0.0 && s.resp.insp_fraction < 1.0)) bad("insp_fraction must lie in (0, 1)");
  if (!(s.resp.modulation_insp > -1.0)) bad("modulation_insp must be > -1");
  if (!(s.resp.belt_noise_sd >= 0.0)) bad("belt_noise_sd must be >= 0");
  if (!(s.resp.belt_interval > 0.0)) bad("belt_interval must be > 0");
  if (!(s.resp.drift_period > 0.0)) bad("drift_period must be > 0");
  if (!(s.acquisition.venc > 0.0)) bad("venc must be > 0");
  if (!(s.acquisition.frame_interval > 0.0)) bad("frame_interval must be > 0");
  if (!(s.acquisition.duration >= s.acquisition.frame_interval)) bad("duration must cover one frame");
  if (!(s.acquisition.noise_sd_phase >= 0.0)) bad("noise_sd_phase must be >= 0");
  if (!std::isfinite(s.acquisition.background_offset)) bad("background_offset must be finite");
  if (!(s.acquisition.pleth_interval > 0.0)) bad("pleth_interval must be > 0");
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json to_json(const PhantomSpec& s) {
  nlohmann::ordered_json j;
  j["lumen"] = {{"center_x", s.lumen.center_x},
                {"center_y", s.lumen.center_y},
                {"radius", s.lumen.radius},
                {"profile", profile_name(s.lumen.profile)}};
  j["grid"] = {{"width", s.grid.width},
               {"height", s.grid.height},
               {"spacing", s.grid.spacing},
               {"thickness", s.grid.thickness}};
  j["cardiac"] = {{"rr_mean", s.cardiac.rr_mean},
                  {"rr_jitter_sd", s.cardiac.rr_jitter_sd},
                  {"harmonics", s.cardiac.harmonics},
                  {"sv_true", s.cardiac.sv_true},
                  {"first_onset", s.cardiac.first_onset}};
  j["resp"] = {{"period", s.resp.period},
               {"insp_fraction", s.resp.insp_fraction},
               {"modulation_insp", s.resp.modulation_insp},
               {"belt_noise_sd", s.resp.belt_noise_sd},
               {"belt_interval", s.resp.belt_interval},
               {"first_insp", s.resp.first_insp},
               {"drift_amplitude", s.resp.drift_amplitude},
               {"drift_period", s.resp.drift_period}};
  j["acquisition"] = {{"venc", s.acquisition.venc},
                      {"frame_interval", s.acquisition.frame_interval},
                      {"duration", s.acquisition.duration},
                      {"t0", s.acquisition.t0},
                      {"noise_sd_phase", s.acquisition.noise_sd_phase},
                      {"background_offset", s.acquisition.background_offset},
                      {"series_kind", std::string(to_string(s.acquisition.series_kind))},
                      {"pleth_interval", s.acquisition.pleth_interval}};
  j["roi_label"] = std::string(to_string(s.roi_label));
  j["seed"] = s.seed;
  return j;
}

namespace {

template <class T>
void take(const nlohmann::json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) out = it->get<T>();
}

void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> keys, const char* where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const bool known = std::any_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; });
    if (!known) fail(Errc::InvalidSpec, fmt::format("unknown key '{}' in {}", it.key(), where));
  }
}

const nlohmann::json& section(const nlohmann::json& j, const char* key) {
  static const nlohmann::json empty = nlohmann::json::object();
  auto it = j.find(key);
  if (it == j.end()) return empty;
  if (!it->is_object()) fail(Errc::InvalidSpec, fmt::format("'{}' must be an object", key));
  return *it;
}

}  // namespace

PhantomSpec spec_from_json(const nlohmann::json& j, PhantomSpec s) {
  if (!j.is_object()) fail(Errc::InvalidSpec, "phantom spec must be a JSON object");
  try {
    // "preset" picks the site defaults before any override
    if (auto it = j.find("preset"); it != j.end()) {
      const auto name = it->get<std::string>();
      if (name == "aqueduct") s = aqueduct_spec();
      else if (name == "spinal") s = spinal_spec();
      else fail(Errc::InvalidSpec, fmt::format("unknown preset '{}'", name));
    }
    reject_unknown(j, {"preset", "lumen", "grid", "cardiac", "resp", "acquisition", "roi_label", "seed"}, "spec");
    const auto& lumen = section(j, "lumen");
    reject_unknown(lumen, {"center_x", "center_y", "radius", "profile"}, "lumen");
    take(lumen, "center_x", s.lumen.center_x);
    take(lumen, "center_y", s.lumen.center_y);
    take(lumen, "radius", s.lumen.radius);
    if (lumen.contains("profile")) s.lumen.profile = parse_profile(lumen["profile"].get<std::string>());
    const auto& grid = section(j, "grid");
    reject_unknown(grid, {"width", "height", "spacing", "thickness"}, "grid");
    take(grid, "width", s.grid.width);
    take(grid, "height", s.grid.height);
    take(grid, "spacing", s.grid.spacing);
    take(grid, "thickness", s.grid.thickness);
    const auto& cardiac = section(j, "cardiac");
    reject_unknown(cardiac, {"rr_mean", "rr_jitter_sd", "harmonics", "sv_true", "first_onset"}, "cardiac");
    take(cardiac, "rr_mean", s.cardiac.rr_mean);
    take(cardiac, "rr_jitter_sd", s.cardiac.rr_jitter_sd);
    take(cardiac, "harmonics", s.cardiac.harmonics);
    take(cardiac, "sv_true", s.cardiac.sv_true);
    take(cardiac, "first_onset", s.cardiac.first_onset);
    const auto& resp = section(j, "resp");
    reject_unknown(resp, {"period", "insp_fraction", "modulation_insp", "belt_noise_sd", "belt_interval",
                          "first_insp", "drift_amplitude", "drift_period"},
                   "resp");
    take(resp, "period", s.resp.period);
    take(resp, "insp_fraction", s.resp.insp_fraction);
    take(resp, "modulation_insp", s.resp.modulation_insp);
    take(resp, "belt_noise_sd", s.resp.belt_noise_sd);
    take(resp, "belt_interval", s.resp.belt_interval);
    take(resp, "first_insp", s.resp.first_insp);
    take(resp, "drift_amplitude", s.resp.drift_amplitude);
    take(resp, "drift_period", s.resp.drift_period);
    const auto& acq = section(j, "acquisition");
    reject_unknown(acq, {"venc", "frame_interval", "duration", "t0", "noise_sd_phase", "background_offset",
                         "series_kind", "pleth_interval"},
                   "acquisition");
    take(acq, "venc", s.acquisition.venc);
    take(acq, "frame_interval", s.acquisition.frame_interval);
    take(acq, "duration", s.acquisition.duration);
    take(acq, "t0", s.acquisition.t0);
    take(acq, "noise_sd_phase", s.acquisition.noise_sd_phase);
    take(acq, "background_offset", s.acquisition.background_offset);
    take(acq, "pleth_interval", s.acquisition.pleth_interval);
    if (acq.contains("series_kind"))
      s.acquisition.series_kind = parse_series_kind(acq["series_kind"].get<std::string>());
    if (j.contains("roi_label")) s.roi_label = parse_roi_label(j["roi_label"].get<std::string>());
    take(j, "seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidSpec, fmt::format("phantom spec: {}", e.what()));
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidSpec) throw;
    fail(Errc::InvalidSpec, e.detail());
  }
  validate(s);
  return s;
}

nlohmann::ordered_json to_json(const GroundTruth& t) {
  nlohmann::ordered_json j;
  j["onsets_ms"] = t.onsets;
  nlohmann::ordered_json cycles = nlohmann::ordered_json::array();
  for (const auto& c : t.cycles)
    cycles.push_back({{"start_ms", c.start},
                      {"end_ms", c.end},
                      {"insp_fraction", c.insp_fraction},
                      {"resp_label", std::string(to_string(c.label))}});
  j["cycles"] = std::move(cycles);
  j["amplitude_ml_s"] = t.amplitude;
  j["lobe_integral"] = t.lobe_integral;
  j["sv_true_ml"] = t.sv_true;
  j["sv_insp_ml"] = t.sv_insp;
  j["sv_exp_ml"] = t.sv_exp;
  j["peak_center_velocity_cm_s"] = t.peak_center_velocity;
  j["q_frames_ml_s"] = t.q_frames;
  j["rng"] = std::string(rng::kAlgorithm);
  return j;
}

// ---------------------------------------------------------------------------

PhantomModel::PhantomModel(PhantomSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  const auto& c = spec_.cardiac;
  const auto& a = spec_.acquisition;

  const auto roots = shape_roots(c.harmonics);
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < roots.size(); ++i)
    integral += std::abs(shape_primitive(c.harmonics, roots[i + 1]) - shape_primitive(c.harmonics, roots[i]));
  lobe_integral_ = 0.5 * integral;
  amplitude_ = c.sv_true / (c.rr_mean / 1000.0 * lobe_integral_);

  const rng::CounterRng rr_rng(spec_.seed, kRr);
  const double lo = std::max(300.0, 0.6 * c.rr_mean);
  const double hi = std::min(2000.0, 1.4 * c.rr_mean);
  auto rr_of = [&](long k) {
    const double rr = c.rr_mean + c.rr_jitter_sd * rr_rng.normal(static_cast<std::uint64_t>(k + (1L << 20)));
    return std::clamp(rr, lo, hi);
  };
  const double first = a.t0 + c.first_onset;
  const double end = a.t0 + a.duration + 2.0 * hi;
  onsets_.push_back(first - rr_of(-1));
  onsets_.push_back(first);
  for (long k = 0; onsets_.back() <= end; ++k) onsets_.push_back(onsets_.back() + rr_of(k));

  const int w = spec_.grid.width, h = spec_.grid.height;
  weights_.assign(static_cast<std::size_t>(w) * h, 0.0);
  const double r2max = spec_.lumen.radius * spec_.lumen.radius;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x - spec_.lumen.center_x, dy = y - spec_.lumen.center_y;
      const double r2 = dx * dx + dy * dy;
      if (r2 > r2max) continue;
      // rim pixels of a parabolic profile carry no flow but stay in the lumen
      weights_[static_cast<std::size_t>(y) * w + x] = spec_.lumen.profile == Profile::Plug ? 1.0 : 1.0 - r2 / r2max;
    }
  }
  for (double v : weights_) weight_sum_ += v;
}

std::size_t PhantomModel::cycle_index(double t) const {
  const auto it = std::upper_bound(onsets_.begin(), onsets_.end(), t);
  if (it == onsets_.begin()) return 0;
  return static_cast<std::size_t>(it - onsets_.begin()) - 1;
}

double PhantomModel::shape(double u) const { return shape_value(spec_.cardiac.harmonics, u); }

double PhantomModel::cardiac_flow(double t) const {
  const std::size_t i = std::min(cycle_index(t), onsets_.size() - 2);
  const double u = (t - onsets_[i]) / (onsets_[i + 1] - onsets_[i]);
  return amplitude_ * shape(u);
}

bool PhantomModel::inspiration(double t) const {
  const double period = spec_.resp.period;
  double tau = std::fmod(t - (spec_.acquisition.t0 + spec_.resp.first_insp), period);
  if (tau < 0.0) tau += period;
  return tau < spec_.resp.insp_fraction * period;
}

double PhantomModel::flow(double t) const {
  double q = cardiac_flow(t);
  if (inspiration(t)) q *= 1.0 + spec_.resp.modulation_insp;
  if (spec_.resp.drift_amplitude != 0.0)
    q += spec_.resp.drift_amplitude * std::sin(2.0 * kPi * (t - spec_.acquisition.t0) / spec_.resp.drift_period);
  return q;
}

double PhantomModel::belt(double t) const {
  const double period = spec_.resp.period;
  const double ti = spec_.resp.insp_fraction * period;
  const double te = period - ti;
  double tau = std::fmod(t - (spec_.acquisition.t0 + spec_.resp.first_insp), period);
  if (tau < 0.0) tau += period;
  if (tau < ti) return 0.5 * (1.0 - std::cos(kPi * tau / ti));
  return 0.5 * (1.0 + std::cos(kPi * (tau - ti) / te));
}

double PhantomModel::pleth(double t) const {
  const std::size_t i = cycle_index(t);
  const double tau = t - onsets_[i];
  if (tau < 0.0) return 0.0;
  return tau / kPlethRise * std::exp(1.0 - tau / kPlethRise);
}

double PhantomModel::center_velocity(double t) const {
  const double area = spec_.grid.spacing * spec_.grid.spacing;
  return flow(t) / (area * kFlowUnit * weight_sum_);
}

int PhantomModel::n_frames() const {
  const auto& a = spec_.acquisition;
  if (a.series_kind == SeriesKind::GatedConv) return kPointsPerCycle;
  return static_cast<int>(std::floor(a.duration / a.frame_interval + 1e-9));
}

double PhantomModel::frame_time(int k) const {
  return spec_.acquisition.t0 + k * spec_.acquisition.frame_interval;
}

RoiMask PhantomModel::lumen_mask() const {
  RoiMask m(spec_.grid.width, spec_.grid.height, spec_.roi_label);
  const double r2max = spec_.lumen.radius * spec_.lumen.radius;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const double dx = x - spec_.lumen.center_x, dy = y - spec_.lumen.center_y;
      if (dx * dx + dy * dy <= r2max) m.set(x, y);
    }
  return m;
}

RoiMask PhantomModel::static_mask() const {
  RoiMask m(spec_.grid.width, spec_.grid.height, RoiLabel::StaticTissue);
  const double inner = spec_.lumen.radius + 3.0;
  const double outer = spec_.lumen.radius + 10.0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const double dx = x - spec_.lumen.center_x, dy = y - spec_.lumen.center_y;
      const double r = std::sqrt(dx * dx + dy * dy);
      if (r >= inner && r <= outer) m.set(x, y);
    }
  if (m.count() == 0) fail(Errc::InvalidSpec, "grid leaves no room for static tissue around the lumen");
  return m;
}

// ---------------------------------------------------------------------------

namespace {

SeriesHeader header_for(const PhantomSpec& s, int n_frames, double frame_interval, SeriesKind kind) {
  SeriesHeader h;
  h.width = s.grid.width;
  h.height = s.grid.height;
  h.n_frames = n_frames;
  h.pixel_spacing_x = s.grid.spacing;
  h.pixel_spacing_y = s.grid.spacing;
  h.slice_thickness = s.grid.thickness;
  h.venc = s.acquisition.venc;
  h.frame_interval = frame_interval;
  h.t0 = s.acquisition.t0;
  h.encoding = Encoding::PhaseRadians;
  h.series_kind = kind;
  return h;
}

std::vector<TruthCycle> truth_cycles(const PhantomModel& model, const std::vector<double>& onsets) {
  const int n = model.n_frames();
  std::vector<TruthCycle> out;
  for (std::size_t i = 0; i + 1 < onsets.size(); ++i) {
    TruthCycle c;
    c.start = onsets[i];
    c.end = onsets[i + 1];
    int total = 0, insp = 0;
    for (int k = 0; k < n; ++k) {
      const double t = model.frame_time(k);
      if (t < c.start || t >= c.end) continue;
      ++total;
      if (model.inspiration(t)) ++insp;
    }
    c.insp_fraction = total > 0 ? static_cast<double>(insp) / total : 0.0;
    c.label = c.insp_fraction >= kInspirationMajority   ? CycleResp::Inspiration
              : c.insp_fraction <= kExpirationMajority ? CycleResp::Expiration
                                                       : CycleResp::Mixed;
    out.push_back(c);
  }
  return out;
}

}  // namespace

PhantomDataset generate(const PhantomSpec& spec) {
  const PhantomModel model(spec);
  const auto& acq = spec.acquisition;
  if (acq.series_kind != SeriesKind::ContinuousEpi)
    fail(Errc::InvalidSpec, "generate() simulates continuous acquisitions; use generate_gated()");
  const int n = model.n_frames();
  const std::size_t ppf = static_cast<std::size_t>(spec.grid.width) * spec.grid.height;
  const double to_phase = std::numbers::pi / acq.venc;
  const rng::CounterRng noise(spec.seed, kPhase);
  const auto& w = model.weights();

  PhantomDataset d;
  d.series.header = header_for(spec, n, acq.frame_interval, SeriesKind::ContinuousEpi);
  d.series.frames.resize(ppf * static_cast<std::size_t>(n));
  d.truth.q_frames.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double t = model.frame_time(k);
    const double vc = model.center_velocity(t);
    d.truth.q_frames[k] = model.flow(t);
    d.truth.peak_center_velocity = std::max(d.truth.peak_center_velocity, std::abs(vc));
    float* frame = d.series.frames.data() + static_cast<std::size_t>(k) * ppf;
    for (std::size_t p = 0; p < ppf; ++p) {
      double phase = (w[p] * vc + acq.background_offset) * to_phase;
      if (acq.noise_sd_phase > 0.0)
        phase += acq.noise_sd_phase * noise.normal(static_cast<std::uint64_t>(k) * ppf + p);
      frame[p] = wrap_phase(phase);
    }
  }

  const double span = n * acq.frame_interval;
  const rng::CounterRng belt_noise(spec.seed, kBelt);
  d.belt.kind = PhysioKind::RespBelt;
  d.belt.t0 = acq.t0;
  d.belt.sample_interval = spec.resp.belt_interval;
  const auto n_belt = static_cast<std::size_t>(std::floor(span / spec.resp.belt_interval)) + 1;
  for (std::size_t i = 0; i < n_belt; ++i) {
    double v = model.belt(d.belt.time(i));
    if (spec.resp.belt_noise_sd > 0.0) v += spec.resp.belt_noise_sd * belt_noise.normal(i);
    d.belt.samples.push_back(v);
  }

  d.plethysmo.kind = PhysioKind::CardiacPlethysmo;
  d.plethysmo.t0 = acq.t0;
  d.plethysmo.sample_interval = acq.pleth_interval;
  const auto n_pleth = static_cast<std::size_t>(std::floor(span / acq.pleth_interval)) + 1;
  for (std::size_t i = 0; i < n_pleth; ++i) d.plethysmo.samples.push_back(model.pleth(d.plethysmo.time(i)));

  d.lumen_mask = model.lumen_mask();
  d.static_mask = model.static_mask();

  const double t_first = model.frame_time(0), t_last = model.frame_time(n - 1);
  for (double o : model.schedule())
    if (o >= t_first && o <= t_last) d.truth.onsets.push_back(o);
  d.truth.cycles = truth_cycles(model, d.truth.onsets);
  d.truth.amplitude = model.amplitude();
  d.truth.lobe_integral = model.lobe_integral();
  d.truth.sv_true = spec.cardiac.sv_true;
  d.truth.sv_insp = spec.cardiac.sv_true * (1.0 + spec.resp.modulation_insp);
  d.truth.sv_exp = spec.cardiac.sv_true;
  return d;
}

GatedSeries generate_gated(const PhantomSpec& spec) {
  if (spec.acquisition.series_kind != SeriesKind::GatedConv)
    fail(Errc::InvalidSpec, "generate_gated() needs series_kind GATED_CONV");
  const PhantomModel model(spec);
  const auto& acq = spec.acquisition;

  // the cycles a continuous acquisition of the same duration would cover
  const double t_first = acq.t0;
  const double t_last = acq.t0 + acq.duration;
  std::vector<std::pair<double, double>> cycles;
  const auto& on = model.schedule();
  for (std::size_t i = 0; i + 1 < on.size(); ++i)
    if (on[i] >= t_first && on[i + 1] <= t_last) cycles.emplace_back(on[i], on[i + 1]);
  if (cycles.empty()) fail(Errc::InvalidSpec, "acquisition too short for one complete cycle");

  GatedSeries g;
  g.n_cycles = static_cast<int>(cycles.size());
  double rr_sum = 0.0;
  for (const auto& [a, b] : cycles) rr_sum += b - a;
  g.mean_rr = rr_sum / g.n_cycles;

  const std::size_t ppf = static_cast<std::size_t>(spec.grid.width) * spec.grid.height;
  const double area = spec.grid.spacing * spec.grid.spacing;
  double wsum = 0.0;
  for (double v : model.weights()) wsum += v;
  const double to_phase = std::numbers::pi / acq.venc;
  const rng::CounterRng noise(spec.seed, kGated);
  const auto& w = model.weights();

  g.series.header = header_for(spec, kPointsPerCycle, g.mean_rr / kPointsPerCycle, SeriesKind::GatedConv);
  g.series.frames.resize(ppf * kPointsPerCycle);
  std::vector<double> noise_mean(ppf);
  for (int k = 0; k < kPointsPerCycle; ++k) {
    double q = 0.0;
    for (const auto& [a, b] : cycles) q += model.flow(a + (b - a) * k / kPointsPerCycle);
    q /= g.n_cycles;
    g.binned_flow[k] = q;
    const double vc = q / (area * kFlowUnit * wsum);

    std::fill(noise_mean.begin(), noise_mean.end(), 0.0);
    if (acq.noise_sd_phase > 0.0) {
      for (int c = 0; c < g.n_cycles; ++c) {
        const std::uint64_t base = (static_cast<std::uint64_t>(c) * kPointsPerCycle + k) * ppf;
        for (std::size_t p = 0; p < ppf; ++p) noise_mean[p] += noise.normal(base + p);
      }
      for (double& v : noise_mean) v *= acq.noise_sd_phase / g.n_cycles;
    }
    float* frame = g.series.frames.data() + static_cast<std::size_t>(k) * ppf;
    for (std::size_t p = 0; p < ppf; ++p)
      frame[p] = wrap_phase((w[p] * vc + acq.background_offset) * to_phase + noise_mean[p]);
  }
  return g;
}

std::vector<CohortSubject> cohort_specs(int n_subjects, const CohortJitter& jitter, std::uint64_t seed,
                                        const PhantomSpec& base, double conv_venc) {
  if (n_subjects < 1) fail(Errc::InvalidSpec, "cohort needs at least one subject");
  if (!(conv_venc > 0.0)) fail(Errc::InvalidSpec, "conv venc must be > 0");
  const rng::CounterRng r(seed, kCohort);
  const rng::CounterRng seeds(seed, kSeed);
  std::vector<CohortSubject> out;
  for (int i = 0; i < n_subjects; ++i) {
    const auto c = static_cast<std::uint64_t>(i) * 8;
    CohortSubject s;
    s.id = fmt::format("s{:02d}", i + 1);
    s.epi = base;
    s.epi.cardiac.rr_mean = std::clamp(base.cardiac.rr_mean * (1.0 + jitter.rr_sd_fraction * r.normal(c)), 600.0, 1500.0);
    s.epi.cardiac.first_onset = std::fmod(base.cardiac.first_onset, s.epi.cardiac.rr_mean);
    s.epi.cardiac.sv_true = base.cardiac.sv_true * std::exp(jitter.sv_sd_fraction * r.normal(c + 1));
    s.epi.resp.modulation_insp = base.resp.modulation_insp + jitter.modulation_sd * r.normal(c + 2);
    s.epi.seed = seeds.bits(2 * static_cast<std::uint64_t>(i));
    s.epi.acquisition.series_kind = SeriesKind::ContinuousEpi;
    s.conv = s.epi;
    s.conv.acquisition.series_kind = SeriesKind::GatedConv;
    s.conv.acquisition.venc = conv_venc;
    s.conv.seed = seeds.bits(2 * static_cast<std::uint64_t>(i) + 1);
    validate(s.epi);
    validate(s.conv);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<CohortDataset> cohort(int n_subjects, const CohortJitter& jitter, std::uint64_t seed,
                                  const PhantomSpec& base, double conv_venc) {
  std::vector<CohortDataset> out;
  for (const auto& s : cohort_specs(n_subjects, jitter, seed, base, conv_venc))
    out.push_back({s.id, generate(s.epi), generate_gated(s.conv)});
  return out;
}

}  // namespace csfdyn::phantom
