#include "csfdyn/ingest.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "csfdyn/error.hpp"

namespace csfdyn {

namespace {

constexpr char kMagic[8] = {'C', 'S', 'F', 'D', 'Y', 'N', '0', '1'};
constexpr std::size_t kMaxHeaderBytes = 1 << 20;

std::uint32_t load_le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_le32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
  p[2] = static_cast<std::uint8_t>(v >> 16);
  p[3] = static_cast<std::uint8_t>(v >> 24);
}

bool phase_in_range(double v) { return v >= -std::numbers::pi && v < std::numbers::pi; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

nlohmann::ordered_json header_to_json(const SeriesHeader& h) {
  nlohmann::ordered_json j;
  j["width"] = h.width;
  j["height"] = h.height;
  j["n_frames"] = h.n_frames;
  j["pixel_spacing_x"] = h.pixel_spacing_x;
  j["pixel_spacing_y"] = h.pixel_spacing_y;
  j["slice_thickness"] = h.slice_thickness;
  j["venc"] = h.venc;
  j["frame_interval"] = h.frame_interval;
  j["t0"] = h.t0;
  j["encoding"] = std::string(to_string(h.encoding));
  j["series_kind"] = std::string(to_string(h.series_kind));
  return j;
}

SeriesHeader header_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::MalformedHeader, fmt::format("header JSON does not parse: {}", e.what()));
  }
  if (!j.is_object()) fail(Errc::MalformedHeader, "header JSON is not an object");
  SeriesHeader h;
  try {
    h.width = j.at("width").get<int>();
    h.height = j.at("height").get<int>();
    h.n_frames = j.at("n_frames").get<int>();
    h.pixel_spacing_x = j.at("pixel_spacing_x").get<double>();
    h.pixel_spacing_y = j.at("pixel_spacing_y").get<double>();
    h.slice_thickness = j.at("slice_thickness").get<double>();
    h.venc = j.at("venc").get<double>();
    h.frame_interval = j.at("frame_interval").get<double>();
    h.t0 = j.at("t0").get<double>();
    h.encoding = parse_encoding(j.at("encoding").get<std::string>());
    h.series_kind = parse_series_kind(j.at("series_kind").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::MalformedHeader, fmt::format("header field missing or mistyped: {}", e.what()));
  } catch (const Error& e) {
    fail(Errc::MalformedHeader, e.detail());
  }
  validate(h);
  return h;
}

}  // namespace

std::string_view to_string(Encoding e) noexcept {
  return e == Encoding::PhaseRadians ? "PHASE_RADIANS" : "VELOCITY_CMPS";
}

std::string_view to_string(SeriesKind k) noexcept {
  return k == SeriesKind::ContinuousEpi ? "CONTINUOUS_EPI" : "GATED_CONV";
}

std::string_view to_string(RoiLabel l) noexcept {
  switch (l) {
    case RoiLabel::Aqueduct: return "AQUEDUCT";
    case RoiLabel::SpinalCanal: return "SPINAL_CANAL";
    case RoiLabel::StaticTissue: return "STATIC_TISSUE";
    case RoiLabel::Other: return "OTHER";
  }
  return "OTHER";
}

std::string_view to_string(PhysioKind k) noexcept {
  return k == PhysioKind::RespBelt ? "RESP_BELT" : "CARDIAC_PLETHYSMO";
}

Encoding parse_encoding(std::string_view s) {
  if (s == "PHASE_RADIANS") return Encoding::PhaseRadians;
  if (s == "VELOCITY_CMPS") return Encoding::VelocityCmps;
  fail(Errc::InvalidArgument, fmt::format("unknown encoding '{}'", s));
}

SeriesKind parse_series_kind(std::string_view s) {
  if (s == "CONTINUOUS_EPI") return SeriesKind::ContinuousEpi;
  if (s == "GATED_CONV") return SeriesKind::GatedConv;
  fail(Errc::InvalidArgument, fmt::format("unknown series kind '{}'", s));
}

RoiLabel parse_roi_label(std::string_view s) {
  std::string up(s);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  if (up == "AQUEDUCT") return RoiLabel::Aqueduct;
  if (up == "SPINAL_CANAL" || up == "SPINAL") return RoiLabel::SpinalCanal;
  if (up == "STATIC_TISSUE" || up == "STATIC") return RoiLabel::StaticTissue;
  if (up == "OTHER") return RoiLabel::Other;
  fail(Errc::InvalidArgument, fmt::format("unknown ROI label '{}'", s));
}

void validate(const SeriesHeader& h) {
  if (h.width < 1 || h.height < 1 || h.n_frames < 1)
    fail(Errc::MalformedHeader,
         fmt::format("dimensions must be >= 1 (got {}x{}x{})", h.width, h.height, h.n_frames));
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(h.pixel_spacing_x) || !positive(h.pixel_spacing_y))
    fail(Errc::MalformedHeader, "pixel spacing must be > 0");
  if (!positive(h.slice_thickness)) fail(Errc::MalformedHeader, "slice thickness must be > 0");
  if (!positive(h.venc)) fail(Errc::MalformedHeader, "venc must be > 0");
  if (!positive(h.frame_interval)) fail(Errc::MalformedHeader, "frame interval must be > 0");
  if (!std::isfinite(h.t0)) fail(Errc::MalformedHeader, "t0 must be finite");
  if (h.series_kind == SeriesKind::GatedConv && h.n_frames != kPointsPerCycle)
    fail(Errc::MalformedHeader,
         fmt::format("gated series must hold {} frames, got {}", kPointsPerCycle, h.n_frames));
}

std::vector<double> VelocitySeries::timestamps() const {
  std::vector<double> t(static_cast<std::size_t>(header.n_frames));
  for (int k = 0; k < header.n_frames; ++k) t[k] = header.timestamp(k);
  return t;
}

void validate(const VelocitySeries& s) {
  validate(s.header);
  if (s.frames.size() != s.header.value_count())
    fail(Errc::DimensionMismatch, fmt::format("payload holds {} values, header implies {}",
                                              s.frames.size(), s.header.value_count()));
  const bool phase = s.header.encoding == Encoding::PhaseRadians;
  for (std::size_t i = 0; i < s.frames.size(); ++i) {
    const double v = s.frames[i];
    if (!std::isfinite(v))
      fail(Errc::ValueOutOfRange, fmt::format("non-finite value at index {}", i));
    if (phase && !phase_in_range(v))
      fail(Errc::ValueOutOfRange, fmt::format("phase {} at index {} outside [-pi, pi)", v, i));
  }
}

std::size_t RoiMask::count() const noexcept {
  return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(),
                                                [](std::uint8_t p) { return p != 0; }));
}

std::vector<std::size_t> RoiMask::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pixels.size(); ++i)
    if (pixels[i]) out.push_back(i);
  return out;
}

void check_pairing(const RoiMask& mask, const SeriesHeader& header) {
  if (mask.width != header.width || mask.height != header.height)
    fail(Errc::DimensionMismatch, fmt::format("mask {}x{} does not match series {}x{}", mask.width,
                                              mask.height, header.width, header.height));
  if (mask.count() == 0) fail(Errc::EmptyMask, "mask has no inside pixels");
}

void validate(const PhysioTrace& t) {
  if (!(std::isfinite(t.sample_interval) && t.sample_interval > 0.0))
    fail(Errc::ValueOutOfRange, "physio sample interval must be > 0");
  if (!std::isfinite(t.t0)) fail(Errc::ValueOutOfRange, "physio t0 must be finite");
  if (t.samples.size() < 2) fail(Errc::ValueOutOfRange, "physio trace needs at least 2 samples");
  for (std::size_t i = 0; i < t.samples.size(); ++i)
    if (!std::isfinite(t.samples[i]))
      fail(Errc::ValueOutOfRange, fmt::format("non-finite physio sample at index {}", i));
}

// ---------------------------------------------------------------------------
// series container

std::vector<std::uint8_t> encode_series(const VelocitySeries& series) {
  validate(series);
  const std::string header = header_to_json(series.header).dump();
  std::vector<std::uint8_t> out(8 + 4 + header.size() + 4 * series.frames.size());
  std::memcpy(out.data(), kMagic, 8);
  store_le32(out.data() + 8, static_cast<std::uint32_t>(header.size()));
  std::memcpy(out.data() + 12, header.data(), header.size());
  std::uint8_t* p = out.data() + 12 + header.size();
  for (float v : series.frames) {
    store_le32(p, std::bit_cast<std::uint32_t>(v));
    p += 4;
  }
  return out;
}

VelocitySeries decode_series(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    fail(Errc::MalformedHeader, "missing CSFDYN01 magic");
  const std::size_t n = load_le32(bytes.data() + 8);
  if (n > kMaxHeaderBytes || 12 + n > bytes.size())
    fail(Errc::MalformedHeader, fmt::format("header length {} exceeds file", n));
  VelocitySeries s;
  s.header = header_from_json(
      std::string_view(reinterpret_cast<const char*>(bytes.data() + 12), n));
  const std::size_t payload = bytes.size() - 12 - n;
  const std::size_t expected = s.header.value_count();
  if (payload != 4 * expected)
    fail(Errc::DimensionMismatch,
         fmt::format("payload has {} bytes, header implies {} float32 values ({} bytes)", payload,
                     expected, 4 * expected));
  s.frames.resize(expected);
  const std::uint8_t* p = bytes.data() + 12 + n;
  for (std::size_t i = 0; i < expected; ++i, p += 4)
    s.frames[i] = std::bit_cast<float>(load_le32(p));
  validate(s);
  return s;
}

VelocitySeries read_series(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_series(bytes);
}

void write_series(const VelocitySeries& series, const std::filesystem::path& path) {
  write_file_bytes(path, encode_series(series));
}

// ---------------------------------------------------------------------------
// masks

RoiMask read_mask(const std::filesystem::path& path, RoiLabel fallback) {
  const auto bytes = read_file_bytes(path);
  std::size_t pos = 0;
  RoiLabel label = fallback;

  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        const std::size_t start = pos;
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        std::string_view comment(reinterpret_cast<const char*>(bytes.data() + start), pos - start);
        constexpr std::string_view tag = "# csfdyn-label ";
        if (comment.starts_with(tag)) label = parse_roi_label(trim(comment.substr(tag.size())));
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) {
    skip_space_and_comments();
    long v = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) && digits < 9) {
      v = v * 10 + (bytes[pos++] - '0');
      ++digits;
    }
    if (digits == 0) fail(Errc::MalformedHeader, fmt::format("PGM {} missing", what));
    return static_cast<int>(v);
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    fail(Errc::MalformedHeader, "mask is not a binary PGM (P5)");
  pos = 2;
  const int w = read_int("width");
  const int h = read_int("height");
  const int maxval = read_int("maxval");
  if (w < 1 || h < 1) fail(Errc::MalformedHeader, "PGM dimensions must be >= 1");
  if (maxval != 255) fail(Errc::MalformedHeader, "PGM maxval must be 255");
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    fail(Errc::MalformedHeader, "PGM header not terminated");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - pos != n)
    fail(Errc::DimensionMismatch,
         fmt::format("PGM raster has {} bytes, expected {}", bytes.size() - pos, n));
  RoiMask mask(w, h, label);
  for (std::size_t i = 0; i < n; ++i) mask.pixels[i] = bytes[pos + i] != 0 ? 1 : 0;
  if (mask.count() == 0) fail(Errc::EmptyMask, fmt::format("{} has no inside pixels", path.string()));
  return mask;
}

void write_mask(const RoiMask& mask, const std::filesystem::path& path) {
  if (mask.pixels.size() != static_cast<std::size_t>(mask.width) * mask.height)
    fail(Errc::DimensionMismatch, "mask raster size does not match its dimensions");
  const std::string header =
      fmt::format("P5\n# csfdyn-label {}\n{} {}\n255\n", to_string(mask.label), mask.width, mask.height);
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + mask.pixels.size());
  for (auto p : mask.pixels) out.push_back(p ? 255 : 0);
  write_file_bytes(path, out);
}

// ---------------------------------------------------------------------------
// physio traces

PhysioTrace read_physio(const std::filesystem::path& path, PhysioKind kind) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoFailure, fmt::format("cannot open {}", path.string()));
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || trim(line) != "t_ms,amplitude")
    fail(Errc::MalformedRow, fmt::format("{}:1: expected header 't_ms,amplitude'", path.string()));
  ++line_no;

  std::vector<double> t, a;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = trim(line);
    if (row.empty()) continue;
    const auto comma = row.find(',');
    double tv = 0.0, av = 0.0;
    if (comma == std::string_view::npos || !parse_double(row.substr(0, comma), tv) ||
        !parse_double(row.substr(comma + 1), av) || !std::isfinite(tv) || !std::isfinite(av))
      fail(Errc::MalformedRow, fmt::format("{}:{}: expected two numeric columns", path.string(), line_no));
    t.push_back(tv);
    a.push_back(av);
  }
  if (t.size() < 2) fail(Errc::MalformedRow, fmt::format("{}: fewer than 2 samples", path.string()));

  std::vector<double> gaps(t.size() - 1);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) gaps[i] = t[i + 1] - t[i];
  std::vector<double> sorted = gaps;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  if (!(median > 0.0)) fail(Errc::NonUniformSampling, "timestamps are not increasing");
  for (std::size_t i = 0; i < gaps.size(); ++i)
    if (std::abs(gaps[i] - median) > 0.01 * median)
      fail(Errc::NonUniformSampling,
           fmt::format("{}:{}: gap {} ms deviates from median {} ms by more than 1%", path.string(),
                       i + 3, gaps[i], median));

  PhysioTrace trace;
  trace.t0 = t.front();
  // Prefer an interval that regenerates every timestamp exactly (true for
  // files this module wrote), so write/read round-trips bit for bit.
  const double span_dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  trace.sample_interval = span_dt;
  auto regenerates = [&](double dt) {
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t.front() + static_cast<double>(i) * dt != t[i]) return false;
    return true;
  };
  double below = span_dt, above = span_dt;
  for (int k = 0; k < 512; ++k) {
    if (regenerates(above)) {
      trace.sample_interval = above;
      break;
    }
    if (regenerates(below)) {
      trace.sample_interval = below;
      break;
    }
    above = std::nextafter(above, INFINITY);
    below = std::nextafter(below, -INFINITY);
  }
  trace.samples = std::move(a);
  trace.kind = kind;
  validate(trace);
  return trace;
}

void write_physio(const PhysioTrace& trace, const std::filesystem::path& path) {
  validate(trace);
  std::string text = "t_ms,amplitude\n";
  for (std::size_t i = 0; i < trace.samples.size(); ++i)
    text += fmt::format("{},{}\n", trace.time(i), trace.samples[i]);
  write_text_file(path, text);
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoFailure, fmt::format("cannot open {}", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(Errc::IoFailure, fmt::format("read error on {}", path.string()));
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoFailure, fmt::format("cannot open {} for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::IoFailure, fmt::format("write error on {}", path.string()));
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace csfdyn
