#pragma once

// On-disk containers and the in-memory model every later stage consumes.
//
// Series container (.csfd):
//   bytes 0..7   magic "CSFDYN01"
//   bytes 8..11  header length N, uint32 little-endian
//   N bytes      UTF-8 JSON object with the SeriesHeader keys below
//   payload      n_frames * height * width float32 little-endian,
//                frame-major, row-major within a frame
//
// Header keys: width, height, n_frames, pixel_spacing_x, pixel_spacing_y,
// slice_thickness, venc, frame_interval, t0, encoding ("PHASE_RADIANS" |
// "VELOCITY_CMPS"), series_kind ("CONTINUOUS_EPI" | "GATED_CONV").

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace csfdyn {

/// Points on the reconstructed cardiac grid; also the frame count of a
/// gated acquisition.
inline constexpr int kPointsPerCycle = 32;

enum class Encoding { PhaseRadians, VelocityCmps };
enum class SeriesKind { ContinuousEpi, GatedConv };
enum class RoiLabel { Aqueduct, SpinalCanal, StaticTissue, Other };
enum class PhysioKind { RespBelt, CardiacPlethysmo };

std::string_view to_string(Encoding e) noexcept;
std::string_view to_string(SeriesKind k) noexcept;
std::string_view to_string(RoiLabel l) noexcept;
std::string_view to_string(PhysioKind k) noexcept;
Encoding parse_encoding(std::string_view s);
SeriesKind parse_series_kind(std::string_view s);
RoiLabel parse_roi_label(std::string_view s);

struct SeriesHeader {
  int width = 0;
  int height = 0;
  int n_frames = 0;
  double pixel_spacing_x = 0.0;  // mm
  double pixel_spacing_y = 0.0;  // mm
  double slice_thickness = 0.0;  // mm
  double venc = 0.0;             // cm/s
  double frame_interval = 0.0;   // ms
  double t0 = 0.0;               // ms
  Encoding encoding = Encoding::PhaseRadians;
  SeriesKind series_kind = SeriesKind::ContinuousEpi;

  std::size_t pixels_per_frame() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::size_t value_count() const noexcept {
    return pixels_per_frame() * static_cast<std::size_t>(n_frames);
  }
  double pixel_area() const noexcept { return pixel_spacing_x * pixel_spacing_y; }
  double timestamp(int frame) const noexcept { return t0 + frame * frame_interval; }

  bool operator==(const SeriesHeader&) const = default;
};

/// Throws MalformedHeader when a header field is out of its documented range.
void validate(const SeriesHeader& header);

struct VelocitySeries {
  SeriesHeader header;
  std::vector<float> frames;

  std::span<const float> frame(int k) const {
    return std::span<const float>(frames).subspan(k * header.pixels_per_frame(),
                                                  header.pixels_per_frame());
  }
  std::vector<double> timestamps() const;

  bool operator==(const VelocitySeries&) const = default;
};

/// Full invariant check: header, payload size, finite values, phase range.
void validate(const VelocitySeries& series);

struct RoiMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // 0 outside, 1 inside
  RoiLabel label = RoiLabel::Other;

  RoiMask() = default;
  RoiMask(int w, int h, RoiLabel l)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0), label(l) {}

  bool inside(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool v = true) {
    pixels[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  std::size_t count() const noexcept;
  /// Flat indices of inside pixels in row-major order.
  std::vector<std::size_t> indices() const;

  bool operator==(const RoiMask&) const = default;
};

/// Pairing check done by consumers: DimensionMismatch on size disagreement,
/// EmptyMask when nothing is inside.
void check_pairing(const RoiMask& mask, const SeriesHeader& header);

struct PhysioTrace {
  double sample_interval = 0.0;  // ms
  double t0 = 0.0;               // ms
  std::vector<double> samples;
  PhysioKind kind = PhysioKind::RespBelt;

  double time(std::size_t i) const noexcept { return t0 + static_cast<double>(i) * sample_interval; }
  double end_time() const noexcept { return time(samples.empty() ? 0 : samples.size() - 1); }
  double duration() const noexcept { return end_time() - t0; }

  bool operator==(const PhysioTrace&) const = default;
};

void validate(const PhysioTrace& trace);

VelocitySeries read_series(const std::filesystem::path& path);
void write_series(const VelocitySeries& series, const std::filesystem::path& path);

/// In-memory encode/decode of the series container, used by the file
/// functions and by anything that hashes or fuzzes the byte stream.
std::vector<std::uint8_t> encode_series(const VelocitySeries& series);
VelocitySeries decode_series(std::span<const std::uint8_t> bytes);

/// Binary PGM (P5, maxval 255); nonzero means inside. The label travels in a
/// "# csfdyn-label <LABEL>" comment; files without it get `fallback`.
RoiMask read_mask(const std::filesystem::path& path, RoiLabel fallback = RoiLabel::Other);
void write_mask(const RoiMask& mask, const std::filesystem::path& path);

/// CSV with header "t_ms,amplitude". Sampling must be uniform to within 1%
/// of the median interval; nothing is resampled here.
PhysioTrace read_physio(const std::filesystem::path& path, PhysioKind kind);
void write_physio(const PhysioTrace& trace, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace csfdyn
