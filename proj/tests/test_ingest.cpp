#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "csfdyn/error.hpp"
#include "csfdyn/ingest.hpp"
#include "csfdyn/phantom.hpp"
#include "tmpdir.hpp"

using namespace csfdyn;

namespace {

VelocitySeries small_series(int frames = 3) {
  VelocitySeries s;
  s.header = {4, 3, frames, 1.2, 1.2, 4.0, 10.0, 88.0, 0.0, Encoding::PhaseRadians, SeriesKind::ContinuousEpi};
  for (std::size_t i = 0; i < s.header.value_count(); ++i)
    s.frames.push_back(static_cast<float>(std::sin(0.37 * static_cast<double>(i)) * 3.0));
  return s;
}

Errc code_of(const auto& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::InvariantViolation;
}

void put_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

}  // namespace

TEST_CASE("series write then read is identical bit for bit") {
  TempDir dir("csfdyn_ingest");
  const auto s = small_series();
  write_series(s, dir / "a.csfd");
  const auto r = read_series(dir / "a.csfd");
  CHECK(r == s);
  CHECK(std::memcmp(r.frames.data(), s.frames.data(), s.frames.size() * sizeof(float)) == 0);
}

TEST_CASE("two writes of one series produce identical files") {
  TempDir dir("csfdyn_ingest2");
  const auto s = small_series();
  write_series(s, dir / "a.csfd");
  write_series(s, dir / "b.csfd");
  CHECK(read_file_bytes(dir / "a.csfd") == read_file_bytes(dir / "b.csfd"));
}

TEST_CASE("container layout: magic, little-endian header length, JSON, float32 payload") {
  const auto s = small_series();
  const auto b = encode_series(s);
  REQUIRE(b.size() > 12);
  CHECK(std::string(b.begin(), b.begin() + 8) == "CSFDYN01");
  const std::uint32_t n = b[8] | b[9] << 8 | b[10] << 16 | static_cast<std::uint32_t>(b[11]) << 24;
  const std::string header(b.begin() + 12, b.begin() + 12 + n);
  CHECK(header.find("\"series_kind\"") != std::string::npos);
  CHECK(header.find("\"PHASE_RADIANS\"") != std::string::npos);
  CHECK(b.size() == 12 + n + 4 * s.header.value_count());
  float first;
  std::memcpy(&first, b.data() + 12 + n, 4);
  CHECK(first == s.frames[0]);
}

TEST_CASE("header claiming 10 frames over a 9-frame payload is a dimension mismatch") {
  auto s = small_series(9);
  auto bytes = encode_series(s);
  const std::uint32_t n = bytes[8] | bytes[9] << 8 | bytes[10] << 16 | static_cast<std::uint32_t>(bytes[11]) << 24;
  std::string header(bytes.begin() + 12, bytes.begin() + 12 + n);
  const auto pos = header.find("\"n_frames\":9");
  REQUIRE(pos != std::string::npos);
  header.replace(pos, 12, "\"n_frames\":10");
  std::vector<std::uint8_t> out(bytes.begin(), bytes.begin() + 12);
  put_u32(out, 8, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), bytes.begin() + 12 + n, bytes.end());
  CHECK(code_of([&] { decode_series(out); }) == Errc::DimensionMismatch);
}

TEST_CASE("bad magic, truncated header and bad JSON are malformed headers") {
  auto bytes = encode_series(small_series());
  auto bad = bytes;
  bad[0] = 'X';
  CHECK(code_of([&] { decode_series(bad); }) == Errc::MalformedHeader);
  CHECK(code_of([&] { decode_series(std::span(bytes.data(), 10)); }) == Errc::MalformedHeader);
  auto garbled = bytes;
  garbled[12] = '[';
  CHECK(code_of([&] { decode_series(garbled); }) == Errc::MalformedHeader);
}

TEST_CASE("phase outside [-pi, pi) is refused on read and NaN is refused on write") {
  auto s = small_series();
  s.frames[5] = static_cast<float>(std::numbers::pi) + 0.01f;
  auto bytes = encode_series(small_series());
  const std::uint32_t n = bytes[8] | bytes[9] << 8 | bytes[10] << 16 | static_cast<std::uint32_t>(bytes[11]) << 24;
  std::memcpy(bytes.data() + 12 + n + 4 * 5, &s.frames[5], 4);
  CHECK(code_of([&] { decode_series(bytes); }) == Errc::ValueOutOfRange);

  TempDir dir("csfdyn_ingest3");
  auto nan = small_series();
  nan.frames[2] = std::nanf("");
  CHECK(code_of([&] { write_series(nan, dir / "n.csfd"); }) == Errc::ValueOutOfRange);
  CHECK_FALSE(std::filesystem::exists(dir / "n.csfd"));
}

TEST_CASE("gated series must carry 32 frames") {
  auto s = small_series(31);
  s.header.series_kind = SeriesKind::GatedConv;
  CHECK(code_of([&] { validate(s); }) == Errc::MalformedHeader);
  auto g = small_series(32);
  g.header.series_kind = SeriesKind::GatedConv;
  TempDir dir("csfdyn_ingest4");
  write_series(g, dir / "g.csfd");
  const auto r = read_series(dir / "g.csfd");
  CHECK(r.header.series_kind == SeriesKind::GatedConv);
  CHECK(r.header.n_frames == 32);
}

TEST_CASE("header range checks") {
  auto s = small_series();
  s.header.venc = 0;
  CHECK(code_of([&] { validate(s.header); }) == Errc::MalformedHeader);
  s = small_series();
  s.header.pixel_spacing_x = -1;
  CHECK(code_of([&] { validate(s.header); }) == Errc::MalformedHeader);
  s = small_series();
  s.header.frame_interval = 0;
  CHECK(code_of([&] { validate(s.header); }) == Errc::MalformedHeader);
}

TEST_CASE("timestamps are t0 + k * frame_interval") {
  auto s = small_series(4);
  s.header.t0 = 12.5;
  const auto t = s.timestamps();
  REQUIRE(t.size() == 4);
  CHECK(t[0] == 12.5);
  CHECK(t[3] == 12.5 + 3 * 88.0);
}

TEST_CASE("phantom aqueduct series parses with venc 10 and 88 ms frames") {
  TempDir dir("csfdyn_ingest5");
  const auto d = phantom::generate(phantom::aqueduct_spec());
  write_series(d.series, dir / "s.csfd");
  const auto r = read_series(dir / "s.csfd");
  CHECK(r.header.venc == 10.0);
  CHECK(r.header.frame_interval == 88.0);
  CHECK(r.header.series_kind == SeriesKind::ContinuousEpi);
}

TEST_CASE("masks: label comment, empty masks and pairing") {
  TempDir dir("csfdyn_mask");
  RoiMask m(5, 4, RoiLabel::Aqueduct);
  m.set(1, 1);
  m.set(2, 1);
  m.set(2, 2);
  write_mask(m, dir / "m.pgm");
  const auto r = read_mask(dir / "m.pgm");
  CHECK(r == m);
  CHECK(r.count() == 3);

  RoiMask empty(5, 4, RoiLabel::Other);
  {
    std::ofstream out(dir / "e.pgm", std::ios::binary);
    out << "P5\n5 4\n255\n" << std::string(20, '\0');
  }
  CHECK(code_of([&] { read_mask(dir / "e.pgm"); }) == Errc::EmptyMask);

  // a plain PGM without the label comment takes the fallback label
  {
    std::ofstream out(dir / "plain.pgm", std::ios::binary);
    std::string px(20, '\0');
    px[7] = static_cast<char>(200);
    out << "P5\n5 4\n255\n" << px;
  }
  const auto plain = read_mask(dir / "plain.pgm", RoiLabel::SpinalCanal);
  CHECK(plain.label == RoiLabel::SpinalCanal);
  CHECK(plain.count() == 1);
  CHECK(plain.inside(2, 1));

  // dimension disagreement surfaces at pairing, not at parse
  RoiMask big(64, 64, RoiLabel::Aqueduct);
  big.set(3, 3);
  write_mask(big, dir / "big.pgm");
  const auto parsed = read_mask(dir / "big.pgm");
  SeriesHeader h{128, 128, 1, 1, 1, 1, 10, 88, 0, Encoding::PhaseRadians, SeriesKind::ContinuousEpi};
  CHECK(code_of([&] { check_pairing(parsed, h); }) == Errc::DimensionMismatch);
}

TEST_CASE("physio CSV parsing") {
  TempDir dir("csfdyn_physio");
  {
    std::ofstream out(dir / "ok.csv");
    out << "t_ms,amplitude\n";
    for (int i = 0; i < 50; ++i) out << i * 10 << "," << std::sin(i * 0.1) << "\n";
  }
  const auto t = read_physio(dir / "ok.csv", PhysioKind::RespBelt);
  CHECK(t.sample_interval == 10.0);
  CHECK(t.samples.size() == 50);

  {
    std::ofstream out(dir / "missing.csv");
    out << "t_ms,amplitude\n0,1\n10,2\n20,\n30,4\n";
  }
  try {
    read_physio(dir / "missing.csv", PhysioKind::RespBelt);
    FAIL("expected MalformedRow");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MalformedRow);
    CHECK(std::string(e.what()).find(":4:") != std::string::npos);
  }

  {
    std::ofstream out(dir / "gap.csv");
    out << "t_ms,amplitude\n0,1\n10,2\n20,3\n35,4\n45,5\n";
  }
  CHECK(code_of([&] { read_physio(dir / "gap.csv", PhysioKind::RespBelt); }) == Errc::NonUniformSampling);

  {
    std::ofstream out(dir / "jitter.csv");
    out << "t_ms,amplitude\n0,1\n10,2\n20.05,3\n30,4\n";
  }
  CHECK(read_physio(dir / "jitter.csv", PhysioKind::RespBelt).samples.size() == 4);

  {
    std::ofstream out(dir / "header.csv");
    out << "time,value\n0,1\n10,2\n";
  }
  CHECK(code_of([&] { read_physio(dir / "header.csv", PhysioKind::RespBelt); }) == Errc::MalformedRow);
  CHECK(code_of([&] { read_physio(dir / "absent.csv", PhysioKind::RespBelt); }) == Errc::IoFailure);
}

TEST_CASE("label and enum names parse back") {
  for (auto l : {RoiLabel::Aqueduct, RoiLabel::SpinalCanal, RoiLabel::StaticTissue, RoiLabel::Other})
    CHECK(parse_roi_label(to_string(l)) == l);
  CHECK(parse_roi_label("aqueduct") == RoiLabel::Aqueduct);
  for (auto k : {SeriesKind::ContinuousEpi, SeriesKind::GatedConv}) CHECK(parse_series_kind(to_string(k)) == k);
  for (auto e : {Encoding::PhaseRadians, Encoding::VelocityCmps}) CHECK(parse_encoding(to_string(e)) == e);
}
