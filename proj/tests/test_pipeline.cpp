#include <doctest.h>

#include <map>

#include "csfdyn/cohort.hpp"
#include "csfdyn/error.hpp"
#include "csfdyn/phantom.hpp"
#include "csfdyn/pipeline.hpp"

using namespace csfdyn;

namespace {

ProcessInputs inputs_for(const phantom::PhantomDataset& d, bool with_belt = true) {
  ProcessInputs in;
  in.series = d.series;
  in.roi = d.lumen_mask;
  in.static_mask = d.static_mask;
  if (with_belt) in.belt = d.belt;
  in.plethysmo = d.plethysmo;
  return in;
}

ProcessInputs inputs_for(const phantom::GatedSeries& g, const phantom::PhantomSpec& s) {
  const phantom::PhantomModel m(s);
  ProcessInputs in;
  in.series = g.series;
  in.roi = m.lumen_mask();
  in.static_mask = m.static_mask();
  return in;
}

}  // namespace

TEST_CASE("default modulated aqueduct subject end to end") {
  auto s = phantom::aqueduct_spec();
  s.resp.modulation_insp = 0.09;
  s.acquisition.noise_sd_phase = 0.02;
  const auto d = phantom::generate(s);
  const auto r = process_subject(inputs_for(d));
  CHECK(r.unit == VolumeUnit::Microliter);
  CHECK(r.roi_label == RoiLabel::Aqueduct);
  CHECK(r.n_roi_pixels == 29);
  REQUIRE(r.boundaries.has_value());
  CHECK(r.boundaries->onsets.size() == 70);
  CHECK(r.cycles.size() == 69);
  REQUIRE(r.insp.has_value());
  REQUIRE(r.exp.has_value());
  REQUIRE(r.modulation.has_value());
  CHECK(*r.modulation >= 0.07);
  CHECK(*r.modulation <= 0.11);
  CHECK(r.global.reversal);
  CHECK(r.insp->reversal);
  CHECK(r.exp->reversal);
  CHECK(r.exp->sv.sv == doctest::Approx(50.0).epsilon(0.03));
  CHECK(r.insp->sv.sv == doctest::Approx(54.5).epsilon(0.03));
  CHECK(r.global.sv.sv > r.exp->sv.sv);
  CHECK(r.global.sv.sv < r.insp->sv.sv);
  CHECK(r.insp->curve.n_cycles + r.exp->curve.n_cycles + r.n_mixed == r.global.curve.n_cycles);
  CHECK(std::abs(r.background_offset) < 1e-3);
}

TEST_CASE("processing is bit-for-bit repeatable") {
  auto s = phantom::spinal_spec();
  s.acquisition.noise_sd_phase = 0.05;
  s.acquisition.duration = 40000;
  const auto d = phantom::generate(s);
  const auto a = process_subject(inputs_for(d));
  const auto b = process_subject(inputs_for(d));
  CHECK(a.global.curve.mean == b.global.curve.mean);
  CHECK(a.global.sv.sv == b.global.sv.sv);
  CHECK(a.modulation == b.modulation);
  CHECK(a.unit == VolumeUnit::Milliliter);
}

TEST_CASE("missing belt: unlabeled cycles, or a gating-stage refusal when required") {
  auto s = phantom::aqueduct_spec();
  s.acquisition.duration = 30000;
  const auto d = phantom::generate(s);
  const auto r = process_subject(inputs_for(d, false));
  CHECK_FALSE(r.insp.has_value());
  CHECK_FALSE(r.modulation.has_value());
  CHECK(r.n_unlabeled == r.global.curve.n_cycles);

  ProcessConfig cfg;
  cfg.require_resp = true;
  try {
    process_subject(inputs_for(d, false), cfg);
    FAIL("expected MissingInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingInput);
    CHECK(e.stage() == "gating");
  }
}

TEST_CASE("errors carry the stage that raised them") {
  auto s = phantom::aqueduct_spec();
  s.acquisition.duration = 3000;  // two cycles
  const auto d = phantom::generate(s);
  try {
    process_subject(inputs_for(d));
    FAIL("expected TooFewCycles");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TooFewCycles);
    CHECK(e.stage() == "gating");
  }
  auto in = inputs_for(phantom::generate(phantom::aqueduct_spec()));
  in.roi = RoiMask(10, 10, RoiLabel::Aqueduct);
  try {
    process_subject(in);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DimensionMismatch);
    CHECK(e.stage() == "ingest");  // mask pairing is checked on load
  }
}

TEST_CASE("plethysmograph cardiac source matches the flow-derived result") {
  auto s = phantom::aqueduct_spec();
  s.acquisition.noise_sd_phase = 0.02;
  const auto d = phantom::generate(s);
  ProcessConfig cfg;
  cfg.cardiac_source = CardiacSource::Plethysmo;
  const auto p = process_subject(inputs_for(d), cfg);
  const auto f = process_subject(inputs_for(d));
  CHECK(p.boundaries->method == CycleMethod::Plethysmo);
  CHECK(p.global.sv.sv == doctest::Approx(f.global.sv.sv).epsilon(0.02));
  auto in = inputs_for(d);
  in.plethysmo.reset();
  CHECK_THROWS_AS(process_subject(in, cfg), Error);
}

TEST_CASE("flip_sign negates the curve and keeps the lobe-mean SV") {
  auto s = phantom::aqueduct_spec();
  s.acquisition.duration = 30000;
  const auto d = phantom::generate(s);
  ProcessConfig cfg;
  cfg.flip_sign = true;
  cfg.cardiac_source = CardiacSource::Plethysmo;
  const auto flipped = process_subject(inputs_for(d), cfg);
  cfg.flip_sign = false;
  const auto plain = process_subject(inputs_for(d), cfg);
  for (int k = 0; k < 32; ++k) CHECK(flipped.global.curve.mean[k] == -plain.global.curve.mean[k]);
  CHECK(flipped.global.sv.sv == doctest::Approx(plain.global.sv.sv).epsilon(1e-12));
}

TEST_CASE("gated input takes the direct path") {
  auto s = phantom::aqueduct_spec();
  s.acquisition.series_kind = SeriesKind::GatedConv;
  s.acquisition.venc = 60;
  const auto g = phantom::generate_gated(s);
  const auto r = process_subject(inputs_for(g, s));
  CHECK_FALSE(r.boundaries.has_value());
  CHECK(r.series_kind == SeriesKind::GatedConv);
  CHECK(r.global.curve.n_cycles == 1);
  CHECK(r.global.curve.mean_rr == doctest::Approx(g.mean_rr).epsilon(1e-12));
  CHECK(r.global.sv.sv == doctest::Approx(50.0).epsilon(0.01));
  CHECK_FALSE(r.insp.has_value());
}

TEST_CASE("cohort: conv and epi SVs correlate and summaries refuse thin or broken cohorts") {
  const auto data = phantom::cohort(10, {}, 7, phantom::aqueduct_spec());
  std::map<std::string, SubjectResult> runs;
  std::vector<CohortPair> pairs;
  for (const auto& sub : data) {
    runs.emplace(sub.id + "-epi", process_subject(inputs_for(sub.epi)));
    ProcessInputs in;
    in.series = sub.conv.series;
    in.roi = sub.epi.lumen_mask;
    in.static_mask = sub.epi.static_mask;
    runs.emplace(sub.id + "-conv", process_subject(in));
    pairs.push_back({sub.id, sub.id + "-conv", sub.id + "-epi"});
  }
  const auto summary = summarize_cohort(runs, pairs);
  REQUIRE(summary.size() == 1);
  CHECK(summary[0].roi == RoiLabel::Aqueduct);
  CHECK(summary[0].unit == VolumeUnit::Microliter);
  CHECK(summary[0].pairs.size() == 10);
  CHECK(summary[0].spearman.statistic >= 0.9);
  CHECK(summary[0].n_modulation == 10);
  for (const auto& p : summary[0].pairs) CHECK(p.b == doctest::Approx(p.a).epsilon(0.1));

  const std::vector<CohortPair> few(pairs.begin(), pairs.begin() + 4);
  try {
    summarize_cohort(runs, few);
    FAIL("expected TooFewPairs");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TooFewPairs);
  }
  auto broken = pairs;
  broken[2].epi_run = "s99-epi";
  try {
    summarize_cohort(runs, broken);
    FAIL("expected UnpairedSubject");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnpairedSubject);
  }
}
