#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "csfdyn/ensemble.hpp"
#include "csfdyn/error.hpp"
#include "csfdyn/flow.hpp"
#include "csfdyn/gating.hpp"
#include "csfdyn/phantom.hpp"
#include "csfdyn/velocity.hpp"

using namespace csfdyn;

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

LabeledCycle sampled_cycle(int n, double rr, auto f, CycleResp label = CycleResp::Unlabeled, int id = 0) {
  LabeledCycle c;
  c.id = id;
  c.start = 500.0;
  c.end = 500.0 + rr;
  c.resp_label = label;
  for (int j = 0; j < n; ++j) {
    const double u = static_cast<double>(j) / n;
    c.t.push_back(c.start + u * rr);
    c.q.push_back(f(u));
  }
  return c;
}

CanonicalCycle canonical(const Curve32& q, CycleResp label, int id, double rr = 1000) {
  CanonicalCycle c;
  c.q32 = q;
  c.resp_label = label;
  c.source_cycle_id = id;
  c.rr = rr;
  return c;
}

}  // namespace

TEST_CASE("a cycle already on the 32-point grid is returned unchanged") {
  const auto c = sampled_cycle(32, 960, [](double u) { return std::sin(kTwoPi * u) + 0.3 * std::cos(3 * kTwoPi * u); });
  for (auto kind : {Interpolation::PeriodicSpline, Interpolation::Linear}) {
    const auto r = resample_cycle(c, kind);
    for (int k = 0; k < kPointsPerCycle; ++k) CHECK(std::abs(r.q32[k] - c.q[k]) < 1e-9);
    CHECK(r.rr == 960.0);
  }
}

TEST_CASE("ten samples of a sine resample within 1e-3 on the spline") {
  const auto c = sampled_cycle(10, 1100, [](double u) { return std::sin(kTwoPi * u); });
  const auto r = resample_cycle(c);
  double worst = 0;
  for (int k = 0; k < kPointsPerCycle; ++k) worst = std::max(worst, std::abs(r.q32[k] - std::sin(kTwoPi * k / 32.0)));
  CHECK(worst < 1e-3);
  CHECK(worst > 1e-5);  // a spline, not the analytic curve

  const auto lin = resample_cycle(c, Interpolation::Linear);
  double worst_lin = 0;
  for (int k = 0; k < kPointsPerCycle; ++k)
    worst_lin = std::max(worst_lin, std::abs(lin.q32[k] - std::sin(kTwoPi * k / 32.0)));
  CHECK(worst_lin > worst);
}

TEST_CASE("periodic spline wraps smoothly across the cycle boundary") {
  PeriodicInterpolant s({0.1, 0.3, 0.55, 0.8}, {1, -1, 2, 0.5}, Interpolation::PeriodicSpline);
  CHECK(s(0.1) == doctest::Approx(1.0));
  CHECK(s(0.8) == doctest::Approx(0.5));
  CHECK(s(0.0) == doctest::Approx(s(1.0)));
  const double h = 1e-6;
  CHECK((s(h) - s(-h)) / (2 * h) == doctest::Approx((s(1 + h) - s(1 - h)) / (2 * h)).epsilon(1e-4));
  CHECK_THROWS_AS(PeriodicInterpolant({0.0, 0.5}, {1, 2}, Interpolation::PeriodicSpline), Error);
  CHECK_THROWS_AS(PeriodicInterpolant({0.0, 0.5, 0.5}, {1, 2, 3}, Interpolation::Linear), Error);
}

TEST_CASE("a cycle with three samples is refused") {
  const auto c = sampled_cycle(3, 1000, [](double u) { return u; });
  try {
    resample_cycle(c);
    FAIL("expected TooFewSamples");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TooFewSamples);
  }
  CHECK_NOTHROW(resample_cycle(sampled_cycle(4, 1000, [](double u) { return u; })));
}

TEST_CASE("identical cycles have zero SD; opposite cycles average to zero") {
  Curve32 q{};
  for (int k = 0; k < 32; ++k) q[k] = std::sin(kTwoPi * k / 32.0);
  std::vector<CanonicalCycle> same;
  for (int i = 0; i < 6; ++i) same.push_back(canonical(q, CycleResp::Expiration, i));
  const auto e = build_ensembles(same);
  CHECK(e.global.n_cycles == 6);
  REQUIRE(e.exp.has_value());
  CHECK_FALSE(e.insp.has_value());
  for (int k = 0; k < 32; ++k) {
    CHECK(e.global.sd[k] == 0.0);
    CHECK(e.global.mean[k] == q[k]);
    CHECK(e.exp->mean[k] == q[k]);
  }

  Curve32 neg{};
  for (int k = 0; k < 32; ++k) neg[k] = -q[k];
  const std::vector<CanonicalCycle> pm{canonical(q, CycleResp::Mixed, 0), canonical(neg, CycleResp::Mixed, 1)};
  const auto z = build_ensembles(pm);
  for (double v : z.global.mean) CHECK(v == 0.0);
  CHECK(z.n_mixed == 2);
  CHECK_FALSE(z.insp.has_value());
  CHECK_FALSE(z.exp.has_value());
}

TEST_CASE("single-cycle ensembles have zero SD and empty input is refused") {
  Curve32 q{};
  q[3] = 1;
  const std::vector<CanonicalCycle> one{canonical(q, CycleResp::Inspiration, 0, 800),
                                        canonical(q, CycleResp::Unlabeled, 1, 1200)};
  const auto e = build_ensembles(one);
  REQUIRE(e.insp.has_value());
  CHECK(e.insp->n_cycles == 1);
  CHECK(e.insp->sd[3] == 0.0);
  CHECK(e.insp->mean_rr == 800.0);
  CHECK(e.global.mean_rr == 1000.0);
  CHECK(e.n_unlabeled == 1);
  try {
    build_ensembles({});
    FAIL("expected EmptyEnsemble");
  } catch (const Error& err) {
    CHECK(err.code() == Errc::EmptyEnsemble);
  }
}

TEST_CASE("modulated phantom: inspiratory to expiratory amplitude ratio follows the modulation") {
  auto s = phantom::aqueduct_spec();
  s.resp.modulation_insp = 0.09;
  s.acquisition.noise_sd_phase = 0.01;
  const auto d = phantom::generate(s);
  const auto flow = extract_flow(unwrap_temporal(phase_to_velocity(d.series)), d.lumen_mask);
  const auto cycles = label_cycles(detect_cycles_from_flow(flow), classify_resp(d.belt), flow);
  std::vector<CanonicalCycle> canon;
  for (const auto& c : cycles) canon.push_back(resample_cycle(c));
  const auto e = build_ensembles(canon);
  REQUIRE(e.insp.has_value());
  REQUIRE(e.exp.has_value());
  CHECK(e.insp->n_cycles + e.exp->n_cycles + e.n_mixed == e.global.n_cycles);
  const auto peak = [](const Curve32& c) { return *std::max_element(c.begin(), c.end()); };
  CHECK(peak(e.insp->mean) / peak(e.exp->mean) == doctest::Approx(1.09).epsilon(0.02));
}
