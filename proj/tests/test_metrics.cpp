#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "csfdyn/error.hpp"
#include "csfdyn/metrics.hpp"
#include "csfdyn/phantom.hpp"
#include "oracles.hpp"

using namespace csfdyn;

namespace {

std::vector<double> sine32(double amp = 1.0, double offset = 0.0) {
  std::vector<double> q(32);
  for (int k = 0; k < 32; ++k) q[k] = amp * std::sin(2 * std::numbers::pi * k / 32.0) + offset;
  return q;
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

}  // namespace

TEST_CASE("unit sinusoid over 1000 ms: trapezoid lobes against the closed form") {
  const auto q = sine32();
  const auto r = stroke_volume(q, 1000.0);
  // sum of sin(pi k / 16) for k = 1..15 is cot(pi / 32)
  const double trapezoid = 31.25 * (1.0 / std::tan(std::numbers::pi / 32)) / 1000.0;
  CHECK(trapezoid == doctest::Approx(0.3172866).epsilon(1e-7));
  CHECK(r.v_plus == doctest::Approx(trapezoid).epsilon(1e-12));
  CHECK(r.v_minus == doctest::Approx(trapezoid).epsilon(1e-12));
  CHECK(r.sv == doctest::Approx(trapezoid).epsilon(1e-12));
  const double analytic = 1.0 / std::numbers::pi;
  CHECK(std::abs(r.sv - analytic) / analytic < 0.005);
  CHECK(std::abs(r.net_flow) < 1e-12);
  CHECK(r.direction_reversals == 2);
  int positive = 0;
  for (double v : q) positive += v > 0.0;
  CHECK(r.flush_duration_fraction == positive / 32.0);
  CHECK(r.mean_rr == 1000.0);
  CHECK(reversal_check(q));
}

TEST_CASE("lobe volumes match the refined trapezoid oracle with sign changes inside intervals") {
  const auto q = sine32(1.3, 0.41);
  const auto r = stroke_volume(q, 870.0);
  const auto [plus, minus] = oracle::lobe_volumes(q, 870.0 / 32.0 / 1000.0, 100000);
  CHECK(r.v_plus == doctest::Approx(plus).epsilon(1e-9));
  CHECK(r.v_minus == doctest::Approx(minus).epsilon(1e-9));
  CHECK(r.net_flow == doctest::Approx((plus - minus) * 60000.0 / 870.0).epsilon(1e-9));
}

TEST_CASE("zero flow curve") {
  const std::vector<double> q(32, 0.0);
  const auto r = stroke_volume(q, 1000.0);
  CHECK(r.sv == 0.0);
  CHECK(r.v_plus == 0.0);
  CHECK(r.v_minus == 0.0);
  CHECK(r.direction_reversals == 0);
  CHECK_FALSE(reversal_check(q));
}

TEST_CASE("flush-lobe convention and microliters") {
  const auto q = sine32(1.0, 0.2);
  const auto lm = stroke_volume(q, 1000.0);
  const auto fl = stroke_volume(q, 1000.0, VolumeUnit::Milliliter, SvConvention::FlushLobe);
  CHECK(fl.sv == lm.v_plus);
  CHECK(fl.v_plus > fl.v_minus);
  CHECK(lm.sv == doctest::Approx(0.5 * (lm.v_plus + lm.v_minus)));
  const auto ul = stroke_volume(q, 1000.0, VolumeUnit::Microliter);
  CHECK(ul.sv == doctest::Approx(1000.0 * lm.sv).epsilon(1e-15));
  CHECK(ul.net_flow == lm.net_flow);  // always mL/min
  CHECK(to_string(VolumeUnit::Microliter) == "uL");
  CHECK(parse_sv_convention("flush-lobe") == SvConvention::FlushLobe);
  CHECK(code_of([] { parse_sv_convention("max"); }) == Errc::InvalidArgument);
}

TEST_CASE("respiratory SV modulation") {
  const auto exp = stroke_volume(sine32(), 1000.0);
  CHECK(sv_modulation(exp, exp) == 0.0);
  const auto insp = stroke_volume(sine32(1.09), 1000.0);
  CHECK(sv_modulation(insp, exp) == doctest::Approx(0.09).epsilon(1e-12));

  const auto zero = stroke_volume(std::vector<double>(32, 0.0), 1000.0);
  CHECK(code_of([&] { sv_modulation(insp, zero); }) == Errc::DivisionByZeroSv);
  const auto ul = stroke_volume(sine32(), 1000.0, VolumeUnit::Microliter);
  CHECK(code_of([&] { sv_modulation(ul, exp); }) == Errc::UnitMismatch);
}

TEST_CASE("reversal check") {
  std::vector<double> q = sine32(1.0, 2.0);
  CHECK_FALSE(reversal_check(q));
  q[7] = -1e-5;
  CHECK(reversal_check(q));
  q[7] = -1e-7;  // inside the tolerance band
  CHECK_FALSE(reversal_check(q));
  q[7] = std::nan("");
  CHECK(code_of([&] { reversal_check(q); }) == Errc::NonFinite);
}

TEST_CASE("invalid inputs") {
  CHECK(code_of([] { stroke_volume(std::vector<double>{1.0}, 1000.0); }) == Errc::InvalidArgument);
  CHECK(code_of([] { stroke_volume(sine32(), 0.0); }) == Errc::NonFinite);
  auto q = sine32();
  q[2] = INFINITY;
  CHECK(code_of([&] { stroke_volume(q, 1000.0); }) == Errc::NonFinite);
}

TEST_CASE("32-point phantom curve reproduces the true SV within 1%") {
  for (double b2 : {0.0, 0.3}) {
    auto s = phantom::aqueduct_spec();
    s.cardiac.harmonics = {1.0, b2};
    const phantom::PhantomModel m(s);
    std::vector<double> q(32);
    for (int k = 0; k < 32; ++k) q[k] = m.amplitude() * m.shape(k / 32.0);
    const auto r = stroke_volume(q, s.cardiac.rr_mean);
    CHECK(std::abs(r.sv - s.cardiac.sv_true) / s.cardiac.sv_true < 0.01);
    CHECK(std::abs(r.v_plus - r.v_minus) / r.sv < 1e-9);
  }
}
