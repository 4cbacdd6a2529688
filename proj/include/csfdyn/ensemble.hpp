#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "csfdyn/gating.hpp"
#include "csfdyn/ingest.hpp"

namespace csfdyn {

using Curve32 = std::array<double, kPointsPerCycle>;

enum class Interpolation { PeriodicSpline, Linear };
std::string_view to_string(Interpolation i) noexcept;
Interpolation parse_interpolation(std::string_view s);

/// One cardiac cycle on the normalized phase grid k/32, phase 0 at onset.
struct CanonicalCycle {
  Curve32 q32{};
  int source_cycle_id = 0;
  CycleResp resp_label = CycleResp::Unlabeled;
  double rr = 0.0;  // ms
};

/// Periodic interpolant through (u_j, y_j), u strictly increasing in [0, 1),
/// period 1. Exposed for the metrics refinement check and for tests.
class PeriodicInterpolant {
 public:
  PeriodicInterpolant(std::vector<double> u, std::vector<double> y, Interpolation kind);
  double operator()(double u) const;

 private:
  std::vector<double> u_, y_, m_;  // m_: second derivatives (spline only)
  Interpolation kind_;
};

/// Phase-normalizes the cycle by its own RR and interpolates onto 32 points.
/// Needs at least 4 samples (TooFewSamples).
CanonicalCycle resample_cycle(const LabeledCycle& cycle,
                              Interpolation kind = Interpolation::PeriodicSpline);

struct EnsembleCurve {
  Curve32 mean{};
  Curve32 sd{};  // sample SD, 0 for a single cycle
  int n_cycles = 0;
  double mean_rr = 0.0;
};

struct EnsembleCurves {
  EnsembleCurve global;
  std::optional<EnsembleCurve> insp;  // absent when no cycle carries the label
  std::optional<EnsembleCurve> exp;
  int n_mixed = 0;
  int n_unlabeled = 0;
};

/// Pointwise mean and SD per ensemble. Mixed and unlabeled cycles enter the
/// global ensemble only. Summation is compensated and runs in cycle-id order,
/// so the input order never changes a bit of the output.
EnsembleCurves build_ensembles(std::span<const CanonicalCycle> cycles);

}  // namespace csfdyn
