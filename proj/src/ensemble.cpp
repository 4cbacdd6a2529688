#include "csfdyn/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "csfdyn/error.hpp"
#include "csfdyn/signal.hpp"

namespace csfdyn {

std::string_view to_string(Interpolation i) noexcept {
  return i == Interpolation::PeriodicSpline ? "periodic-spline" : "linear";
}

Interpolation parse_interpolation(std::string_view s) {
  if (s == "periodic-spline" || s == "spline") return Interpolation::PeriodicSpline;
  if (s == "linear") return Interpolation::Linear;
  fail(Errc::InvalidArgument, fmt::format("unknown interpolation '{}'", s));
}

namespace {

// Cyclic tridiagonal solve (Sherman-Morrison on the corner terms).
// sub[i] multiplies x[i-1], sup[i] multiplies x[i+1], indices mod n.
std::vector<double> solve_cyclic(const std::vector<double>& sub, const std::vector<double>& diag,
                                 const std::vector<double>& sup, const std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  const double beta = sub[0];       // row 0, column n-1
  const double alpha = sup[n - 1];  // row n-1, column 0
  const double gamma = -diag[0];

  auto thomas = [&](std::vector<double> d, std::vector<double> r) {
    std::vector<double> c(n);
    c[0] = sup[0] / d[0];
    r[0] /= d[0];
    for (std::size_t i = 1; i < n; ++i) {
      const double denom = d[i] - sub[i] * c[i - 1];
      c[i] = i + 1 < n ? sup[i] / denom : 0.0;
      r[i] = (r[i] - sub[i] * r[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) r[i] -= c[i] * r[i + 1];
    return r;
  };

  std::vector<double> d = diag;
  d[0] -= gamma;
  d[n - 1] -= alpha * beta / gamma;
  const auto x = thomas(d, rhs);
  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = alpha;
  const auto z = thomas(d, u);
  const double fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - fact * z[i];
  return out;
}

}  // namespace

PeriodicInterpolant::PeriodicInterpolant(std::vector<double> u, std::vector<double> y,
                                         Interpolation kind)
    : u_(std::move(u)), y_(std::move(y)), kind_(kind) {
  const std::size_t n = u_.size();
  if (n != y_.size()) fail(Errc::InvalidArgument, "knot and value counts differ");
  if (n < 3) fail(Errc::TooFewSamples, "periodic interpolation needs at least 3 knots");
  for (std::size_t i = 0; i < n; ++i) {
    const bool ordered = i == 0 || u_[i] > u_[i - 1];
    if (!(u_[i] >= 0.0 && u_[i] < 1.0) || !ordered)
      fail(Errc::InvalidArgument, "knots must be strictly increasing in [0, 1)");
  }
  if (kind_ == Interpolation::Linear) return;

  std::vector<double> h(n);
  for (std::size_t j = 0; j + 1 < n; ++j) h[j] = u_[j + 1] - u_[j];
  h[n - 1] = 1.0 + u_[0] - u_[n - 1];
  std::vector<double> sub(n), diag(n), sup(n), rhs(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t prev = (j + n - 1) % n;
    const std::size_t next = (j + 1) % n;
    sub[j] = h[prev];
    diag[j] = 2.0 * (h[prev] + h[j]);
    sup[j] = h[j];
    rhs[j] = 6.0 * ((y_[next] - y_[j]) / h[j] - (y_[j] - y_[prev]) / h[prev]);
  }
  m_ = solve_cyclic(sub, diag, sup, rhs);
}

double PeriodicInterpolant::operator()(double u) const {
  u -= std::floor(u);
  const std::size_t n = u_.size();
  // interval j covers [u_j, u_{j+1}); the last one wraps through 1
  std::size_t j;
  double x = u;
  if (u < u_[0] || u >= u_[n - 1]) {
    j = n - 1;
    if (u < u_[0]) x += 1.0;
  } else {
    j = static_cast<std::size_t>(std::upper_bound(u_.begin(), u_.end(), u) - u_.begin()) - 1;
  }
  const std::size_t next = (j + 1) % n;
  const double left = u_[j];
  const double right = j + 1 < n ? u_[j + 1] : u_[0] + 1.0;
  const double h = right - left;
  const double a = (right - x) / h;
  const double b = (x - left) / h;
  if (kind_ == Interpolation::Linear) return a * y_[j] + b * y_[next];
  return a * y_[j] + b * y_[next] +
         ((a * a * a - a) * m_[j] + (b * b * b - b) * m_[next]) * (h * h) / 6.0;
}

CanonicalCycle resample_cycle(const LabeledCycle& cycle, Interpolation kind) {
  if (cycle.t.size() < 4)
    fail(Errc::TooFewSamples,
         fmt::format("cycle {} holds {} samples, need at least 4", cycle.id, cycle.t.size()));
  if (cycle.t.size() != cycle.q.size()) fail(Errc::InvalidArgument, "cycle time/flow sizes differ");
  const double rr = cycle.end - cycle.start;
  if (!(rr > 0.0)) fail(Errc::InvalidArgument, "cycle end must follow its start");

  std::vector<double> u(cycle.t.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = (cycle.t[i] - cycle.start) / rr;
  PeriodicInterpolant f(std::move(u), cycle.q, kind);

  CanonicalCycle out;
  out.source_cycle_id = cycle.id;
  out.resp_label = cycle.resp_label;
  out.rr = rr;
  for (int k = 0; k < kPointsPerCycle; ++k)
    out.q32[k] = f(static_cast<double>(k) / kPointsPerCycle);
  return out;
}

namespace {

EnsembleCurve average(const std::vector<const CanonicalCycle*>& members) {
  EnsembleCurve e;
  e.n_cycles = static_cast<int>(members.size());
  const double n = static_cast<double>(members.size());
  signal::CompensatedSum rr;
  for (const auto* c : members) rr.add(c->rr);
  e.mean_rr = rr.value() / n;
  for (int k = 0; k < kPointsPerCycle; ++k) {
    // offsets from the first member keep identical members exact
    const double ref = members.front()->q32[k];
    signal::CompensatedSum s;
    for (const auto* c : members) s.add(c->q32[k] - ref);
    e.mean[k] = ref + s.value() / n;
    if (members.size() > 1) {
      signal::CompensatedSum ss;
      for (const auto* c : members) {
        const double d = c->q32[k] - e.mean[k];
        ss.add(d * d);
      }
      e.sd[k] = std::sqrt(ss.value() / (n - 1.0));
    }
  }
  return e;
}

}  // namespace

EnsembleCurves build_ensembles(std::span<const CanonicalCycle> cycles) {
  if (cycles.empty()) fail(Errc::EmptyEnsemble, "no cycles to average");
  std::vector<const CanonicalCycle*> all;
  for (const auto& c : cycles) all.push_back(&c);
  std::stable_sort(all.begin(), all.end(), [](const CanonicalCycle* a, const CanonicalCycle* b) {
    return a->source_cycle_id < b->source_cycle_id;
  });

  std::vector<const CanonicalCycle*> insp, exp;
  EnsembleCurves out;
  for (const auto* c : all) {
    switch (c->resp_label) {
      case CycleResp::Inspiration: insp.push_back(c); break;
      case CycleResp::Expiration: exp.push_back(c); break;
      case CycleResp::Mixed: ++out.n_mixed; break;
      case CycleResp::Unlabeled: ++out.n_unlabeled; break;
    }
  }
  out.global = average(all);
  if (!insp.empty()) out.insp = average(insp);
  if (!exp.empty()) out.exp = average(exp);
  return out;
}

}  // namespace csfdyn
