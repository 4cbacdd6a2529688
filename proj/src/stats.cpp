#include "csfdyn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "csfdyn/error.hpp"
#include "csfdyn/signal.hpp"

namespace csfdyn::stats {

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::SpearmanTApprox: return "SPEARMAN_T_APPROX";
    case Method::SpearmanPermutation: return "SPEARMAN_PERMUTATION";
    case Method::WilcoxonExact: return "WILCOXON_EXACT";
    case Method::WilcoxonNormal: return "WILCOXON_NORMAL";
    case Method::PairedT: return "PAIRED_T";
  }
  return "UNKNOWN";
}

void validate(std::span<const PairedSample> pairs) {
  std::set<std::string> seen;
  for (const auto& p : pairs) {
    if (!std::isfinite(p.a) || !std::isfinite(p.b))
      fail(Errc::NonFinite, fmt::format("subject '{}' has a non-finite value", p.subject_id));
    if (!seen.insert(p.subject_id).second)
      fail(Errc::InvalidArgument, fmt::format("subject id '{}' appears twice", p.subject_id));
  }
}

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double student_t_two_sided(double t, double dof) {
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(dof);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double rank_correlation(std::span<const double> ra, std::span<const double> rb) {
  return signal::pearson(ra, rb);
}

}  // namespace

StatResult spearman(std::span<const PairedSample> pairs, bool exact_permutation) {
  validate(pairs);
  const int n = static_cast<int>(pairs.size());
  if (n < 4) fail(Errc::TooFewPairs, fmt::format("Spearman needs at least 4 pairs, got {}", n));
  std::vector<double> a, b;
  for (const auto& p : pairs) {
    a.push_back(p.a);
    b.push_back(p.b);
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  if (std::all_of(a.begin(), a.end(), [&](double v) { return v == a[0]; }) ||
      std::all_of(b.begin(), b.end(), [&](double v) { return v == b[0]; }))
    fail(Errc::ZeroVariance, "one side of the pairs is constant");

  StatResult r;
  r.n = n;
  r.statistic = rank_correlation(ra, rb);

  if (exact_permutation) {
    if (n > kMaxSpearmanPermutationN)
      fail(Errc::InvalidArgument,
           fmt::format("exact Spearman permutation limited to n <= {}", kMaxSpearmanPermutationN));
    r.method = Method::SpearmanPermutation;
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<double> permuted(static_cast<std::size_t>(n));
    const double observed = std::abs(r.statistic) - 1e-12;
    std::uint64_t hits = 0, total = 0;
    do {
      for (int i = 0; i < n; ++i) permuted[i] = rb[perm[i]];
      if (std::abs(rank_correlation(ra, permuted)) >= observed) ++hits;
      ++total;
    } while (std::next_permutation(perm.begin(), perm.end()));
    r.p_value = static_cast<double>(hits) / static_cast<double>(total);
    return r;
  }

  r.method = Method::SpearmanTApprox;
  if (std::abs(r.statistic) >= 1.0) {
    r.p_value = 2.0 / factorial(n);
  } else {
    const double t = r.statistic * std::sqrt((n - 2) / (1.0 - r.statistic * r.statistic));
    r.p_value = std::max(student_t_two_sided(t, n - 2), 2.0 / factorial(n));
  }
  return r;
}

StatResult wilcoxon_paired(std::span<const PairedSample> pairs, WilcoxonMode mode) {
  validate(pairs);
  std::vector<double> d;
  int dropped = 0;
  for (const auto& p : pairs) {
    const double diff = p.b - p.a;
    if (diff == 0.0) ++dropped;
    else d.push_back(diff);
  }
  if (!pairs.empty() && d.empty()) fail(Errc::AllZeroDifferences, "every paired difference is zero");
  const int n = static_cast<int>(d.size());
  if (n < 5)
    fail(Errc::TooFewPairs, fmt::format("Wilcoxon needs at least 5 non-zero differences, got {}", n));

  std::vector<double> mag(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) mag[i] = std::abs(d[i]);
  const auto ranks = average_ranks(mag);

  // doubled ranks are integers even with ties
  std::vector<int> r2(ranks.size());
  long w_plus2 = 0, total2 = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    r2[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
    total2 += r2[i];
    if (d[i] > 0.0) w_plus2 += r2[i];
  }
  const long w2 = std::min(w_plus2, total2 - w_plus2);

  StatResult r;
  r.n = n;
  r.n_dropped = dropped;
  r.statistic = 0.5 * static_cast<double>(w2);

  const bool exact = mode == WilcoxonMode::Exact || (mode == WilcoxonMode::Auto && n <= kMaxWilcoxonExactN);
  if (exact) {
    if (n > kMaxWilcoxonExactN + 5)
      fail(Errc::InvalidArgument, fmt::format("exact Wilcoxon limited to n <= {}", kMaxWilcoxonExactN + 5));
    // null distribution of the doubled positive-rank sum over all 2^n sign
    // assignments; counts stay exact in doubles up to 2^53
    std::vector<double> count(static_cast<std::size_t>(total2) + 1, 0.0);
    count[0] = 1.0;
    long reach = 0;
    for (int rank : r2) {
      for (long s = reach; s >= 0; --s)
        if (count[s] != 0.0) count[s + rank] += count[s];
      reach += rank;
    }
    double extreme = 0.0;
    for (long s = 0; s <= total2; ++s)
      if (std::min(s, total2 - s) <= w2) extreme += count[s];
    r.p_value = extreme / std::ldexp(1.0, n);
    r.method = Method::WilcoxonExact;
    return r;
  }

  const double nn = n;
  const double mean = nn * (nn + 1.0) / 4.0;
  double tie_term = 0.0;
  {
    std::vector<double> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      tie_term += t * t * t - t;
      i = j;
    }
  }
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  const double z = std::max(0.0, std::abs(r.statistic - mean) - 0.5) / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  r.method = Method::WilcoxonNormal;
  return r;
}

StatResult paired_t(std::span<const PairedSample> pairs) {
  validate(pairs);
  const int n = static_cast<int>(pairs.size());
  if (n < 2) fail(Errc::TooFewPairs, "paired t needs at least 2 pairs");
  std::vector<double> d;
  for (const auto& p : pairs) d.push_back(p.b - p.a);
  const double m = signal::mean(d);
  const double sd = signal::stddev(d);
  if (sd == 0.0) fail(Errc::ZeroVariance, "paired differences are constant");
  StatResult r;
  r.n = n;
  r.method = Method::PairedT;
  r.statistic = m / (sd / std::sqrt(static_cast<double>(n)));
  r.p_value = student_t_two_sided(r.statistic, n - 1);
  return r;
}

}  // namespace csfdyn::stats
