#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace csfdyn::stats {

/// One subject measured by two methods (e.g. a = Conv-PC SV, b = EPI-PC SV).
struct PairedSample {
  std::string subject_id;
  double a = 0.0;
  double b = 0.0;
};

enum class Method {
  SpearmanTApprox,
  SpearmanPermutation,
  WilcoxonExact,
  WilcoxonNormal,
  PairedT,
};
std::string_view to_string(Method m) noexcept;

struct StatResult {
  double statistic = 0.0;  // rs, W or t
  double p_value = 1.0;    // two-sided
  int n = 0;               // pairs used (after dropping zero differences for Wilcoxon)
  int n_dropped = 0;       // zero differences dropped
  Method method = Method::SpearmanTApprox;
};

/// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> x);

/// Largest n for which the exact permutation p of Spearman is offered.
inline constexpr int kMaxSpearmanPermutationN = 10;
/// Exact Wilcoxon is used up to and including this n.
inline constexpr int kMaxWilcoxonExactN = 25;

/// Rank correlation; p from t = rs sqrt((n-2)/(1-rs^2)) on n-2 degrees of
/// freedom, or 2/n! when |rs| = 1. With `exact_permutation`, p counts the
/// permutations whose |rs| reaches the observed one (n <= 10).
StatResult spearman(std::span<const PairedSample> pairs, bool exact_permutation = false);

enum class WilcoxonMode { Auto, Exact, Normal };

/// Signed-rank test on d = b - a. Zero differences are dropped; W = min(W+, W-).
/// Auto picks the exact null distribution for n <= 25, otherwise the normal
/// approximation with continuity and tie correction.
StatResult wilcoxon_paired(std::span<const PairedSample> pairs, WilcoxonMode mode = WilcoxonMode::Auto);

/// Student paired t on d = b - a.
StatResult paired_t(std::span<const PairedSample> pairs);

/// Two-sided tail of Student's t.
double student_t_two_sided(double t, double dof);

/// Throws InvalidArgument on duplicate subject ids, NonFinite on NaN/inf.
void validate(std::span<const PairedSample> pairs);

}  // namespace csfdyn::stats
