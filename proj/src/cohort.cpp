#include "csfdyn/cohort.hpp"

#include <fmt/format.h>

#include "csfdyn/error.hpp"

namespace csfdyn {

std::vector<RoiSummary> summarize_cohort(const std::map<std::string, SubjectResult>& runs,
                                         const std::vector<CohortPair>& pairs, const CohortOptions& options) {
  std::map<RoiLabel, RoiSummary> by_roi;
  for (const auto& p : pairs) {
    const auto conv = runs.find(p.conv_run);
    if (conv == runs.end())
      fail(Errc::UnpairedSubject, fmt::format("subject '{}': conv run '{}' not found", p.subject, p.conv_run));
    const auto epi = runs.find(p.epi_run);
    if (epi == runs.end())
      fail(Errc::UnpairedSubject, fmt::format("subject '{}': epi run '{}' not found", p.subject, p.epi_run));
    const SubjectResult& c = conv->second;
    const SubjectResult& e = epi->second;
    if (c.roi_label != e.roi_label)
      fail(Errc::UnpairedSubject, fmt::format("subject '{}': runs '{}' and '{}' cover different ROIs", p.subject,
                                              p.conv_run, p.epi_run));
    if (c.global.sv.unit != e.global.sv.unit)
      fail(Errc::UnitMismatch, fmt::format("subject '{}': volume units differ between runs", p.subject));
    RoiSummary& s = by_roi[e.roi_label];
    s.roi = e.roi_label;
    s.unit = e.global.sv.unit;
    s.pairs.push_back({p.subject, c.global.sv.sv, e.global.sv.sv});
    if (e.modulation) {
      s.mean_modulation = s.mean_modulation.value_or(0.0) + *e.modulation;
      ++s.n_modulation;
    }
  }

  std::vector<RoiSummary> out;
  for (auto& [roi, s] : by_roi) {
    if (static_cast<int>(s.pairs.size()) < options.min_pairs)
      fail(Errc::TooFewPairs, fmt::format("{}: {} pairs, need at least {}", to_string(roi), s.pairs.size(),
                                          options.min_pairs));
    s.spearman = stats::spearman(s.pairs, options.spearman_permutation);
    s.wilcoxon = stats::wilcoxon_paired(s.pairs);
    if (options.paired_t) s.paired_t = stats::paired_t(s.pairs);
    if (s.mean_modulation) *s.mean_modulation /= s.n_modulation;
    out.push_back(std::move(s));
  }
  if (out.empty()) fail(Errc::TooFewPairs, "cohort has no pairs");
  return out;
}

}  // namespace csfdyn
