#pragma once

// Paired comparison of two acquisition methods over a set of subjects.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csfdyn/pipeline.hpp"
#include "csfdyn/stats.hpp"

namespace csfdyn {

struct CohortPair {
  std::string subject;
  std::string conv_run;  // run id of the gated reference
  std::string epi_run;   // run id of the continuous acquisition
};

struct CohortOptions {
  bool paired_t = false;
  bool spearman_permutation = false;
  int min_pairs = 5;
};

struct RoiSummary {
  RoiLabel roi = RoiLabel::Other;
  VolumeUnit unit = VolumeUnit::Milliliter;
  std::vector<stats::PairedSample> pairs;  // a = conv SV, b = epi SV
  stats::StatResult spearman;
  stats::StatResult wilcoxon;
  std::optional<stats::StatResult> paired_t;
  std::optional<double> mean_modulation;  // fraction, over epi runs that have one
  int n_modulation = 0;
};

/// Throws UnpairedSubject for ids missing from `runs`, TooFewPairs when an
/// ROI has fewer than `min_pairs` pairs. Output is ordered by ROI label.
std::vector<RoiSummary> summarize_cohort(const std::map<std::string, SubjectResult>& runs,
                                         const std::vector<CohortPair>& pairs, const CohortOptions& options = {});

}  // namespace csfdyn
