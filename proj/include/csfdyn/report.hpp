#pragma once

// Report writers. Every output carries the tool version, the resolved
// configuration and the SHA-256 of each input, and is a pure function of
// its arguments (no timestamps, fixed number formatting).

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "csfdyn/cohort.hpp"
#include "csfdyn/pipeline.hpp"

namespace csfdyn::report {

std::string sha256_hex(std::span<const std::uint8_t> bytes);

struct Provenance {
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, std::string>> inputs;  // (role, sha256)
};

nlohmann::ordered_json provenance_json(const Provenance& p);
nlohmann::ordered_json config_json(const ProcessConfig& c);

nlohmann::ordered_json subject_json(const SubjectResult& r, const ProcessConfig& c, const Provenance& p);
std::string subject_csv(const SubjectResult& r, const Provenance& p);
std::string curves_csv(const SubjectResult& r, const ProcessConfig& c, const Provenance& p);
std::string curves_svg(const SubjectResult& r, const Provenance& p);

nlohmann::ordered_json cohort_json(const std::vector<RoiSummary>& s, const Provenance& p);
std::string cohort_csv(const std::vector<RoiSummary>& s, const Provenance& p);
std::string scatter_svg(const RoiSummary& s, const Provenance& p);

/// Stable text form of a double used in CSV and SVG.
std::string num(double v);

}  // namespace csfdyn::report
