#include <doctest.h>

#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "csfdyn/phantom.hpp"
#include "csfdyn/pipeline.hpp"
#include "csfdyn/report.hpp"
#include "csfdyn/version.hpp"

using namespace csfdyn;

namespace {

// Tags open and close in order; self-closing and processing tags are skipped.
bool balanced_xml(const std::string& s) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  while ((i = s.find('<', i)) != std::string::npos) {
    const std::size_t j = s.find('>', i);
    if (j == std::string::npos) return false;
    const std::string tag = s.substr(i + 1, j - i - 1);
    i = j + 1;
    if (tag.empty() || tag[0] == '?' || tag[0] == '!' || tag.back() == '/') continue;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
    } else {
      stack.push_back(tag.substr(0, tag.find_first_of(" \n\t")));
    }
  }
  return stack.empty();
}

struct Fixture {
  SubjectResult result;
  ProcessConfig config;
  report::Provenance prov;

  Fixture() {
    auto s = phantom::aqueduct_spec();
    s.resp.modulation_insp = 0.09;
    s.acquisition.duration = 40000;
    const auto d = phantom::generate(s);
    ProcessInputs in;
    in.series = d.series;
    in.roi = d.lumen_mask;
    in.belt = d.belt;
    result = process_subject(in, config);
    prov.config = report::config_json(config);
    const auto bytes = encode_series(d.series);
    prov.inputs.emplace_back("series", report::sha256_hex(bytes));
  }
};

}  // namespace

TEST_CASE("SHA-256 of known vectors") {
  const std::string abc = "abc";
  CHECK(report::sha256_hex({reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()}) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(report::sha256_hex({}) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("number formatting is fixed") {
  CHECK(report::num(0.1) == "0.1");
  CHECK(report::num(54.51234567891) == "54.5123457");
  CHECK(report::num(-0.0) == "0");
  CHECK(report::num(1e-12) == "1e-12");
}

TEST_CASE("subject reports carry provenance and are repeatable") {
  const Fixture f;
  const auto j = report::subject_json(f.result, f.config, f.prov);
  CHECK(j.dump() == report::subject_json(f.result, f.config, f.prov).dump());
  const std::string text = j.dump();
  CHECK(text.find(kVersion) != std::string::npos);
  CHECK(text.find(f.prov.inputs[0].second) != std::string::npos);
  CHECK(text.find("\"sv_convention\"") != std::string::npos);

  const auto csv = report::subject_csv(f.result, f.prov);
  const auto curves = report::curves_csv(f.result, f.config, f.prov);
  CHECK(csv == report::subject_csv(f.result, f.prov));
  for (const auto* doc : {&csv, &curves}) {
    CHECK(doc->rfind("# ", 0) == 0);
    CHECK(doc->find(f.prov.inputs[0].second) != std::string::npos);
  }
  std::istringstream in(curves);
  std::string line;
  int rows = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) continue;
    if (!header) {
      CHECK(line.rfind("phase_index,phase,global", 0) == 0);
      header = true;
      continue;
    }
    ++rows;
  }
  CHECK(rows == 32);
}

TEST_CASE("SVG figures are well formed and embed the provenance") {
  const Fixture f;
  const auto svg = report::curves_svg(f.result, f.prov);
  CHECK(svg == report::curves_svg(f.result, f.prov));
  CHECK(balanced_xml(svg));
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("<metadata>") != std::string::npos);
  CHECK(svg.find(f.prov.inputs[0].second) != std::string::npos);
  CHECK(svg.find("#ff0000") != std::string::npos);  // inspiration
  CHECK(svg.find("#0000ff") != std::string::npos);  // expiration
  CHECK_FALSE(std::regex_search(svg, std::regex("nan|inf")));
}

TEST_CASE("cohort outputs") {
  RoiSummary s;
  s.roi = RoiLabel::SpinalCanal;
  for (int i = 0; i < 6; ++i) s.pairs.push_back({"s0" + std::to_string(i), 0.4 + 0.05 * i, 0.42 + 0.05 * i});
  s.spearman.statistic = 1.0;
  s.wilcoxon.p_value = 0.03125;
  s.wilcoxon.method = stats::Method::WilcoxonExact;
  const std::vector<RoiSummary> all{s};
  report::Provenance p;
  const auto j = report::cohort_json(all, p);
  CHECK(j.dump().find("\"SPINAL_CANAL\"") != std::string::npos);
  CHECK(report::cohort_csv(all, p).rfind("# ", 0) == 0);
  const auto svg = report::scatter_svg(s, p);
  CHECK(balanced_xml(svg));
  CHECK(svg == report::scatter_svg(s, p));
}
