#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "csfdyn/ingest.hpp"
#include "tmpdir.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CSFDYN_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::string process_args(const fs::path& ph, const fs::path& out) {
  return "process --series " + q(ph / "series.csfd") + " --mask " + q(ph / "lumen.pgm") + " --static-mask " +
         q(ph / "static.pgm") + " --belt " + q(ph / "belt.csv") + " --out " + q(out);
}

}  // namespace

TEST_CASE("help and usage errors") {
  TempDir tmp("csfdyn_cli_help");
  CHECK(run("--help", tmp / "log") == 0);
  CHECK(slurp(tmp / "log").find("process") != std::string::npos);
  CHECK(run("process --help", tmp / "log") == 0);
  CHECK(run("frobnicate", tmp / "log") == 2);
  CHECK(run("process --series", tmp / "log") == 2);
  CHECK(run("phantom --preset heart --out " + q(tmp / "x"), tmp / "log") == 2);
}

TEST_CASE("phantom then process: outputs are written and byte-identical across runs") {
  TempDir tmp("csfdyn_cli_process");
  REQUIRE(run("phantom --preset aqueduct --out " + q(tmp / "ph"), tmp / "log") == 0);
  for (const char* f : {"series.csfd", "lumen.pgm", "static.pgm", "belt.csv", "pleth.csv", "spec.json", "truth.json"})
    CHECK(fs::exists(tmp / "ph" / f));
  REQUIRE(run("phantom --preset aqueduct --out " + q(tmp / "ph2"), tmp / "log") == 0);
  CHECK(slurp(tmp / "ph" / "series.csfd") == slurp(tmp / "ph2" / "series.csfd"));

  REQUIRE(run(process_args(tmp / "ph", tmp / "a"), tmp / "log") == 0);
  REQUIRE(run(process_args(tmp / "ph", tmp / "b"), tmp / "log") == 0);
  for (const char* f : {"report.json", "report.csv", "curves.csv", "curves.svg"}) {
    REQUIRE(fs::exists(tmp / "a" / f));
    CHECK(slurp(tmp / "a" / f) == slurp(tmp / "b" / f));
  }
  const auto j = nlohmann::json::parse(slurp(tmp / "a" / "report.json"));
  CHECK(j.dump().find("uL") != std::string::npos);

  // a config file overrides flags
  {
    std::ofstream cfg(tmp / "cfg.json");
    cfg << R"({"sv_convention": "flush-lobe", "formats": ["json"]})";
  }
  REQUIRE(run(process_args(tmp / "ph", tmp / "c") + " --config " + q(tmp / "cfg.json"), tmp / "log") == 0);
  CHECK(fs::exists(tmp / "c" / "report.json"));
  CHECK_FALSE(fs::exists(tmp / "c" / "curves.svg"));
  CHECK(slurp(tmp / "c" / "report.json").find("flush-lobe") != std::string::npos);
}

TEST_CASE("exit codes: missing input, corrupt input, refusal") {
  TempDir tmp("csfdyn_cli_codes");
  REQUIRE(run("phantom --preset spinal --out " + q(tmp / "ph"), tmp / "log") == 0);
  fs::copy(tmp / "ph", tmp / "bad", fs::copy_options::recursive);
  fs::remove(tmp / "bad" / "belt.csv");
  CHECK(run(process_args(tmp / "bad", tmp / "o"), tmp / "log") == 2);

  {
    std::ofstream f(tmp / "bad" / "belt.csv");
    f << "t_ms,value\n0,1\n10,oops\n";
  }
  CHECK(run(process_args(tmp / "bad", tmp / "o"), tmp / "log") == 2);

  {
    std::ofstream f(tmp / "spec.json");
    f << R"({"preset": "spinal", "acquisition": {"duration": 3000}})";
  }
  REQUIRE(run("phantom --spec " + q(tmp / "spec.json") + " --out " + q(tmp / "short"), tmp / "log") == 0);
  CHECK(run(process_args(tmp / "short", tmp / "o"), tmp / "log") == 3);
  const auto log = slurp(tmp / "log");
  CHECK(log.find("TooFewCycles") != std::string::npos);
  CHECK(log.find("gating") != std::string::npos);
}

TEST_CASE("cohort: runs, refusals and determinism") {
  TempDir tmp("csfdyn_cli_cohort");
  REQUIRE(run("phantom --preset aqueduct --cohort 5 --out " + q(tmp / "c5"), tmp / "log") == 0);
  REQUIRE(run("cohort --manifest " + q(tmp / "c5" / "manifest.json") + " --out " + q(tmp / "r1") + " --jobs 4",
              tmp / "log") == 0);
  REQUIRE(run("cohort --manifest " + q(tmp / "c5" / "manifest.json") + " --out " + q(tmp / "r2") + " --jobs 1",
              tmp / "log") == 0);
  for (const char* f : {"cohort.json", "cohort.csv", "scatter_aqueduct.svg"}) {
    REQUIRE(fs::exists(tmp / "r1" / f));
    CHECK(slurp(tmp / "r1" / f) == slurp(tmp / "r2" / f));
  }
  CHECK(fs::exists(tmp / "r1" / "runs" / "s01-epi" / "report.json"));

  // four pairs are too few
  auto m = nlohmann::json::parse(slurp(tmp / "c5" / "manifest.json"));
  auto four = m;
  four["pairs"].erase(four["pairs"].size() - 1);
  {
    std::ofstream f(tmp / "c5" / "four.json");
    f << four.dump();
  }
  CHECK(run("cohort --manifest " + q(tmp / "c5" / "four.json") + " --out " + q(tmp / "r3"), tmp / "log") == 3);
  CHECK(slurp(tmp / "log").find("TooFewPairs") != std::string::npos);

  // a pair naming a run that does not exist
  auto broken = m;
  broken["pairs"][0]["epi"] = "nobody-epi";
  {
    std::ofstream f(tmp / "c5" / "broken.json");
    f << broken.dump();
  }
  CHECK(run("cohort --manifest " + q(tmp / "c5" / "broken.json") + " --out " + q(tmp / "r4"), tmp / "log") == 2);
  CHECK(slurp(tmp / "log").find("UnpairedSubject") != std::string::npos);
}
