// csfdyn: process one subject, compare a cohort, or write phantom datasets.

#include <filesystem>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "csfdyn/cohort.hpp"
#include "csfdyn/error.hpp"
#include "csfdyn/ingest.hpp"
#include "csfdyn/phantom.hpp"
#include "csfdyn/pipeline.hpp"
#include "csfdyn/report.hpp"
#include "csfdyn/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using ojson = nlohmann::ordered_json;
using namespace csfdyn;

namespace {

json read_json(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    fail(Errc::InvalidArgument, fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_json(const fs::path& path, const ojson& j) { write_text_file(path, j.dump(2) + "\n"); }

struct InputPaths {
  std::string series, mask, static_mask, belt, pleth;
  std::string roi_label;  // used when the mask carries none
};

struct ProcessFlags {
  ProcessConfig config;
  std::string cardiac_source = "flow";
  std::string interpolation = "periodic-spline";
  std::string sv_convention = "lobe-mean";
  std::vector<std::string> formats{"csv", "json", "svg"};
};

void add_process_flags(CLI::App& cmd, ProcessFlags& f) {
  auto& c = f.config;
  cmd.add_option("--min-rr", c.gating.min_rr, "Shortest accepted RR interval and refractory period (ms)")
      ->capture_default_str();
  cmd.add_option("--max-rr", c.gating.max_rr, "Longest accepted RR interval and detrend window (ms)")
      ->capture_default_str();
  cmd.add_option("--prominence", c.gating.prominence_fraction,
                 "Peak prominence threshold as a fraction of the 75th percentile of positive excursions")
      ->capture_default_str();
  cmd.add_option("--max-rr-cv", c.gating.max_rr_cv, "Refuse flow self-gating above this RR variation")
      ->capture_default_str();
  cmd.add_option("--min-cycles", c.gating.min_cycles, "Fewest cycles accepted")->capture_default_str();
  cmd.add_option("--resp-window", c.resp.smoothing_window, "Belt smoothing window (ms)")->capture_default_str();
  cmd.add_option("--hysteresis", c.resp.hysteresis, "Belt hysteresis as a fraction of the signal range")
      ->capture_default_str();
  cmd.add_option("--min-run", c.resp.min_run, "Shortest respiratory label run kept (ms)")->capture_default_str();
  cmd.add_option("--cardiac-source", f.cardiac_source, "Cardiac timing: flow or plethysmo")
      ->check(CLI::IsMember({"flow", "plethysmo", "pleth"}))
      ->capture_default_str();
  cmd.add_option("--interpolation", f.interpolation, "32-point resampling: periodic-spline or linear")
      ->check(CLI::IsMember({"periodic-spline", "spline", "linear"}))
      ->capture_default_str();
  cmd.add_option("--sv-convention", f.sv_convention, "Stroke volume: lobe-mean or flush-lobe")
      ->check(CLI::IsMember({"lobe-mean", "flush-lobe"}))
      ->capture_default_str();
  cmd.add_flag("--flip-sign", c.flip_sign, "Negate flow (for reversed encoding direction)");
  cmd.add_option("--anchor-frame", c.anchor_frame, "Frame assumed free of aliasing for unwrapping")
      ->capture_default_str();
  cmd.add_flag("--refine-roi", c.refine, "Grow the ROI by temporal correlation with the seed");
  cmd.add_option("--refine-threshold", c.refine_threshold, "Correlation threshold for --refine-roi")
      ->capture_default_str();
  cmd.add_flag("--require-resp", c.require_resp, "Fail when no belt trace is given");
  cmd.add_option("--formats", f.formats, "Report formats to write (csv json svg)")
      ->check(CLI::IsMember({"csv", "json", "svg"}))
      ->delimiter(',')
      ->capture_default_str();
}

void add_input_flags(CLI::App& cmd, InputPaths& in, bool required) {
  auto* s = cmd.add_option("--series", in.series, "Velocity series (.csfd)");
  auto* m = cmd.add_option("--mask", in.mask, "ROI mask (.pgm)");
  if (required) {
    s->required();
    m->required();
  }
  cmd.add_option("--static-mask", in.static_mask, "Static tissue mask for background correction (.pgm)");
  cmd.add_option("--belt", in.belt, "Respiratory belt trace (.csv)");
  cmd.add_option("--pleth", in.pleth, "Plethysmograph trace (.csv)");
  cmd.add_option("--roi-label", in.roi_label, "ROI label when the mask file carries none")
      ->check(CLI::IsMember({"AQUEDUCT", "SPINAL_CANAL", "STATIC_TISSUE", "OTHER"}));
}

// Keys of a process config file; any other key is rejected.
void apply_config(const json& j, ProcessFlags& f, InputPaths* in, const fs::path& base) {
  if (!j.is_object()) fail(Errc::InvalidArgument, "config must be a JSON object");
  auto& c = f.config;
  auto path = [&](const json& v) { return (base / v.get<std::string>()).lexically_normal().string(); };
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const json& v = it.value();
      if (k == "min_rr_ms") c.gating.min_rr = v.get<double>();
      else if (k == "max_rr_ms") c.gating.max_rr = v.get<double>();
      else if (k == "prominence_fraction") c.gating.prominence_fraction = v.get<double>();
      else if (k == "max_rr_cv") c.gating.max_rr_cv = v.get<double>();
      else if (k == "min_cycles") c.gating.min_cycles = v.get<int>();
      else if (k == "resp_smoothing_ms") c.resp.smoothing_window = v.get<double>();
      else if (k == "resp_hysteresis") c.resp.hysteresis = v.get<double>();
      else if (k == "resp_min_run_ms") c.resp.min_run = v.get<double>();
      else if (k == "cardiac_source") f.cardiac_source = v.get<std::string>();
      else if (k == "interpolation") f.interpolation = v.get<std::string>();
      else if (k == "sv_convention") f.sv_convention = v.get<std::string>();
      else if (k == "flip_sign") c.flip_sign = v.get<bool>();
      else if (k == "anchor_frame") c.anchor_frame = v.get<int>();
      else if (k == "refine_roi") c.refine = v.get<bool>();
      else if (k == "refine_threshold") c.refine_threshold = v.get<double>();
      else if (k == "require_resp") c.require_resp = v.get<bool>();
      else if (k == "formats") f.formats = v.get<std::vector<std::string>>();
      else if (in && k == "series") in->series = path(v);
      else if (in && k == "mask") in->mask = path(v);
      else if (in && k == "static_mask") in->static_mask = path(v);
      else if (in && k == "belt") in->belt = path(v);
      else if (in && k == "pleth") in->pleth = path(v);
      else if (in && k == "roi_label") in->roi_label = v.get<std::string>();
      else fail(Errc::InvalidArgument, fmt::format("unknown config key '{}'", k));
    }
  } catch (const json::exception& e) {
    fail(Errc::InvalidArgument, fmt::format("config: {}", e.what()));
  }
}

ProcessConfig resolve(ProcessFlags& f) {
  f.config.cardiac_source = parse_cardiac_source(f.cardiac_source);
  f.config.interpolation = parse_interpolation(f.interpolation);
  f.config.sv_convention = parse_sv_convention(f.sv_convention);
  for (const auto& fmt_name : f.formats)
    if (fmt_name != "csv" && fmt_name != "json" && fmt_name != "svg")
      fail(Errc::InvalidArgument, fmt::format("unknown report format '{}'", fmt_name));
  validate(f.config);
  return f.config;
}

struct LoadedInputs {
  ProcessInputs inputs;
  report::Provenance provenance;
};

LoadedInputs load_inputs(const InputPaths& p, const ProcessFlags& f) {
  LoadedInputs out;
  auto& prov = out.provenance;
  auto hash = [&](const char* role, const std::string& path) {
    prov.inputs.emplace_back(role, report::sha256_hex(read_file_bytes(path)));
  };
  try {
    if (p.series.empty()) fail(Errc::MissingInput, "no series given");
    if (p.mask.empty()) fail(Errc::MissingInput, "no ROI mask given");
    const auto bytes = read_file_bytes(p.series);
    prov.inputs.emplace_back("series", report::sha256_hex(bytes));
    out.inputs.series = decode_series(bytes);
    const RoiLabel fallback = p.roi_label.empty() ? RoiLabel::Other : parse_roi_label(p.roi_label);
    hash("mask", p.mask);
    out.inputs.roi = read_mask(p.mask, fallback);
    if (!p.static_mask.empty()) {
      hash("static_mask", p.static_mask);
      out.inputs.static_mask = read_mask(p.static_mask, RoiLabel::StaticTissue);
    }
    if (!p.belt.empty()) {
      hash("belt", p.belt);
      out.inputs.belt = read_physio(p.belt, PhysioKind::RespBelt);
    }
    if (!p.pleth.empty()) {
      hash("pleth", p.pleth);
      out.inputs.plethysmo = read_physio(p.pleth, PhysioKind::CardiacPlethysmo);
    }
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage("ingest");
  }
  prov.config = report::config_json(f.config);
  prov.config["formats"] = f.formats;
  return out;
}

bool wants(const ProcessFlags& f, const char* fmt_name) {
  return std::find(f.formats.begin(), f.formats.end(), fmt_name) != f.formats.end();
}

void write_subject(const fs::path& out, const SubjectResult& r, const ProcessFlags& f,
                   const report::Provenance& prov) {
  fs::create_directories(out);
  if (wants(f, "json")) write_json(out / "report.json", report::subject_json(r, f.config, prov));
  if (wants(f, "csv")) {
    write_text_file(out / "report.csv", report::subject_csv(r, prov));
    write_text_file(out / "curves.csv", report::curves_csv(r, f.config, prov));
  }
  if (wants(f, "svg")) write_text_file(out / "curves.svg", report::curves_svg(r, prov));
}

// ---------------------------------------------------------------------------

int cmd_process(InputPaths in, ProcessFlags flags, const std::string& config_path, const std::string& out) {
  if (!config_path.empty())
    apply_config(read_json(config_path), flags, &in, fs::path(config_path).parent_path());
  resolve(flags);
  const auto loaded = load_inputs(in, flags);
  const SubjectResult r = process_subject(loaded.inputs, flags.config);
  write_subject(out, r, flags, loaded.provenance);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << fmt::format("{}: global SV {} {}", to_string(r.roi_label), report::num(r.global.sv.sv),
                           to_string(r.unit));
  if (r.modulation) std::cout << fmt::format(", modulation {:+.2f}%", 100.0 * *r.modulation);
  std::cout << "\n";
  return 0;
}

struct RunSpec {
  std::string id;
  InputPaths paths;
  ProcessFlags flags;
};

int cmd_cohort(const std::string& manifest_path, ProcessFlags shared, const std::string& config_path,
               const std::string& out, const CohortOptions& options, unsigned jobs) {
  const fs::path base = fs::path(manifest_path).parent_path();
  if (!config_path.empty()) apply_config(read_json(config_path), shared, nullptr, {});
  const json manifest = read_json(manifest_path);
  std::vector<RunSpec> runs;
  std::vector<CohortPair> pairs;
  try {
    if (!manifest.is_object()) fail(Errc::InvalidArgument, "manifest must be a JSON object");
    for (auto it = manifest.begin(); it != manifest.end(); ++it)
      if (it.key() != "runs" && it.key() != "pairs" && it.key() != "config")
        fail(Errc::InvalidArgument, fmt::format("unknown manifest key '{}'", it.key()));
    if (manifest.contains("config")) apply_config(manifest["config"], shared, nullptr, base);
    for (const auto& r : manifest.at("runs")) {
      RunSpec s;
      s.id = r.at("id").get<std::string>();
      s.flags = shared;
      json rest = r;
      rest.erase("id");
      apply_config(rest, s.flags, &s.paths, base);
      for (const auto& other : runs)
        if (other.id == s.id) fail(Errc::InvalidArgument, fmt::format("duplicate run id '{}'", s.id));
      runs.push_back(std::move(s));
    }
    for (const auto& p : manifest.at("pairs"))
      pairs.push_back({p.at("subject").get<std::string>(), p.at("conv").get<std::string>(),
                       p.at("epi").get<std::string>()});
  } catch (const json::exception& e) {
    fail(Errc::InvalidArgument, fmt::format("manifest: {}", e.what()));
  }
  for (const auto& p : pairs)
    for (const auto* id : {&p.conv_run, &p.epi_run})
      if (std::none_of(runs.begin(), runs.end(), [&](const RunSpec& r) { return r.id == *id; }))
        fail(Errc::UnpairedSubject, fmt::format("subject '{}' references missing run '{}'", p.subject, *id));
  for (auto& r : runs) resolve(r.flags);

  // subjects run concurrently; results are reduced in manifest order
  struct Done {
    SubjectResult result;
    report::Provenance provenance;
  };
  auto work = [](const RunSpec& r) {
    try {
      auto loaded = load_inputs(r.paths, r.flags);
      return Done{process_subject(loaded.inputs, r.flags.config), std::move(loaded.provenance)};
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("run '{}': {}", r.id, e.detail()), e.stage());
    }
  };
  std::vector<std::optional<Done>> done(runs.size());
  const unsigned width = std::max(1u, jobs);
  for (std::size_t start = 0; start < runs.size(); start += width) {
    std::vector<std::future<Done>> batch;
    for (std::size_t i = start; i < std::min(runs.size(), start + width); ++i)
      batch.push_back(std::async(std::launch::async, work, std::cref(runs[i])));
    for (std::size_t i = 0; i < batch.size(); ++i) done[start + i] = batch[i].get();
  }

  std::map<std::string, SubjectResult> results;
  report::Provenance cohort_prov;
  cohort_prov.config = report::config_json(shared.config);
  cohort_prov.config["paired_t"] = options.paired_t;
  cohort_prov.config["spearman_permutation"] = options.spearman_permutation;
  cohort_prov.inputs.emplace_back("manifest", report::sha256_hex(read_file_bytes(manifest_path)));
  for (std::size_t i = 0; i < runs.size(); ++i) {
    write_subject(fs::path(out) / "runs" / runs[i].id, done[i]->result, runs[i].flags, done[i]->provenance);
    for (const auto& [role, hash] : done[i]->provenance.inputs)
      cohort_prov.inputs.emplace_back(runs[i].id + "/" + role, hash);
    results.emplace(runs[i].id, std::move(done[i]->result));
  }
  const auto summaries = summarize_cohort(results, pairs, options);
  fs::create_directories(out);
  write_json(fs::path(out) / "cohort.json", report::cohort_json(summaries, cohort_prov));
  write_text_file(fs::path(out) / "cohort.csv", report::cohort_csv(summaries, cohort_prov));
  for (const auto& s : summaries) {
    std::string name(to_string(s.roi));
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
    write_text_file(fs::path(out) / fmt::format("scatter_{}.svg", name), report::scatter_svg(s, cohort_prov));
    std::cout << fmt::format("{}: n={} rs={:.4f} (p={:.3g}) wilcoxon W={} (p={:.3g})", to_string(s.roi),
                             s.pairs.size(), s.spearman.statistic, s.spearman.p_value, s.wilcoxon.statistic,
                             s.wilcoxon.p_value);
    if (s.mean_modulation) std::cout << fmt::format(" modulation {:+.2f}%", 100.0 * *s.mean_modulation);
    std::cout << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

void write_epi(const fs::path& dir, const phantom::PhantomSpec& spec) {
  const auto d = phantom::generate(spec);
  fs::create_directories(dir);
  write_series(d.series, dir / "series.csfd");
  write_mask(d.lumen_mask, dir / "lumen.pgm");
  write_mask(d.static_mask, dir / "static.pgm");
  write_physio(d.belt, dir / "belt.csv");
  write_physio(d.plethysmo, dir / "pleth.csv");
  write_json(dir / "spec.json", phantom::to_json(spec));
  ojson truth = phantom::to_json(d.truth);
  write_json(dir / "truth.json", truth);
}

void write_conv(const fs::path& dir, const phantom::PhantomSpec& spec) {
  const phantom::PhantomModel model(spec);
  const auto g = phantom::generate_gated(spec);
  fs::create_directories(dir);
  write_series(g.series, dir / "series.csfd");
  write_mask(model.lumen_mask(), dir / "lumen.pgm");
  write_mask(model.static_mask(), dir / "static.pgm");
  write_json(dir / "spec.json", phantom::to_json(spec));
  ojson truth;
  truth["n_cycles"] = g.n_cycles;
  truth["mean_rr_ms"] = g.mean_rr;
  truth["binned_flow_ml_s"] = g.binned_flow;
  truth["sv_true_ml"] = spec.cardiac.sv_true;
  write_json(dir / "truth.json", truth);
}

int cmd_phantom(const std::string& spec_path, const std::string& preset, const std::string& out, int cohort_n,
                std::uint64_t cohort_seed, double conv_venc) {
  phantom::PhantomSpec spec = preset == "spinal" ? phantom::spinal_spec() : phantom::aqueduct_spec();
  if (!spec_path.empty()) spec = phantom::spec_from_json(read_json(spec_path), spec);
  if (cohort_n <= 0) {
    if (spec.acquisition.series_kind == SeriesKind::GatedConv) write_conv(out, spec);
    else write_epi(out, spec);
    std::cout << fmt::format("wrote phantom to {}\n", out);
    return 0;
  }
  spec.acquisition.series_kind = SeriesKind::ContinuousEpi;
  const auto subjects = phantom::cohort_specs(cohort_n, {}, cohort_seed, spec, conv_venc);
  ojson manifest;
  manifest["runs"] = ojson::array();
  manifest["pairs"] = ojson::array();
  for (const auto& s : subjects) {
    write_epi(fs::path(out) / s.id / "epi", s.epi);
    write_conv(fs::path(out) / s.id / "conv", s.conv);
    manifest["runs"].push_back({{"id", s.id + "-conv"},
                                {"series", s.id + "/conv/series.csfd"},
                                {"mask", s.id + "/conv/lumen.pgm"},
                                {"static_mask", s.id + "/conv/static.pgm"}});
    manifest["runs"].push_back({{"id", s.id + "-epi"},
                                {"series", s.id + "/epi/series.csfd"},
                                {"mask", s.id + "/epi/lumen.pgm"},
                                {"static_mask", s.id + "/epi/static.pgm"},
                                {"belt", s.id + "/epi/belt.csv"}});
    manifest["pairs"].push_back({{"subject", s.id}, {"conv", s.id + "-conv"}, {"epi", s.id + "-epi"}});
  }
  write_json(fs::path(out) / "manifest.json", manifest);
  std::cout << fmt::format("wrote {}-subject phantom cohort to {}\n", cohort_n, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CSF flow dynamics from continuous phase-contrast series"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  InputPaths in;
  ProcessFlags flags;
  std::string config_path, out_dir;
  auto* process = app.add_subcommand("process", "Process one subject and write reports");
  add_input_flags(*process, in, false);
  add_process_flags(*process, flags);
  process->add_option("--config", config_path, "JSON config; its keys override flags")->check(CLI::ExistingFile);
  process->add_option("--out", out_dir, "Output directory")->required();

  std::string manifest_path;
  CohortOptions cohort_options;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  ProcessFlags cohort_flags;
  std::string cohort_config, cohort_out;
  auto* cohort = app.add_subcommand("cohort", "Compare paired Conv-PC and EPI-PC runs");
  cohort->add_option("--manifest", manifest_path, "Cohort manifest (JSON)")->required()->check(CLI::ExistingFile);
  add_process_flags(*cohort, cohort_flags);
  cohort->add_option("--config", cohort_config, "JSON config shared by every run")->check(CLI::ExistingFile);
  cohort->add_option("--out", cohort_out, "Output directory")->required();
  cohort->add_flag("--paired-t", cohort_options.paired_t, "Also report a paired Student t test");
  cohort->add_flag("--spearman-permutation", cohort_options.spearman_permutation,
                   "Exact permutation p for Spearman (n <= 10)");
  cohort->add_option("--jobs", jobs, "Subjects processed concurrently")->capture_default_str();

  std::string spec_path, preset = "aqueduct", phantom_out;
  int cohort_n = 0;
  std::uint64_t cohort_seed = 1;
  double conv_venc = 60.0;
  auto* ph = app.add_subcommand("phantom", "Write a synthetic dataset with ground truth");
  ph->add_option("--spec", spec_path, "Phantom spec (JSON); missing keys keep preset values")
      ->check(CLI::ExistingFile);
  ph->add_option("--preset", preset, "Base spec: aqueduct or spinal")
      ->check(CLI::IsMember({"aqueduct", "spinal"}))
      ->capture_default_str();
  ph->add_option("--out", phantom_out, "Output directory")->required();
  ph->add_option("--cohort", cohort_n, "Write an n-subject paired cohort and manifest.json instead");
  ph->add_option("--cohort-seed", cohort_seed, "Seed of the cohort jitter")->capture_default_str();
  ph->add_option("--conv-venc", conv_venc, "VENC of the gated cohort series (cm/s)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*process) return cmd_process(in, flags, config_path, out_dir);
    if (*cohort) return cmd_cohort(manifest_path, cohort_flags, cohort_config, cohort_out, cohort_options, jobs);
    if (*ph) return cmd_phantom(spec_path, preset, phantom_out, cohort_n, cohort_seed, conv_venc);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(error_class(e.code()));
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: IoFailure: " << e.what() << "\n";
    return exit_code(ErrorClass::Input);
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return exit_code(ErrorClass::Internal);
  }
  return 0;
}
