#include "csfdyn/report.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "csfdyn/error.hpp"
#include "csfdyn/version.hpp"

namespace csfdyn::report {

using ojson = nlohmann::ordered_json;

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    fail(Errc::InvariantViolation, "SHA-256 digest failed");
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

std::string num(double v) {
  if (!std::isfinite(v)) return "nan";
  if (v == 0.0) return "0";
  return fmt::format("{:.9g}", v);
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header_lines(const Provenance& p) {
  std::string s = fmt::format("# {} {}\n", kToolName, kVersion);
  s += fmt::format("# config {}\n", p.config.dump());
  for (const auto& [role, hash] : p.inputs) s += fmt::format("# input {} sha256:{}\n", role, hash);
  return s;
}

ojson sv_json(const SvReport& sv) {
  return {{"sv", sv.sv},
          {"v_plus", sv.v_plus},
          {"v_minus", sv.v_minus},
          {"unit", std::string(to_string(sv.unit))},
          {"convention", std::string(to_string(sv.convention))},
          {"net_flow_ml_min", sv.net_flow},
          {"flush_duration_fraction", sv.flush_duration_fraction},
          {"direction_reversals", sv.direction_reversals},
          {"mean_rr_ms", sv.mean_rr}};
}

ojson curve_json(const std::optional<CurveReport>& c) {
  if (!c) return nullptr;
  return {{"n_cycles", c->curve.n_cycles},
          {"mean_rr_ms", c->curve.mean_rr},
          {"reversal_check", c->reversal},
          {"stroke_volume", sv_json(c->sv)}};
}

ojson stat_json(const stats::StatResult& r) {
  return {{"method", std::string(stats::to_string(r.method))},
          {"statistic", r.statistic},
          {"p_value", r.p_value},
          {"n", r.n},
          {"n_dropped", r.n_dropped}};
}

std::string svg_metadata(const Provenance& p) {
  ojson m = provenance_json(p);
  return fmt::format("<metadata>{}</metadata>\n", xml_escape(m.dump()));
}

struct Frame {
  double x0, x1, y0, y1;  // data range
  double left = 70, right = 620, top = 40, bottom = 360;
  double px(double x) const { return left + (x - x0) / (x1 - x0) * (right - left); }
  double py(double y) const { return bottom - (y - y0) / (y1 - y0) * (bottom - top); }
};

std::string polyline(const Frame& f, std::span<const double> xs, std::span<const double> ys, const char* colour,
                     const char* extra = "") {
  std::string pts;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) pts += ' ';
    pts += fmt::format("{:.2f},{:.2f}", f.px(xs[i]), f.py(ys[i]));
  }
  return fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\"{} points=\"{}\"/>\n", colour, extra,
                     pts);
}

std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  std::string s;
  s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" stroke=\"#000\"/>\n",
                   f.left, f.top, f.right - f.left, f.bottom - f.top);
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n", f.px(xv),
                     f.bottom + 16, fmt::format("{:.3g}", xv));
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n", f.left - 6,
                     f.py(yv) + 4, fmt::format("{:.3g}", yv));
  }
  s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
                   0.5 * (f.left + f.right), f.bottom + 36, xml_escape(xlabel));
  s += fmt::format(
      "<text x=\"16\" y=\"{:.2f}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2f})\">{}</text>\n",
      0.5 * (f.top + f.bottom), 0.5 * (f.top + f.bottom), xml_escape(ylabel));
  return s;
}

std::pair<double, double> padded(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.08 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

ojson provenance_json(const Provenance& p) {
  ojson j;
  j["tool"] = kToolName;
  j["version"] = kVersion;
  j["config"] = p.config;
  ojson inputs = ojson::object();
  for (const auto& [role, hash] : p.inputs) inputs[role] = "sha256:" + hash;
  j["inputs"] = std::move(inputs);
  return j;
}

ojson config_json(const ProcessConfig& c) {
  return {{"min_rr_ms", c.gating.min_rr},
          {"max_rr_ms", c.gating.max_rr},
          {"prominence_fraction", c.gating.prominence_fraction},
          {"max_rr_cv", c.gating.max_rr_cv},
          {"min_cycles", c.gating.min_cycles},
          {"resp_smoothing_ms", c.resp.smoothing_window},
          {"resp_hysteresis", c.resp.hysteresis},
          {"resp_min_run_ms", c.resp.min_run},
          {"cardiac_source", std::string(to_string(c.cardiac_source))},
          {"interpolation", std::string(to_string(c.interpolation))},
          {"sv_convention", std::string(to_string(c.sv_convention))},
          {"flip_sign", c.flip_sign},
          {"anchor_frame", c.anchor_frame},
          {"refine_roi", c.refine},
          {"refine_threshold", c.refine_threshold},
          {"require_resp", c.require_resp}};
}

ojson subject_json(const SubjectResult& r, const ProcessConfig& c, const Provenance& p) {
  ojson j = provenance_json(p);
  j["roi_label"] = std::string(to_string(r.roi_label));
  j["series_kind"] = std::string(to_string(r.series_kind));
  j["interpolation"] = std::string(to_string(c.interpolation));
  j["unit"] = std::string(to_string(r.unit));
  j["n_roi_pixels"] = r.n_roi_pixels;
  j["background_offset_cm_s"] = r.background_offset;
  j["static_temporal_sd_cm_s"] = r.static_temporal_sd;
  ojson cycles;
  cycles["n_detected"] = r.cycles.size();
  cycles["n_inspiration"] = r.insp ? r.insp->curve.n_cycles : 0;
  cycles["n_expiration"] = r.exp ? r.exp->curve.n_cycles : 0;
  cycles["n_mixed"] = r.n_mixed;
  cycles["n_unlabeled"] = r.n_unlabeled;
  if (r.boundaries) {
    cycles["method"] = std::string(to_string(r.boundaries->method));
    cycles["n_onsets"] = r.boundaries->onsets.size();
    cycles["mean_rr_ms"] = r.boundaries->mean_rr;
    cycles["rr_cv"] = r.boundaries->rr_cv;
  }
  j["cycles"] = std::move(cycles);
  j["global"] = curve_json(r.global);
  j["inspiration"] = curve_json(r.insp);
  j["expiration"] = curve_json(r.exp);
  j["sv_modulation"] = r.modulation ? ojson(*r.modulation) : ojson(nullptr);
  j["warnings"] = r.warnings;
  ojson list = ojson::array();
  for (const auto& cy : r.cycles)
    list.push_back({{"id", cy.id},
                    {"start_ms", cy.start},
                    {"end_ms", cy.end},
                    {"n_samples", cy.n_samples},
                    {"inspiration_fraction", cy.inspiration_fraction},
                    {"resp_label", std::string(to_string(cy.resp_label))}});
  j["cycle_list"] = std::move(list);
  return j;
}

std::string subject_csv(const SubjectResult& r, const Provenance& p) {
  std::string s = header_lines(p);
  s += "curve,n_cycles,mean_rr_ms,sv,v_plus,v_minus,unit,convention,net_flow_ml_min,flush_duration_fraction,"
       "direction_reversals,reversal_check,sv_modulation\n";
  auto row = [&](const char* name, const std::optional<CurveReport>& c) {
    if (!c) {
      s += fmt::format("{},0,,,,,{},,,,,,\n", name, to_string(r.unit));
      return;
    }
    const auto& v = c->sv;
    s += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", name, c->curve.n_cycles, num(v.mean_rr), num(v.sv),
                     num(v.v_plus), num(v.v_minus), to_string(v.unit), to_string(v.convention), num(v.net_flow),
                     num(v.flush_duration_fraction), v.direction_reversals, c->reversal ? "true" : "false",
                     std::string(name) == "inspiration" && r.modulation ? num(*r.modulation) : "");
  };
  row("global", r.global);
  row("inspiration", r.insp);
  row("expiration", r.exp);
  return s;
}

std::string curves_csv(const SubjectResult& r, const ProcessConfig& c, const Provenance& p) {
  std::string s = header_lines(p);
  s += fmt::format("# interpolation {}\n", to_string(c.interpolation));
  s += "phase_index,phase,global,global_sd,insp,insp_sd,exp,exp_sd\n";
  auto cell = [](const std::optional<CurveReport>& cr, int k, bool sd) {
    if (!cr) return std::string();
    return num(sd ? cr->curve.sd[k] : cr->curve.mean[k]);
  };
  for (int k = 0; k < kPointsPerCycle; ++k)
    s += fmt::format("{},{},{},{},{},{},{},{}\n", k, num(static_cast<double>(k) / kPointsPerCycle),
                     num(r.global.curve.mean[k]), num(r.global.curve.sd[k]), cell(r.insp, k, false),
                     cell(r.insp, k, true), cell(r.exp, k, false), cell(r.exp, k, true));
  return s;
}

std::string curves_svg(const SubjectResult& r, const Provenance& p) {
  std::vector<double> xs(kPointsPerCycle + 1);
  for (int k = 0; k <= kPointsPerCycle; ++k) xs[k] = static_cast<double>(k) / kPointsPerCycle;
  auto closed = [](const Curve32& c) {
    std::vector<double> v(c.begin(), c.end());
    v.push_back(c[0]);
    return v;
  };
  double lo = 0.0, hi = 0.0;
  auto extend = [&](const Curve32& c) {
    for (double v : c) lo = std::min(lo, v), hi = std::max(hi, v);
  };
  extend(r.global.curve.mean);
  if (r.insp) extend(r.insp->curve.mean);
  if (r.exp) extend(r.exp->curve.mean);
  const auto [y0, y1] = padded(lo, hi);
  const Frame f{0.0, 1.0, y0, y1};

  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\">\n";
  s += svg_metadata(p);
  s += "<rect width=\"640\" height=\"420\" fill=\"#fff\"/>\n";
  s += fmt::format("<text x=\"345\" y=\"24\" font-size=\"14\" text-anchor=\"middle\">{} flow over the cardiac cycle</text>\n",
                   to_string(r.roi_label));
  s += axes(f, "cardiac phase", "flow (mL/s)");
  s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#000\" stroke-width=\"1\"/>\n",
                   f.left, f.py(0.0), f.right, f.py(0.0));
  s += polyline(f, xs, closed(r.global.curve.mean), "#777777", " stroke-dasharray=\"6 4\"");
  if (r.exp) s += polyline(f, xs, closed(r.exp->curve.mean), "#0000ff");
  if (r.insp) s += polyline(f, xs, closed(r.insp->curve.mean), "#ff0000");
  int row = 0;
  auto legend = [&](const char* colour, const std::string& text) {
    const double y = f.top + 16 + 16 * row++;
    s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                     f.right - 150, y - 4, f.right - 130, y - 4, colour);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\">{}</text>\n", f.right - 124, y,
                     xml_escape(text));
  };
  legend("#777777", fmt::format("global (n={})", r.global.curve.n_cycles));
  if (r.insp) legend("#ff0000", fmt::format("inspiration (n={})", r.insp->curve.n_cycles));
  if (r.exp) legend("#0000ff", fmt::format("expiration (n={})", r.exp->curve.n_cycles));
  s += "</svg>\n";
  return s;
}

ojson cohort_json(const std::vector<RoiSummary>& summaries, const Provenance& p) {
  ojson j = provenance_json(p);
  ojson rois = ojson::array();
  for (const auto& s : summaries) {
    ojson r;
    r["roi_label"] = std::string(to_string(s.roi));
    r["unit"] = std::string(to_string(s.unit));
    r["n_pairs"] = s.pairs.size();
    ojson pairs = ojson::array();
    for (const auto& pr : s.pairs) pairs.push_back({{"subject", pr.subject_id}, {"conv_sv", pr.a}, {"epi_sv", pr.b}});
    r["pairs"] = std::move(pairs);
    r["spearman"] = stat_json(s.spearman);
    r["wilcoxon"] = stat_json(s.wilcoxon);
    r["paired_t"] = s.paired_t ? stat_json(*s.paired_t) : ojson(nullptr);
    r["mean_sv_modulation"] = s.mean_modulation ? ojson(*s.mean_modulation) : ojson(nullptr);
    r["mean_sv_modulation_percent"] = s.mean_modulation ? ojson(100.0 * *s.mean_modulation) : ojson(nullptr);
    r["n_modulation"] = s.n_modulation;
    rois.push_back(std::move(r));
  }
  j["rois"] = std::move(rois);
  return j;
}

std::string cohort_csv(const std::vector<RoiSummary>& summaries, const Provenance& p) {
  std::string s = header_lines(p);
  s += "roi,unit,n_pairs,spearman_rs,spearman_p,spearman_method,wilcoxon_w,wilcoxon_p,wilcoxon_method,"
       "wilcoxon_n_dropped,paired_t,paired_t_p,mean_sv_modulation_percent\n";
  for (const auto& r : summaries)
    s += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", to_string(r.roi), to_string(r.unit), r.pairs.size(),
                     num(r.spearman.statistic), num(r.spearman.p_value), stats::to_string(r.spearman.method),
                     num(r.wilcoxon.statistic), num(r.wilcoxon.p_value), stats::to_string(r.wilcoxon.method),
                     r.wilcoxon.n_dropped, r.paired_t ? num(r.paired_t->statistic) : "",
                     r.paired_t ? num(r.paired_t->p_value) : "",
                     r.mean_modulation ? num(100.0 * *r.mean_modulation) : "");
  return s;
}

std::string scatter_svg(const RoiSummary& r, const Provenance& p) {
  double lo = r.pairs.front().a, hi = lo;
  for (const auto& pr : r.pairs) {
    lo = std::min({lo, pr.a, pr.b});
    hi = std::max({hi, pr.a, pr.b});
  }
  lo = std::min(lo, 0.0);
  const auto [v0, v1] = padded(lo, hi);
  const Frame f{v0, v1, v0, v1, 70, 430, 40, 400};

  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"460\" height=\"460\" viewBox=\"0 0 460 460\">\n";
  s += svg_metadata(p);
  s += "<rect width=\"460\" height=\"460\" fill=\"#fff\"/>\n";
  s += fmt::format("<text x=\"250\" y=\"24\" font-size=\"14\" text-anchor=\"middle\">{} stroke volume, rs={:.3f}</text>\n",
                   to_string(r.roi), r.spearman.statistic);
  const std::string unit(to_string(r.unit));
  s += axes(f, "Conv-PC SV (" + unit + ")", "EPI-PC SV (" + unit + ")");
  s += fmt::format(
      "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#777777\" stroke-dasharray=\"6 4\"/>\n",
      f.px(v0), f.py(v0), f.px(v1), f.py(v1));
  for (const auto& pr : r.pairs)
    s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"4\" fill=\"#000\"><title>{}</title></circle>\n",
                     f.px(pr.a), f.py(pr.b), xml_escape(pr.subject_id));
  s += "</svg>\n";
  return s;
}

}  // namespace csfdyn::report
