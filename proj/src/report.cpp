#include <algorithm>
#include <cstdio>
#include <sstream>

#include "morse/errors.hpp"
#include "morse/report.hpp"

namespace morse {

using nlohmann::json;

int exit_status_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kParse:
    case ErrorKind::kInvalidInput:
      return static_cast<int>(ExitStatus::kParse);
    case ErrorKind::kNonConvergence:
    case ErrorKind::kDriftExceeded:
    case ErrorKind::kSearchExhausted:
    case ErrorKind::kUnresolvedCrossing:
      return static_cast<int>(ExitStatus::kNonConvergence);
    default:
      return static_cast<int>(ExitStatus::kInvariant);
  }
}

namespace {

json opt(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

json focal_json(const std::vector<FocalInstant>& focal) {
  json arr = json::array();
  for (const auto& f : focal) {
    arr.push_back({{"t", f.t},
                   {"multiplicity", f.multiplicity},
                   {"signature", f.signature},
                   {"nondegenerate", f.nondegenerate},
                   {"maslov_contribution", f.maslov_contribution},
                   {"metric_signature", opt(f.metric_signature)}});
  }
  return arr;
}

json crossings_json(const std::vector<CrossingRecord>& cs) {
  json arr = json::array();
  for (const auto& c : cs)
    arr.push_back({{"t", c.t}, {"dim_intersection", c.dim_intersection}, {"contribution", c.contribution}});
  return arr;
}

bool has(const RunConfig& cfg, OutputKind k) {
  return std::find(cfg.outputs.begin(), cfg.outputs.end(), k) != cfg.outputs.end();
}

}  // namespace

Report run(const RunConfig& cfg) {
  Report rep;
  rep.name = cfg.name;
  try {
    json body = json::object();
    json inv = json::object();
    bool ok = true;
    const bool want_index = has(cfg, OutputKind::kIndexTheorem);
    const bool want_flow = want_index || has(cfg, OutputKind::kMaslov) || has(cfg, OutputKind::kFocal);

    if (want_flow) {
      int maslov = 0;
      std::vector<FocalInstant> focal;
      std::vector<CrossingRecord> crossings;
      double epsilon = 0.0;
      FundamentalSolution fs = integrate(cfg.system, cfg.index.integration);
      SystemAnalysis an = analyze_system(fs, cfg.index.focal);
      maslov = an.maslov.maslov;
      focal = an.focal;
      crossings = an.maslov.crossings;
      epsilon = an.maslov.epsilon;
      inv["drift"] = fs.max_drift();
      inv["isotropy"] = fs.max_isotropy();
      ok = ok && fs.max_drift() <= cfg.index.integration.drift_bound && fs.max_isotropy() <= 1e-9;

      bool metric_agrees = true, all_nondeg = true;
      for (const auto& f : focal) {
        if (f.metric_signature && *f.metric_signature != f.signature) metric_agrees = false;
        all_nondeg = all_nondeg && f.nondegenerate;
      }
      inv["metric_signature_agrees"] = metric_agrees;
      ok = ok && metric_agrees;
      std::optional<int> findex;
      if (all_nondeg) findex = focal_index(focal);
      if (findex) {
        inv["focal_index_equals_maslov"] = *findex == maslov;
        ok = ok && *findex == maslov;
      }

      if (has(cfg, OutputKind::kMaslov))
        body["maslov"] = {{"value", maslov}, {"epsilon", epsilon}, {"crossings", crossings_json(crossings)}};
      if (has(cfg, OutputKind::kFocal))
        body["focal"] = {{"instants", focal_json(focal)}, {"focal_index", opt(findex)}};

      if (want_index) {
        IndexReport ir = cfg.q ? variable_endpoint_terms(cfg.system, cfg.distribution, *cfg.q, cfg.sq, cfg.index)
                               : index_terms(cfg.system, cfg.distribution, cfg.index);
        const auto& d = ir.diagnostics;
        body["index_theorem"] = {{"maslov", ir.maslov},
                                 {"n_minus_K", ir.n_minus_K},
                                 {"n_plus_S", ir.n_plus_S},
                                 {"n_minus_gP", ir.n_minus_gP},
                                 {"Q_term", opt(ir.q_term)},
                                 {"n_minus_K_fixed", opt(ir.n_minus_K_fixed)},
                                 {"n_minus_JQ", opt(ir.n_minus_JQ)},
                                 {"identity_residual", ir.identity_residual},
                                 {"converged", d.converged},
                                 {"mesh", d.mesh},
                                 {"dim_H", d.dim_H},
                                 {"dim_K", d.dim_K},
                                 {"dim_S", d.dim_S},
                                 {"n_plus_S_reduced_flow", opt(d.n_plus_S_reduced_flow)}};
        inv["orthogonality"] = d.orthogonality;
        inv["identity_residual_zero"] = ir.identity_residual == 0;
        ok = ok && ir.identity_residual == 0 && d.orthogonality <= 1e-8 && d.dim_K + d.dim_S == d.dim_H;
        if (d.n_plus_S_reduced_flow) {
          inv["reduced_flow_agrees"] = *d.n_plus_S_reduced_flow == ir.n_plus_S;
          ok = ok && *d.n_plus_S_reduced_flow == ir.n_plus_S;
        }
      }
    }

    if (has(cfg, OutputKind::kProfile)) {
      json arr = json::array();
      for (const auto& p : index_profile(cfg.system, cfg.distribution, cfg.profile_times, cfg.profile_mesh))
        arr.push_back({{"t", p.t}, {"index", opt(p.index)}, {"degenerate", p.degenerate}, {"note", p.note}});
      body["profile"] = arr;
    }

    if (has(cfg, OutputKind::kJumpValidator)) {
      if (!cfg.jump) throw Error(ErrorKind::kParse, "jump-validator requested without a 'jump' table");
      ForwardJump fw = jump_forward(cfg.jump->curve, cfg.jump->t0);
      json j = {{"t0", cfg.jump->t0},
                {"forward",
                 {{"n_before", fw.n_before},
                  {"derivative_n_minus", fw.derivative.n_minus},
                  {"derivative_n_plus", fw.derivative.n_plus},
                  {"predicted_after", fw.predicted_after},
                  {"observed_after", fw.observed_after},
                  {"holds", fw.holds}}}};
      ok = ok && fw.holds;
      if (cfg.jump->t0 > cfg.jump->curve.t_start) {
        TwoSidedJump ts = jump_two_sided(cfg.jump->curve, cfg.jump->t0);
        j["two_sided"] = {{"n_left", ts.n_left},
                          {"n_right", ts.n_right},
                          {"derivative_signature", ts.derivative_signature},
                          {"holds", ts.holds}};
        ok = ok && ts.holds;
      }
      body["jump"] = j;
    }

    inv["ok"] = ok;
    body["invariants"] = inv;
    rep.body = body;
    rep.status = ok ? 0 : static_cast<int>(ExitStatus::kInvariant);
  } catch (const Error& e) {
    rep.status = exit_status_for(e);
    rep.error = std::string(to_string(e.kind())) + ": " + e.what();
    rep.body = json::object();
  }
  return rep;
}

namespace {

json to_json(const Report& r) {
  return {{"name", r.name},
          {"status", r.status},
          {"error", r.error.empty() ? json(nullptr) : json(r.error)},
          {"report", r.body}};
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string int_or_dash(const json& j) { return j.is_null() ? "-" : std::to_string(j.get<int>()); }

std::string text(const Report& r) {
  std::ostringstream os;
  os << "== " << r.name << "\n";
  os << "status: " << r.status << "\n";
  if (!r.error.empty()) os << "error: " << r.error << "\n";
  const json& b = r.body;
  if (b.contains("maslov")) os << "maslov index: " << b["maslov"]["value"].get<int>() << "\n";
  if (b.contains("focal")) {
    const json& f = b["focal"];
    os << "focal instants: " << f["instants"].size() << " (focal index " << int_or_dash(f["focal_index"]) << ")\n";
    os << "  t  mult  sgn\n";
    if (f["instants"].empty()) os << "  (none)\n";
    for (const auto& i : f["instants"])
      os << "  t=" << fmt(i["t"].get<double>()) << "  mult=" << i["multiplicity"].get<int>()
         << "  sgn=" << i["signature"].get<int>() << (i["nondegenerate"].get<bool>() ? "" : "  degenerate") << "\n";
  }
  if (b.contains("index_theorem")) {
    const json& t = b["index_theorem"];
    os << "index theorem: maslov " << t["maslov"].get<int>() << " = n-(I|K) " << t["n_minus_K"].get<int>()
       << " - n+(I|S) " << t["n_plus_S"].get<int>() << " - n-(g|P) " << t["n_minus_gP"].get<int>();
    if (!t["Q_term"].is_null()) os << " - Q " << t["Q_term"].get<int>();
    os << "  [residual " << t["identity_residual"].get<int>() << ", mesh " << t["mesh"].get<int>() << "]\n";
  }
  if (b.contains("profile")) {
    os << "index profile:\n";
    for (const auto& p : b["profile"])
      os << "  t=" << fmt(p["t"].get<double>()) << "  i=" << int_or_dash(p["index"]) << "\n";
  }
  if (b.contains("jump")) {
    const json& j = b["jump"];
    os << "jump at t0=" << fmt(j["t0"].get<double>()) << ": forward predicted "
       << j["forward"]["predicted_after"].get<int>() << " observed " << j["forward"]["observed_after"].get<int>();
    if (j.contains("two_sided"))
      os << ", two-sided " << j["two_sided"]["n_left"].get<int>() - j["two_sided"]["n_right"].get<int>()
         << " vs signature " << j["two_sided"]["derivative_signature"].get<int>();
    os << "\n";
  }
  if (b.contains("invariants")) {
    const json& inv = b["invariants"];
    os << "invariants: " << (inv["ok"].get<bool>() ? "ok" : "VIOLATED");
    if (inv.contains("drift")) os << "  drift " << fmt(inv["drift"].get<double>());
    if (inv.contains("isotropy")) os << "  isotropy " << fmt(inv["isotropy"].get<double>());
    if (inv.contains("orthogonality")) os << "  orthogonality " << fmt(inv["orthogonality"].get<double>());
    os << "\n";
  }
  return os.str();
}

}  // namespace

std::string emit_report(const Report& report, Format format) {
  if (format == Format::kText) return text(report);
  return to_json(report).dump(2) + "\n";
}

std::string emit_reports(const std::vector<Report>& reports, Format format) {
  if (format == Format::kText) {
    std::string out;
    for (const auto& r : reports) out += text(r);
    return out;
  }
  if (reports.size() == 1) return emit_report(reports[0], format);
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  return arr.dump(2) + "\n";
}

Report parse_report(const std::string& structured) {
  json j;
  try {
    j = json::parse(structured);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("report: ") + e.what());
  }
  if (!j.is_object() || !j.contains("name") || !j.contains("status") || !j.contains("report"))
    throw Error(ErrorKind::kParse, "report: missing keys");
  Report r;
  r.name = j["name"].get<std::string>();
  r.status = j["status"].get<int>();
  r.error = j["error"].is_null() ? "" : j["error"].get<std::string>();
  r.body = j["report"];
  return r;
}

}  // namespace morse
