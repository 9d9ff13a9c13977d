#pragma once

// End-to-end scenario runs, CCT bisection and the individual-vs-equivalent
// timing comparison.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsa/case_io.hpp"
#include "tsa/error.hpp"
#include "tsa/frames.hpp"
#include "tsa/grouping.hpp"
#include "tsa/simulator.hpp"
#include "tsa/stability.hpp"

namespace tsa {

inline constexpr int kExitStable = 0;
inline constexpr int kExitError = 2;
inline constexpr int kExitUnstable = 10;
inline constexpr int kExitUnstableDivergent = 11;

struct RunOptions {
  std::optional<double> dt;
  std::optional<double> t_end;
  /// Omega_CR ids; empty means automatic pattern selection.
  std::vector<std::string> pattern_cr;
  bool compute_cct = false;
  double cct_lo = 0.05;
  double cct_hi = 0.30;
  double cct_tol = 1e-4;
  /// Where CSV/JSON artifacts go; nothing is written when empty.
  std::filesystem::path out_dir;
};

struct CctResult {
  double cct = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int iterations = 0;
};

struct ScenarioResult {
  std::string case_name;
  GroupPattern pattern;
  std::optional<PatternCandidate> selection;  // set when the pattern was chosen automatically
  std::vector<PatternCandidate> candidates;
  SystemVerdict verdict;
  std::optional<CctResult> cct;
  std::vector<std::filesystem::path> artifacts;

  int exit_code() const {
    if (!verdict.original_unstable) return kExitStable;
    return verdict.divergent ? kExitUnstableDivergent : kExitUnstable;
  }
};

/// Original-system verdict by the machine-by-machine rule: unstable iff any
/// individual machine reaches a DLP in the COI-SYS reference.
inline bool original_unstable(const Trajectory& tr) {
  for (const auto& id : tr.ids) {
    const auto ev = swing_scan(individual_series(tr, id), tr.clear_time);
    if (std::any_of(ev.begin(), ev.end(), [](const SwingEvent& e) { return e.kind == EventKind::DLP; })) return true;
  }
  return false;
}

/// Bisection on the clearing time under the individual-machine verdict.
/// Requires a stable lower and an unstable upper bracket end.
inline CctResult cct(const SystemCase& c, double t_lo, double t_hi, double tol_s, double t_end, double dt) {
  if (!(tol_s >= 1e-4)) fail("invalid CCT tolerance", "tol must be >= 1e-4");
  if (!(t_lo > 0.0 && t_hi > t_lo && t_hi < t_end)) fail("invalid CCT bracket");
  auto unstable_at = [&](double tc) { return original_unstable(simulate(with_clear_time(c, tc), t_end, dt)); };
  if (unstable_at(t_lo) || !unstable_at(t_hi)) fail("invalid CCT bracket");
  CctResult r{0.0, t_lo, t_hi, 0};
  while (r.hi - r.lo > tol_s) {
    const double mid = 0.5 * (r.lo + r.hi);
    (unstable_at(mid) ? r.hi : r.lo) = mid;
    ++r.iterations;
  }
  r.cct = 0.5 * (r.lo + r.hi);
  return r;
}

/// Parses "a,b,c" into ids.
inline std::vector<std::string> split_ids(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',' || ch == ';') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline GroupPattern pattern_from_cr(const Trajectory& tr, const std::vector<std::string>& cr) {
  std::vector<std::string> ncr;
  for (const auto& id : tr.ids)
    if (std::find(cr.begin(), cr.end(), id) == cr.end()) ncr.push_back(id);
  for (const auto& id : cr) (void)tr.index_of(id);
  GroupPattern p(cr, ncr);
  validate(p, tr);
  return p;
}

// ---------------------------------------------------------------------------
// Timing comparison

struct TimingRow {
  std::string event;    // "earliest IDLP", "EDLP", "last IDLP in CR", "IGMDLP"
  std::string subject;
  double time_s = 0.0;
  std::string note;
};

struct TimingReport {
  std::vector<TimingRow> rows;
  std::optional<bool> earliest_idlp_not_after_edlp;  // stability of the original system known first
  std::optional<bool> edlp_not_after_last_cr_idlp;   // severity of the equivalent system known first
  std::optional<bool> coincident;                    // singleton CR: EDLP == IDLP of the member
  bool empty() const { return rows.empty(); }
};

inline TimingReport timing_report(const ScenarioResult& r) {
  TimingReport rep;
  const auto& v = r.verdict;
  if (!v.earliest_idlp && !v.edlp) return rep;
  if (v.earliest_idlp) rep.rows.push_back({"earliest IDLP", v.earliest_idlp->subject, v.earliest_idlp->event.time, ""});
  std::optional<DlpRecord> last_cr;
  for (const auto& d : v.idlps)
    if (r.pattern.group_of(d.subject) == Group::CR) last_cr = d;
  if (v.edlp) {
    std::string note;
    if (r.pattern.omega_cr.size() == 1) {
      const auto t = v.idlp_time(r.pattern.omega_cr.front());
      rep.coincident = t.has_value() && v.edlp_cr && *t == v.edlp_cr->event.time;
      if (*rep.coincident) note = "coincident";
    }
    rep.rows.push_back({"EDLP", v.edlp->subject, v.edlp->event.time, note});
  }
  if (last_cr) rep.rows.push_back({"last IDLP in CR", last_cr->subject, last_cr->event.time, ""});
  for (const auto& d : v.igmdlps) rep.rows.push_back({"IGMDLP", d.subject, d.event.time, std::string(to_string(d.reference))});
  if (v.earliest_idlp && v.edlp) rep.earliest_idlp_not_after_edlp = v.earliest_idlp->event.time <= v.edlp->event.time;
  if (v.edlp && last_cr) rep.edlp_not_after_last_cr_idlp = v.edlp->event.time <= last_cr->event.time;
  return rep;
}

inline void write_timing_csv(std::ostream& os, const TimingReport& rep) {
  auto b = [](const std::optional<bool>& x) { return x ? (*x ? "true" : "false") : "n/a"; };
  os << "event,subject,time_s,note\n";
  for (const auto& row : rep.rows) {
    os << row.event << ',' << row.subject << ',';
    write_g9(os, row.time_s);
    os << ',' << row.note << '\n';
  }
  os << "# earliest_idlp<=edlp=" << b(rep.earliest_idlp_not_after_edlp)
     << " edlp<=last_cr_idlp=" << b(rep.edlp_not_after_last_cr_idlp) << " coincident=" << b(rep.coincident) << '\n';
}

// ---------------------------------------------------------------------------
// Structured verdict summary

inline nlohmann::json verdict_json(const ScenarioResult& r) {
  using nlohmann::json;
  const auto& v = r.verdict;
  auto dlp = [](const std::optional<DlpRecord>& d) -> json {
    if (!d) return nullptr;
    return {{"subject", d->subject}, {"reference", std::string(to_string(d->reference))}, {"time_s", d->event.time},
            {"delta_rel_rad", d->event.delta_rel}, {"residual_ke", d->event.residual_ke}, {"swing", d->event.swing_index}};
  };
  auto opt = [](const auto& x) -> json {
    if (!x) return nullptr;
    return *x;
  };
  json j;
  j["case"] = r.case_name;
  j["pattern"] = {{"omega_cr", v.pattern.omega_cr}, {"omega_ncr", v.pattern.omega_ncr}};
  if (r.selection) {
    j["pattern"]["eta_cr"] = std::isfinite(r.selection->margin_eta) ? json(r.selection->margin_eta) : json("inf");
    j["pattern"]["eta_basis"] = std::string(to_string(r.selection->margin_basis));
    j["pattern"]["eta_definition"] = "artifact";
  }
  j["original"] = {{"unstable", v.original_unstable}, {"earliest_idlp", dlp(v.earliest_idlp)}};
  json idl = json::array();
  for (const auto& d : v.idlps) idl.push_back(dlp(d));
  j["original"]["idlps"] = idl;
  j["equivalent"] = {{"unstable", v.equivalent_unstable}, {"edlp", dlp(v.edlp)}, {"edlp_cr", dlp(v.edlp_cr)},
                     {"edlp_ncr", dlp(v.edlp_ncr)}};
  json ig = json::array();
  for (const auto& d : v.igmdlps) ig.push_back(dlp(d));
  j["inner_group"] = {{"igmdlps", ig}, {"equivalence", std::string(v.equivalence_quality())}};
  json ord = json::array();
  for (const auto& row : v.ordering) {
    ord.push_back({{"machine", row.machine},
                   {"group", row.group == Group::CR ? "CR" : "NCR"},
                   {"t_igmdlp", row.t_igmdlp},
                   {"t_edlp", opt(row.t_edlp)},
                   {"t_idlp", opt(row.t_idlp)},
                   {"igmdlp_after_edlp", opt(row.later_than_edlp)},
                   {"igmdlp_after_idlp", opt(row.later_than_idlp)},
                   {"f_machine_sys", row.f_machine_sys},
                   {"f_group_sys", row.f_group_sys},
                   {"force_product_positive", row.product_positive}});
  }
  j["ordering"] = ord;
  j["cct_s"] = r.cct ? json(r.cct->cct) : json("not computed");
  j["exit_code"] = r.exit_code();
  return j;
}

// ---------------------------------------------------------------------------
// Scenario runs

inline std::filesystem::path default_out_dir() {
  if (const char* env = std::getenv("TSA_OUT_DIR"); env && *env) return env;
  return "tsa_out";
}

namespace detail {

template <typename Writer>
std::filesystem::path write_file(const std::filesystem::path& path, Writer&& w) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) fail("cannot write artifact", path.string());
  w(os);
  if (!os) fail("cannot write artifact", path.string());
  return path;
}

}  // namespace detail

/// simulate -> candidates -> dominant pattern (or the given one) -> series ->
/// verdicts -> optional CCT -> exports.
inline ScenarioResult run_scenario(const SystemCase& c, const RunOptions& opt) {
  ScenarioResult r;
  r.case_name = c.meta.name;
  const double dt = opt.dt.value_or(c.run.dt);
  const double t_end = opt.t_end.value_or(c.run.t_end);
  const auto tr = simulate(c, t_end, dt);
  if (opt.pattern_cr.empty()) {
    r.candidates = rank_candidates(tr, candidate_patterns(tr, tr.times.back(), kDefaultCandidateCount));
    if (r.candidates.empty()) fail("no pattern candidates");
    r.selection = r.candidates.front();
    r.pattern = r.selection->pattern;
  } else {
    r.pattern = pattern_from_cr(tr, opt.pattern_cr);
  }
  const auto set = build_series(tr, r.pattern);
  r.verdict = verdicts(set);
  if (opt.compute_cct) r.cct = cct(c, opt.cct_lo, opt.cct_hi, opt.cct_tol, t_end, dt);

  if (!opt.out_dir.empty()) {
    const auto dir = opt.out_dir / c.meta.name;
    r.artifacts.push_back(detail::write_file(dir / "trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, tr); }));
    r.artifacts.push_back(detail::write_file(dir / "events.csv", [&](std::ostream& os) { write_events_csv(os, r.verdict.events); }));
    if (!r.candidates.empty())
      r.artifacts.push_back(detail::write_file(dir / "patterns.csv", [&](std::ostream& os) { write_candidates_csv(os, r.candidates); }));
    std::vector<std::pair<const RelativeMachineSeries*, std::string>> all;
    for (const auto& s : set.individual) all.emplace_back(&s, "SYS_" + s.subject + ".csv");
    all.emplace_back(&set.cr, "EQ_CR-SYS.csv");
    all.emplace_back(&set.ncr, "EQ_NCR-SYS.csv");
    for (const auto& s : set.inner) all.emplace_back(&s, std::string(to_string(s.reference)) + "_" + s.subject + ".csv");
    for (const auto& [s, name] : all) {
      r.artifacts.push_back(detail::write_file(dir / "series" / name, [&](std::ostream& os) { write_series_csv(os, *s); }));
      const auto ledger = energy_ledger(*s, tr.clear_time);
      r.artifacts.push_back(
          detail::write_file(dir / "energy" / name, [&](std::ostream& os) { write_energy_csv(os, *s, ledger); }));
    }
    r.artifacts.push_back(detail::write_file(dir / "timing.csv", [&](std::ostream& os) { write_timing_csv(os, timing_report(r)); }));
    const auto summary = dir / "verdict.json";
    r.artifacts.push_back(summary);
    detail::write_file(summary, [&](std::ostream& os) { os << verdict_json(r).dump(2) << '\n'; });
  }
  return r;
}

inline ScenarioResult run_scenario(const std::string& case_path, const RunOptions& opt) {
  if (!std::filesystem::exists(case_path)) fail("case not found: " + case_path);
  try {
    return run_scenario(load_case(case_path), opt);
  } catch (const Error& e) {
    throw Error(std::string(e.what()) + " [scenario " + case_path + "]");
  }
}

}  // namespace tsa
