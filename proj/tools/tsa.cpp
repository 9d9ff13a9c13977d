// tsa: transient stability analysis front end.
//
//   tsa simulate <case> [--dt 0.001 --t-end 5.0]
//   tsa analyze  <case>... [--pattern a,b|auto] [--jobs N]
//   tsa patterns <case>
//   tsa cct      <case> --lo 0.05 --hi 0.30 --tol 1e-4
//   tsa report   <case>... [--pattern a,b|auto] [--cct] [--jobs N]
//
// Artifacts go to $TSA_OUT_DIR (default ./tsa_out)/<case name>/.
// Exit codes: 0 stable, 10 unstable, 11 unstable with inner-group divergence, 2 error.

#include <algorithm>
#include <cstdio>
#include <future>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tsa/case_io.hpp"
#include "tsa/grouping.hpp"
#include "tsa/report.hpp"
#include "tsa/simulator.hpp"

namespace {

struct Common {
  std::vector<std::string> cases;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::string pattern = "auto";
  int jobs = 1;
};

void add_run_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--dt", c.dt, "integration step in seconds (default from case, else 0.001)");
  cmd->add_option("--t-end", c.t_end, "simulation horizon in seconds (default from case, else 5.0)");
}

tsa::RunOptions run_options(const Common& c) {
  tsa::RunOptions o;
  o.dt = c.dt;
  o.t_end = c.t_end;
  if (c.pattern != "auto") o.pattern_cr = tsa::split_ids(c.pattern);
  o.out_dir = tsa::default_out_dir();
  return o;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Runs `fn` over every case with at most `jobs` in flight; output for each
/// case is buffered and printed in input order. Returns the worst exit code.
template <typename Fn>
int for_each_case(const Common& c, Fn fn) {
  const std::size_t jobs = static_cast<std::size_t>(std::max(1, c.jobs));
  std::vector<std::string> outputs(c.cases.size()), errors(c.cases.size());
  std::vector<int> codes(c.cases.size(), tsa::kExitError);
  for (std::size_t start = 0; start < c.cases.size(); start += jobs) {
    std::vector<std::future<void>> batch;
    for (std::size_t k = start; k < std::min(c.cases.size(), start + jobs); ++k) {
      batch.push_back(std::async(std::launch::async, [&, k] {
        std::ostringstream os;
        try {
          codes[k] = fn(c.cases[k], os);
        } catch (const std::exception& e) {
          errors[k] = std::string("error: ") + e.what() + '\n';
          codes[k] = tsa::kExitError;
        }
        outputs[k] = os.str();
      }));
    }
    for (auto& f : batch) f.get();
  }
  int worst = tsa::kExitStable;
  for (std::size_t k = 0; k < c.cases.size(); ++k) {
    std::cout << outputs[k];
    std::cerr << errors[k];
    if (codes[k] == tsa::kExitError) worst = tsa::kExitError;
    else if (worst != tsa::kExitError) worst = std::max(worst, codes[k]);
  }
  return worst;
}

void print_summary(std::ostream& os, const tsa::ScenarioResult& r) {
  const auto& v = r.verdict;
  auto join = [](const std::vector<std::string>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? "," : "") + ids[i];
    return s;
  };
  os << "case: " << r.case_name << '\n';
  os << "pattern: CR={" << join(r.pattern.omega_cr) << "} NCR={" << join(r.pattern.omega_ncr) << "}";
  if (r.selection) os << " eta_cr=" << fmt(r.selection->margin_eta) << " (definition: artifact)";
  os << '\n';
  os << "original: " << (v.original_unstable ? "unstable" : "stable");
  if (v.earliest_idlp) os << " (IDLP " << v.earliest_idlp->subject << " at " << fmt(v.earliest_idlp->event.time) << " s)";
  os << '\n';
  os << "equivalent: " << (v.equivalent_unstable ? "unstable" : "stable");
  if (v.edlp) os << " (EDLP " << v.edlp->subject << " at " << fmt(v.edlp->event.time) << " s)";
  os << '\n';
  os << "inner-group: " << v.equivalence_quality() << '\n';
  for (const auto& row : v.ordering) {
    auto b = [](const std::optional<bool>& x) { return x ? (*x ? "true" : "false") : "n/a"; };
    os << "  IGMDLP " << row.machine << " at " << fmt(row.t_igmdlp) << " s: after_edlp=" << b(row.later_than_edlp)
       << " after_idlp=" << b(row.later_than_idlp) << " force_product_positive=" << (row.product_positive ? "true" : "false")
       << '\n';
  }
  if (r.cct) os << "cct: " << fmt(r.cct->cct) << " s (" << r.cct->iterations << " bisections)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-machine transient stability analysis (classical model)"};
  app.require_subcommand(1);
  Common common;
  double lo = 0.05, hi = 0.30, tol = 1e-4;
  int k_max = tsa::kDefaultCandidateCount;
  bool with_cct = false;

  auto* sim = app.add_subcommand("simulate", "integrate a case and export the trajectory CSV");
  sim->add_option("case", common.cases, "case file")->required()->expected(1);
  add_run_flags(sim, common);

  auto* analyze = app.add_subcommand("analyze", "detect IDLP/EDLP/IGMDLP events and report verdicts");
  analyze->add_option("cases", common.cases, "case files")->required();
  analyze->add_option("--pattern", common.pattern, "Omega_CR ids as a,b or 'auto'");
  analyze->add_option("--jobs", common.jobs, "cases to run concurrently")->check(CLI::PositiveNumber);
  add_run_flags(analyze, common);

  auto* patterns = app.add_subcommand("patterns", "rank candidate group separation patterns");
  patterns->add_option("case", common.cases, "case file")->required()->expected(1);
  patterns->add_option("--k-max", k_max, "number of gap cuts")->check(CLI::PositiveNumber);
  add_run_flags(patterns, common);

  auto* cct = app.add_subcommand("cct", "critical clearing time by bisection");
  cct->add_option("case", common.cases, "case file")->required()->expected(1);
  cct->add_option("--lo", lo, "stable clearing time bound (s)");
  cct->add_option("--hi", hi, "unstable clearing time bound (s)");
  cct->add_option("--tol", tol, "bracket width to stop at (s)");
  add_run_flags(cct, common);

  auto* report = app.add_subcommand("report", "full scenario run with all exports and the timing comparison");
  report->add_option("cases", common.cases, "case files")->required();
  report->add_option("--pattern", common.pattern, "Omega_CR ids as a,b or 'auto'");
  report->add_option("--jobs", common.jobs, "cases to run concurrently")->check(CLI::PositiveNumber);
  report->add_flag("--cct", with_cct, "also compute the CCT over --lo/--hi");
  report->add_option("--lo", lo, "stable clearing time bound (s)");
  report->add_option("--hi", hi, "unstable clearing time bound (s)");
  report->add_option("--tol", tol, "bracket width to stop at (s)");
  add_run_flags(report, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : tsa::kExitError;
  }

  try {
    if (*sim) {
      const auto c = tsa::load_case(common.cases.front());
      const auto tr = tsa::simulate(c, common.t_end.value_or(c.run.t_end), common.dt.value_or(c.run.dt));
      const auto path = tsa::default_out_dir() / c.meta.name / "trajectory.csv";
      tsa::detail::write_file(path, [&](std::ostream& os) { tsa::write_trajectory_csv(os, tr); });
      std::cout << "samples: " << tr.samples() << "\ntrajectory: " << path.string() << '\n';
      return tsa::kExitStable;
    }
    if (*patterns) {
      const auto c = tsa::load_case(common.cases.front());
      const auto tr = tsa::simulate(c, common.t_end.value_or(c.run.t_end), common.dt.value_or(c.run.dt));
      const auto ranked = tsa::rank_candidates(tr, tsa::candidate_patterns(tr, tr.times.back(), k_max));
      tsa::write_candidates_csv(std::cout, ranked);
      return tsa::kExitStable;
    }
    if (*cct) {
      const auto c = tsa::load_case(common.cases.front());
      const auto r = tsa::cct(c, lo, hi, tol, common.t_end.value_or(c.run.t_end), common.dt.value_or(c.run.dt));
      std::cout << "cct_s," << fmt(r.cct) << "\nbracket_lo," << fmt(r.lo) << "\nbracket_hi," << fmt(r.hi)
                << "\niterations," << r.iterations << '\n';
      return tsa::kExitStable;
    }
    if (*analyze) {
      return for_each_case(common, [&](const std::string& path, std::ostream& os) {
        const auto r = tsa::run_scenario(path, run_options(common));
        print_summary(os, r);
        tsa::write_events_csv(os, r.verdict.events);
        return r.exit_code();
      });
    }
    if (*report) {
      return for_each_case(common, [&](const std::string& path, std::ostream& os) {
        auto opt = run_options(common);
        opt.compute_cct = with_cct;
        opt.cct_lo = lo;
        opt.cct_hi = hi;
        opt.cct_tol = tol;
        const auto r = tsa::run_scenario(path, opt);
        print_summary(os, r);
        tsa::write_timing_csv(os, tsa::timing_report(r));
        os << "artifacts: " << r.artifacts.size() << " files under " << (opt.out_dir / r.case_name).string() << '\n';
        return r.exit_code();
      });
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return tsa::kExitError;
  }
  return tsa::kExitError;
}
