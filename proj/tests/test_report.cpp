#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "tsa/report.hpp"

using Catch::Matchers::ContainsSubstring;
using tsa::GroupPattern;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("tsa_test_report_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const tsa::TimingRow* row(const tsa::TimingReport& rep, const std::string& event) {
  for (const auto& r : rep.rows)
    if (r.event == event) return &r;
  return nullptr;
}

}  // namespace

TEST_CASE("missing case file", "[report]") {
  const auto path = fixture::data("does_not_exist.json");
  CHECK_THROWS_WITH(tsa::run_scenario(path, {}), "case not found: " + path);
}

TEST_CASE("errors carry the scenario they came from", "[report]") {
  tsa::RunOptions opt;
  opt.pattern_cr = {"9"};
  const auto path = fixture::data("wscc9_bus7_stable.json");
  CHECK_THROWS_WITH(tsa::run_scenario(path, opt), ContainsSubstring("unknown machine id") && ContainsSubstring(path));
  opt.pattern_cr = {"1", "2", "3"};
  CHECK_THROWS_WITH(tsa::run_scenario(path, opt), ContainsSubstring("invalid pattern"));
}

TEST_CASE("critical clearing time by bisection", "[report]") {
  const auto c = tsa::load_case(fixture::data("wscc9_bus7_unstable.json"));
  const auto r = tsa::cct(c, 0.05, 0.30, 1e-4, c.run.t_end, c.run.dt);
  CHECK(r.iterations <= 12);
  CHECK(r.hi - r.lo <= 1e-4);
  CHECK(r.cct > 0.05);
  CHECK(r.cct < 0.30);
  CHECK(r.lo <= r.cct);
  CHECK(r.cct <= r.hi);
  auto unstable = [&](double tc) { return tsa::original_unstable(tsa::simulate(tsa::with_clear_time(c, tc), c.run.t_end, c.run.dt)); };
  CHECK_FALSE(unstable(r.cct - 1e-4));
  CHECK(unstable(r.cct + 1e-4));
}

TEST_CASE("critical clearing time argument checks", "[report]") {
  const auto c = tsa::load_case(fixture::data("wscc9_bus7_unstable.json"));
  CHECK_THROWS_WITH(tsa::cct(c, 0.05, 0.30, 5e-5, 2.0, 0.001), ContainsSubstring("invalid CCT tolerance"));
  CHECK_THROWS_WITH(tsa::cct(c, 0.20, 0.30, 1e-4, 2.0, 0.001), ContainsSubstring("invalid CCT bracket"));
  CHECK_THROWS_WITH(tsa::cct(c, 0.05, 0.10, 1e-4, 2.0, 0.001), ContainsSubstring("invalid CCT bracket"));
  CHECK_THROWS_WITH(tsa::cct(c, 0.30, 0.05, 1e-4, 2.0, 0.001), ContainsSubstring("invalid CCT bracket"));
}

TEST_CASE("stable scenario", "[report]") {
  tsa::RunOptions opt;
  opt.out_dir = scratch("stable");
  const auto r = tsa::run_scenario(fixture::data("wscc9_bus7_stable.json"), opt);
  CHECK(r.exit_code() == tsa::kExitStable);
  CHECK_FALSE(r.verdict.original_unstable);
  CHECK(tsa::timing_report(r).empty());
  CHECK_FALSE(r.cct.has_value());
  for (const auto& se : r.verdict.events)
    for (const auto& e : se.events) CHECK(e.kind == tsa::EventKind::DSP);
  REQUIRE_FALSE(r.artifacts.empty());
  for (const auto& p : r.artifacts) CHECK(fs::exists(p));
  const auto j = nlohmann::json::parse(slurp(opt.out_dir / r.case_name / "verdict.json"));
  CHECK(j["original"]["unstable"] == false);
  CHECK(j["cct_s"] == "not computed");
  CHECK(j["inner_group"]["equivalence"] == "close");
  CHECK(j["pattern"]["eta_definition"] == "artifact");
  fs::remove_all(opt.out_dir);
}

TEST_CASE("two-member critical group timing", "[report]") {
  tsa::RunOptions opt;
  opt.pattern_cr = {"2", "3"};
  const auto r = tsa::run_scenario(fixture::data("wscc9_bus7_unstable.json"), opt);
  CHECK(r.exit_code() == tsa::kExitUnstableDivergent);
  CHECK(r.pattern == GroupPattern({"2", "3"}, {"1"}));
  CHECK_FALSE(r.selection.has_value());
  const auto rep = tsa::timing_report(r);
  REQUIRE(rep.earliest_idlp_not_after_edlp.has_value());
  REQUIRE(rep.edlp_not_after_last_cr_idlp.has_value());
  CHECK(*rep.earliest_idlp_not_after_edlp);
  CHECK(*rep.edlp_not_after_last_cr_idlp);
  CHECK_FALSE(rep.coincident.has_value());

  const auto* idlp = row(rep, "earliest IDLP");
  const auto* edlp = row(rep, "EDLP");
  const auto* last = row(rep, "last IDLP in CR");
  REQUIRE(idlp);
  REQUIRE(edlp);
  REQUIRE(last);
  CHECK(idlp->time_s <= edlp->time_s);
  CHECK(edlp->time_s <= last->time_s);
  for (const auto& x : rep.rows)
    if (x.event == "IGMDLP") CHECK(x.time_s >= edlp->time_s);

  std::ostringstream os;
  tsa::write_timing_csv(os, rep);
  CHECK(os.str().rfind("event,subject,time_s,note\n", 0) == 0);
  CHECK(os.str().find("# earliest_idlp<=edlp=true edlp<=last_cr_idlp=true coincident=n/a") != std::string::npos);
}

TEST_CASE("singleton critical group timing", "[report]") {
  tsa::RunOptions opt;
  opt.pattern_cr = {"2"};
  const auto r = tsa::run_scenario(fixture::data("wscc9_bus9_unstable.json"), opt);
  const auto rep = tsa::timing_report(r);
  REQUIRE(rep.coincident.has_value());
  CHECK(*rep.coincident);
  const auto* edlp = row(rep, "EDLP");
  REQUIRE(edlp);
  CHECK(edlp->note == "coincident");
  const auto t = r.verdict.idlp_time("2");
  REQUIRE(t.has_value());
  CHECK(edlp->time_s == *t);
}

TEST_CASE("automatic selection and the CCT option", "[report]") {
  tsa::RunOptions opt;
  opt.compute_cct = true;
  const auto r = tsa::run_scenario(fixture::data("wscc9_bus7_unstable.json"), opt);
  REQUIRE(r.selection.has_value());
  CHECK(r.selection->rank == 1);
  CHECK(r.pattern == r.selection->pattern);
  CHECK(r.candidates.size() >= 1);
  REQUIRE(r.cct.has_value());
  CHECK(r.cct->iterations <= 12);
  const auto j = tsa::verdict_json(r);
  CHECK(j["cct_s"].is_number());
  CHECK(j["exit_code"] == r.exit_code());
  CHECK(j["ordering"].size() == r.verdict.ordering.size());
}

TEST_CASE("exports are byte-identical across runs", "[report]") {
  const auto a = scratch("det_a"), b = scratch("det_b");
  for (const char* name : {"wscc9_bus7_unstable.json", "ne39_bus24_unstable.json"}) {
    tsa::RunOptions oa, ob;
    oa.out_dir = a;
    ob.out_dir = b;
    const auto ra = tsa::run_scenario(fixture::data(name), oa);
    const auto rb = tsa::run_scenario(fixture::data(name), ob);
    REQUIRE(ra.artifacts.size() == rb.artifacts.size());
    for (std::size_t k = 0; k < ra.artifacts.size(); ++k) {
      INFO(ra.artifacts[k]);
      CHECK(fs::relative(ra.artifacts[k], a) == fs::relative(rb.artifacts[k], b));
      CHECK(slurp(ra.artifacts[k]) == slurp(rb.artifacts[k]));
    }
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("concurrent runs match sequential ones", "[report]") {
  const std::vector<std::string> names{"wscc9_bus7_stable.json", "wscc9_bus7_unstable.json", "wscc9_bus9_unstable.json",
                                       "ne39_bus16_unstable.json"};
  std::vector<std::future<tsa::ScenarioResult>> jobs;
  for (const auto& n : names) jobs.push_back(std::async(std::launch::async, [n] { return tsa::run_scenario(fixture::data(n), {}); }));
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto par = jobs[k].get();
    const auto seq = tsa::run_scenario(fixture::data(names[k]), {});
    CHECK(par.pattern == seq.pattern);
    CHECK(tsa::verdict_json(par) == tsa::verdict_json(seq));
  }
}

TEST_CASE("pattern id lists", "[report]") {
  CHECK(tsa::split_ids("a,b") == std::vector<std::string>{"a", "b"});
  CHECK(tsa::split_ids(" G31 ; G32,") == std::vector<std::string>{"G31", "G32"});
  CHECK(tsa::split_ids("").empty());
}
