#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "tsa/grouping.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using tsa::GroupPattern;

namespace {

/// Unordered two-set partitions counted by walking every subset.
std::uint64_t brute_force_partitions(int n) {
  std::set<std::pair<std::uint64_t, std::uint64_t>> seen;
  const std::uint64_t all = (std::uint64_t{1} << n) - 1;
  for (std::uint64_t s = 1; s < all; ++s) seen.insert({std::min(s, all ^ s), std::max(s, all ^ s)});
  return seen.size();
}

/// Static snapshot: every machine frozen at the given angle.
tsa::Trajectory frozen(const std::vector<std::string>& ids, const std::vector<double>& angles) {
  const std::size_t n = ids.size();
  std::vector<std::vector<double>> d, zero(n, std::vector<double>(3, 0.0));
  for (double a : angles) d.push_back({a, a, a});
  return fixture::trajectory(ids, std::vector<double>(n, 0.1), {0.0, 0.1, 0.2}, d, zero, zero, 1);
}

tsa::Trajectory permuted(const tsa::Trajectory& tr, const std::vector<std::size_t>& order) {
  auto out = tr;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto i = order[k];
    out.ids[k] = tr.ids[i];
    out.inertia[k] = tr.inertia[i];
    out.angles[k] = tr.angles[i];
    out.speeds[k] = tr.speeds[i];
    out.acc_powers[k] = tr.acc_powers[i];
    out.clear_faulton_acc[k] = tr.clear_faulton_acc[i];
  }
  return out;
}

const tsa::Trajectory& wscc_unstable() {
  static const auto tr = tsa::simulate(tsa::load_case(fixture::data("wscc9_bus7_unstable.json")));
  return tr;
}

std::vector<tsa::PatternCandidate> all_candidates(const tsa::Trajectory& tr) {
  std::vector<tsa::PatternCandidate> out;
  for (const auto& p : tsa::enumerate_patterns(static_cast<int>(tr.machines()))) {
    tsa::PatternCandidate c;
    c.pattern = tsa::to_group_pattern(p, tr.ids);
    out.push_back(tsa::evaluate_candidate(tr, c));
  }
  return out;
}

}  // namespace

TEST_CASE("mode and pattern counts", "[grouping]") {
  CHECK(tsa::mod_count(10) == 511);
  CHECK(tsa::mod_count(2) == 1);
  CHECK(tsa::mod_count(5) == 15);
  CHECK(tsa::pattern_count(10) == 511);
  CHECK(tsa::pattern_count(3) == 3);
  CHECK(tsa::pattern_count(6) == 31);
  for (int n = 2; n <= 12; ++n) {
    INFO("n = " << n);
    CHECK(tsa::mod_count(n) == tsa::pattern_count(n));
    CHECK(tsa::pattern_count(n) == brute_force_partitions(n));
    CHECK(tsa::enumerate_patterns(n).size() == tsa::pattern_count(n));
  }
  CHECK_THROWS_WITH(tsa::mod_count(1), ContainsSubstring("machine count out of range"));
  CHECK_THROWS_WITH(tsa::pattern_count(0), ContainsSubstring("machine count out of range"));
  CHECK_THROWS_WITH(tsa::enumerate_patterns(21), ContainsSubstring("machine count out of range"));
}

TEST_CASE("three machines give three patterns", "[grouping]") {
  const auto ps = tsa::enumerate_patterns(3);
  REQUIRE(ps.size() == 3);
  CHECK(ps[0] == tsa::IndexPattern{{1}, {0, 2}});
  CHECK(ps[1] == tsa::IndexPattern{{2}, {0, 1}});
  CHECK(ps[2] == tsa::IndexPattern{{1, 2}, {0}});
}

TEST_CASE("enumeration never lists a pattern and its complement", "[grouping]") {
  for (int n : {4, 7, 10}) {
    std::set<std::vector<std::size_t>> crs;
    std::set<std::set<std::vector<std::size_t>>> partitions;
    for (const auto& p : tsa::enumerate_patterns(n)) {
      CHECK(std::find(p.ncr.begin(), p.ncr.end(), 0u) != p.ncr.end());
      CHECK(p.cr.size() + p.ncr.size() == static_cast<std::size_t>(n));
      partitions.insert({p.cr, p.ncr});
      crs.insert(p.cr);
    }
    CHECK(partitions.size() == tsa::pattern_count(n));
    CHECK(crs.size() == tsa::pattern_count(n));
  }
}

TEST_CASE("largest gap cut", "[grouping]") {
  const auto tr = frozen({"a", "b", "c"}, {5.0, 4.9, 0.1});
  const auto c = tsa::candidate_patterns(tr, 0.2, 1);
  REQUIRE(c.size() == 1);
  CHECK(c[0].pattern == GroupPattern({"a", "b"}, {"c"}));
  CHECK_THAT(c[0].gap_rad, WithinAbs(4.8, 1e-12));
  CHECK(c[0].rank == 1);
}

TEST_CASE("equal angles fall back to id order", "[grouping]") {
  const auto tr = frozen({"c", "a", "b"}, {0.7, 0.7, 0.7});
  const auto c = tsa::candidate_patterns(tr, 0.1, 3);
  REQUIRE(c.size() == 2);
  CHECK(c[0].gap_rad == 0.0);
  CHECK(c[0].pattern == GroupPattern({"b", "c"}, {"a"}));
  CHECK(c[1].pattern == GroupPattern({"c"}, {"a", "b"}));
}

TEST_CASE("two comparable gaps give top-alone and bottom-alone candidates", "[grouping]") {
  const auto tr = frozen({"top", "m1", "m2", "bottom"}, {2.0, 0.1, 0.0, -2.0});
  const auto c = tsa::candidate_patterns(tr, 0.2, 2);
  REQUIRE(c.size() == 2);
  CHECK(c[0].pattern == GroupPattern({"m1", "m2", "top"}, {"bottom"}));
  CHECK_THAT(c[0].gap_rad, WithinAbs(2.0, 1e-12));
  CHECK(c[1].pattern == GroupPattern({"top"}, {"bottom", "m1", "m2"}));
  CHECK_THAT(c[1].gap_rad, WithinAbs(1.9, 1e-12));
}

TEST_CASE("candidates do not depend on machine order", "[grouping]") {
  const auto& tr = wscc_unstable();
  const auto base = tsa::candidate_patterns(tr, tr.times.back(), 3);
  for (const std::vector<std::size_t>& order : {std::vector<std::size_t>{2, 0, 1}, std::vector<std::size_t>{1, 2, 0}}) {
    const auto other = tsa::candidate_patterns(permuted(tr, order), tr.times.back(), 3);
    REQUIRE(other.size() == base.size());
    for (std::size_t k = 0; k < base.size(); ++k) {
      CHECK(other[k].pattern == base[k].pattern);
      CHECK_THAT(other[k].gap_rad, WithinAbs(base[k].gap_rad, 1e-12));
    }
  }
}

TEST_CASE("candidate errors", "[grouping]") {
  const auto tr = frozen({"a", "b"}, {1.0, 0.0});
  CHECK_THROWS_WITH(tsa::candidate_patterns(tr, 0.3, 1), ContainsSubstring("t_eval out of range"));
  CHECK_THROWS_WITH(tsa::candidate_patterns(tr, -0.1, 1), ContainsSubstring("t_eval out of range"));
  CHECK_THROWS_WITH(tsa::candidate_patterns(tr, 0.1, 0), ContainsSubstring("invalid candidate count"));
  CHECK_THROWS_WITH(tsa::dominant_pattern(tr, {}), ContainsSubstring("no pattern candidates"));
}

TEST_CASE("a single candidate is returned as is", "[grouping]") {
  const auto& tr = wscc_unstable();
  tsa::PatternCandidate c;
  c.pattern = GroupPattern({"2"}, {"1", "3"});
  c.gap_rad = 1.25;
  const auto d = tsa::dominant_pattern(tr, {c});
  CHECK(d.pattern == c.pattern);
  CHECK(d.gap_rad == 1.25);
  CHECK(d.rank == 1);
  CHECK(std::isfinite(d.margin_eta));
}

TEST_CASE("the most negative margin wins", "[grouping]") {
  const auto& tr = wscc_unstable();
  const auto all = all_candidates(tr);
  const auto [lo, hi] = std::minmax_element(all.begin(), all.end(), [](const auto& x, const auto& y) {
    return x.margin_eta < y.margin_eta;
  });
  REQUIRE(lo->margin_eta < 0.0);
  REQUIRE(hi->margin_eta > lo->margin_eta);
  auto a = *hi, b = *lo;
  a.gap_rad = 10.0;  // a larger gap must not outweigh the margin
  CHECK(tsa::dominant_pattern(tr, {a, b}).pattern == lo->pattern);
  CHECK(tsa::dominant_pattern(tr, {b, a}).pattern == lo->pattern);
  const auto ranked = tsa::rank_candidates(tr, {a, b});
  CHECK(ranked[0].rank == 1);
  CHECK(ranked[1].rank == 2);
}

TEST_CASE("gap candidates reach the enumeration minimum on a long WSCC clearing", "[grouping]") {
  const auto c = tsa::with_clear_time(tsa::load_case(fixture::data("wscc9_bus7_stable.json")), 0.30);
  const auto tr = tsa::simulate(c, 2.0, 0.001);
  const auto all = all_candidates(tr);
  const double best = std::min_element(all.begin(), all.end(), [](const auto& a, const auto& b) {
                        return a.margin_eta < b.margin_eta;
                      })->margin_eta;
  const auto chosen = tsa::auto_pattern(tr);
  CHECK(chosen.margin_eta < 0.0);
  CHECK_THAT(chosen.margin_eta, WithinAbs(best, 1e-9 * std::max(1.0, std::abs(best))));
  // The critical group is the one running ahead.
  double cr_min = 1e300, ncr_max = -1e300;
  for (const auto& id : tr.ids) {
    const double d = tsa::individual_series(tr, id).delta_rel.back();
    if (chosen.pattern.group_of(id) == tsa::Group::CR) cr_min = std::min(cr_min, d);
    else ncr_max = std::max(ncr_max, d);
  }
  CHECK(cr_min > ncr_max);
}

TEST_CASE("selection ignores how a candidate was labelled", "[grouping]") {
  const auto& tr = wscc_unstable();
  for (const auto& p : tsa::enumerate_patterns(3)) {
    tsa::PatternCandidate c;
    c.pattern = tsa::to_group_pattern(p, tr.ids);
    auto s = c;
    s.pattern = c.pattern.swapped();
    const auto a = tsa::dominant_pattern(tr, {c});
    const auto b = tsa::dominant_pattern(tr, {s});
    CHECK(a.pattern == b.pattern);
    CHECK_THAT(a.margin_eta, WithinAbs(b.margin_eta, 1e-9 * std::max(1.0, std::abs(a.margin_eta))));
  }
}

TEST_CASE("candidate CSV layout", "[grouping]") {
  const auto& tr = wscc_unstable();
  std::ostringstream os;
  tsa::write_candidates_csv(os, tsa::rank_candidates(tr, tsa::candidate_patterns(tr, tr.times.back(), 2)));
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "rank,omega_cr,omega_ncr,gap_rad,eta,basis,definition");
  std::getline(in, line);
  CHECK(line.rfind("1,", 0) == 0);
  CHECK(line.ends_with(",artifact"));
}
