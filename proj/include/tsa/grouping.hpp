#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "tsa/error.hpp"
#include "tsa/frames.hpp"
#include "tsa/stability.hpp"

namespace tsa {

/// Number of modes of disturbance: nonempty sets of machines that can go
/// unstable, counted with one machine fixed on the stable side.
inline std::uint64_t mod_count(int n) {
  if (n < 2 || n > 63) fail("machine count out of range", std::to_string(n));
  return (std::uint64_t{1} << (n - 1)) - 1;
}

/// Unordered two-set partitions of n machines: (2^n - 2) / 2.
inline std::uint64_t pattern_count(int n) {
  if (n < 2 || n > 63) fail("machine count out of range", std::to_string(n));
  return ((std::uint64_t{1} << n) - 2) / 2;
}

/// Pattern over machine indices 0..n-1.
struct IndexPattern {
  std::vector<std::size_t> cr;
  std::vector<std::size_t> ncr;

  friend bool operator==(const IndexPattern&, const IndexPattern&) = default;
};

/// All group separation patterns of n machines, each listed once. Machine 0
/// always sits in the NCR set; the CR set runs over the nonempty subsets of
/// machines 1..n-1 in binary counting order.
inline std::vector<IndexPattern> enumerate_patterns(int n) {
  if (n < 2 || n > 20) fail("machine count out of range", std::to_string(n));
  const std::uint64_t count = pattern_count(n);
  std::vector<IndexPattern> out;
  out.reserve(count);
  for (std::uint64_t mask = 1; mask <= count; ++mask) {
    IndexPattern p;
    p.ncr.push_back(0);
    for (int i = 1; i < n; ++i) {
      if (mask & (std::uint64_t{1} << (i - 1))) p.cr.push_back(static_cast<std::size_t>(i));
      else p.ncr.push_back(static_cast<std::size_t>(i));
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline GroupPattern to_group_pattern(const IndexPattern& p, const std::vector<std::string>& ids) {
  std::vector<std::string> cr, ncr;
  for (auto i : p.cr) cr.push_back(ids.at(i));
  for (auto i : p.ncr) ncr.push_back(ids.at(i));
  return GroupPattern(std::move(cr), std::move(ncr));
}

struct PatternCandidate {
  GroupPattern pattern;
  double gap_rad = 0.0;
  double margin_eta = std::numeric_limits<double>::quiet_NaN();
  MarginBasis margin_basis = MarginBasis::not_critical;
  int rank = 0;
};

/// Machines sorted by delta_i-SYS at t_eval (ties by id); each of the k_max
/// largest gaps between neighbours is a cut with the advanced side as CR.
/// Candidates come out by gap, largest first; equal gaps keep cut order.
inline std::vector<PatternCandidate> candidate_patterns(const Trajectory& tr, double t_eval, int k_max) {
  if (k_max < 1) fail("invalid candidate count", std::to_string(k_max));
  if (tr.samples() == 0 || t_eval < tr.times.front() || t_eval > tr.times.back())
    fail("t_eval out of range", std::to_string(t_eval));
  const std::size_t n = tr.machines();
  if (n < 2) return {};
  auto j = detail::sample_at_or_after(tr.times, t_eval);
  const auto sys = coi_series(tr, std::span<const std::string>(tr.ids));
  std::vector<std::pair<double, std::string>> order;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = detail::interp_at(tr.times, tr.angles[i], j, t_eval) - detail::interp_at(tr.times, sys.delta, j, t_eval);
    order.emplace_back(a, tr.ids[i]);
  }
  std::sort(order.begin(), order.end());

  struct Cut {
    std::size_t at;  // machines [at, n) are CR
    double gap;
  };
  std::vector<Cut> cuts;
  for (std::size_t k = 1; k < n; ++k) cuts.push_back({k, order[k].first - order[k - 1].first});
  std::stable_sort(cuts.begin(), cuts.end(), [](const Cut& a, const Cut& b) { return a.gap > b.gap; });
  cuts.resize(std::min<std::size_t>(cuts.size(), static_cast<std::size_t>(k_max)));

  std::vector<PatternCandidate> out;
  int rank = 1;
  for (const auto& c : cuts) {
    std::vector<std::string> cr, ncr;
    for (std::size_t k = 0; k < n; ++k) (k >= c.at ? cr : ncr).push_back(order[k].second);
    PatternCandidate pc;
    pc.pattern = GroupPattern(std::move(cr), std::move(ncr));
    pc.gap_rad = c.gap;
    pc.rank = rank++;
    out.push_back(std::move(pc));
  }
  return out;
}

namespace detail {

/// Relative tolerance under which the two mirror margins count as equal.
inline bool margins_equal(double a, double b) {
  if (a == b) return true;
  if (!std::isfinite(a) || !std::isfinite(b)) return false;
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace detail

/// Evaluates both mirror margins of a candidate. Omega_CR becomes the group
/// whose mirror has the strictly lower margin; when the two agree (they do
/// analytically) it is the group ahead in angle at the last sample.
inline PatternCandidate evaluate_candidate(const Trajectory& tr, PatternCandidate c) {
  const auto cr_series = equivalent_series(tr, c.pattern, Group::CR);
  const auto ncr_series = equivalent_series(tr, c.pattern, Group::NCR);
  const auto cr = eac_margin_detail(cr_series, tr.clear_time);
  const auto ncr = eac_margin_detail(ncr_series, tr.clear_time);
  const bool swap = detail::margins_equal(cr.eta, ncr.eta) ? ncr_series.delta_rel.back() > cr_series.delta_rel.back()
                                                           : ncr.eta < cr.eta;
  if (swap) {
    c.pattern = c.pattern.swapped();
    c.margin_eta = ncr.eta;
    c.margin_basis = ncr.basis;
  } else {
    c.margin_eta = cr.eta;
    c.margin_basis = cr.basis;
  }
  return c;
}

/// Candidates with margins, most severe first (lowest eta, then larger gap,
/// then lexicographic Omega_CR). Ranks are reassigned 1..n in that order.
inline std::vector<PatternCandidate> rank_candidates(const Trajectory& tr, std::vector<PatternCandidate> candidates) {
  for (auto& c : candidates) c = evaluate_candidate(tr, std::move(c));
  std::stable_sort(candidates.begin(), candidates.end(), [](const PatternCandidate& a, const PatternCandidate& b) {
    if (!detail::margins_equal(a.margin_eta, b.margin_eta)) return a.margin_eta < b.margin_eta;
    if (a.gap_rad != b.gap_rad) return a.gap_rad > b.gap_rad;
    return a.pattern.omega_cr < b.pattern.omega_cr;
  });
  int rank = 1;
  for (auto& c : candidates) c.rank = rank++;
  return candidates;
}

inline PatternCandidate dominant_pattern(const Trajectory& tr, std::vector<PatternCandidate> candidates) {
  if (candidates.empty()) fail("no pattern candidates");
  return rank_candidates(tr, std::move(candidates)).front();
}

inline constexpr int kDefaultCandidateCount = 3;

/// Candidate generation at the end of the trajectory followed by selection.
inline PatternCandidate auto_pattern(const Trajectory& tr, int k_max = kDefaultCandidateCount) {
  return dominant_pattern(tr, candidate_patterns(tr, tr.times.back(), k_max));
}

/// CSV `rank,omega_cr,omega_ncr,gap_rad,eta,basis,definition`; group members
/// separated by ';'.
inline void write_candidates_csv(std::ostream& os, const std::vector<PatternCandidate>& cands) {
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + v[i];
    return s;
  };
  os << "rank,omega_cr,omega_ncr,gap_rad,eta,basis,definition\n";
  for (const auto& c : cands) {
    os << c.rank << ',' << join(c.pattern.omega_cr) << ',' << join(c.pattern.omega_ncr) << ',';
    write_g9(os, c.gap_rad);
    os << ',';
    write_g9(os, c.margin_eta);
    os << ',' << to_string(c.margin_basis) << ",artifact\n";
  }
}

}  // namespace tsa
