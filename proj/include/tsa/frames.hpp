#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsa/error.hpp"
#include "tsa/simulator.hpp"

namespace tsa {

enum class Reference { SYS, CR, NCR };

inline std::string_view to_string(Reference r) {
  switch (r) {
    case Reference::SYS: return "SYS";
    case Reference::CR: return "CR";
    case Reference::NCR: return "NCR";
  }
  return "?";
}

enum class Group { CR, NCR };

/// Two-set partition of machine ids into the critical and non-critical groups.
/// Both lists are kept sorted.
struct GroupPattern {
  std::vector<std::string> omega_cr;
  std::vector<std::string> omega_ncr;

  GroupPattern() = default;
  GroupPattern(std::vector<std::string> cr, std::vector<std::string> ncr)
      : omega_cr(std::move(cr)), omega_ncr(std::move(ncr)) {
    std::sort(omega_cr.begin(), omega_cr.end());
    std::sort(omega_ncr.begin(), omega_ncr.end());
  }

  const std::vector<std::string>& members(Group g) const { return g == Group::CR ? omega_cr : omega_ncr; }

  std::optional<Group> group_of(std::string_view id) const {
    if (std::find(omega_cr.begin(), omega_cr.end(), id) != omega_cr.end()) return Group::CR;
    if (std::find(omega_ncr.begin(), omega_ncr.end(), id) != omega_ncr.end()) return Group::NCR;
    return std::nullopt;
  }

  GroupPattern swapped() const { return GroupPattern(omega_ncr, omega_cr); }

  friend bool operator==(const GroupPattern&, const GroupPattern&) = default;
};

/// Throws "invalid pattern" unless the groups are nonempty, disjoint and
/// cover exactly the trajectory's machines.
inline void validate(const GroupPattern& p, const Trajectory& tr) {
  if (p.omega_cr.empty() || p.omega_ncr.empty()) fail("invalid pattern", "empty group");
  if (p.omega_cr.size() + p.omega_ncr.size() != tr.machines()) fail("invalid pattern", "groups do not cover all machines");
  for (const auto& id : tr.ids) {
    const bool in_cr = std::binary_search(p.omega_cr.begin(), p.omega_cr.end(), id);
    const bool in_ncr = std::binary_search(p.omega_ncr.begin(), p.omega_ncr.end(), id);
    if (in_cr == in_ncr) fail("invalid pattern", "machine " + id + (in_cr ? " is in both groups" : " is in no group"));
  }
}

/// One machine's (delta, omega, f) history in a chosen reference. Also carries
/// the left limit of f at the clearing sample so energy bookkeeping can
/// integrate each stage on its own force.
struct RelativeMachineSeries {
  std::string subject;
  Reference reference = Reference::SYS;
  std::vector<double> times;
  std::vector<double> delta_rel;
  std::vector<double> omega_rel;
  std::vector<double> f_rel;
  double inertia = 0.0;
  std::size_t clear_index = 0;
  double f_clear_faulton = 0.0;

  std::size_t size() const { return times.size(); }
  double clear_time() const { return times.at(clear_index); }
};

/// Inertia-weighted aggregate of a machine set in the absolute frame.
struct AggregateSeries {
  std::vector<double> delta;
  std::vector<double> omega;
  std::vector<double> f;
  double total_inertia = 0.0;
  double f_clear_faulton = 0.0;
};

namespace detail {

inline std::vector<std::size_t> indices_of(const Trajectory& tr, std::span<const std::string> members) {
  if (members.empty()) fail("invalid pattern", "empty machine set");
  std::vector<std::size_t> idx;
  idx.reserve(members.size());
  for (const auto& id : members) idx.push_back(tr.index_of(id));
  return idx;
}

inline RelativeMachineSeries shell(const Trajectory& tr, std::string subject, Reference ref, double inertia) {
  RelativeMachineSeries s;
  s.subject = std::move(subject);
  s.reference = ref;
  s.times = tr.times;
  s.inertia = inertia;
  s.clear_index = tr.clear_index;
  const std::size_t k = tr.samples();
  s.delta_rel.resize(k);
  s.omega_rel.resize(k);
  s.f_rel.resize(k);
  return s;
}

}  // namespace detail

/// delta = sum M_i delta_i / sum M_i (likewise omega), f = sum f_abs,i.
/// A single member is returned verbatim.
inline AggregateSeries coi_series(const Trajectory& tr, std::span<const std::string> members) {
  const auto idx = detail::indices_of(tr, members);
  AggregateSeries a;
  if (idx.size() == 1) {
    const auto i = idx.front();
    a.delta = tr.angles[i];
    a.omega = tr.speeds[i];
    a.f = tr.acc_powers[i];
    a.total_inertia = tr.inertia[i];
    a.f_clear_faulton = tr.clear_faulton_acc[i];
    return a;
  }
  const std::size_t k = tr.samples();
  a.delta.assign(k, 0.0);
  a.omega.assign(k, 0.0);
  a.f.assign(k, 0.0);
  for (auto i : idx) {
    const double m = tr.inertia[i];
    a.total_inertia += m;
    a.f_clear_faulton += tr.clear_faulton_acc[i];
    for (std::size_t s = 0; s < k; ++s) {
      a.delta[s] += m * tr.angles[i][s];
      a.omega[s] += m * tr.speeds[i][s];
      a.f[s] += tr.acc_powers[i][s];
    }
  }
  for (std::size_t s = 0; s < k; ++s) {
    a.delta[s] /= a.total_inertia;
    a.omega[s] /= a.total_inertia;
  }
  return a;
}

inline AggregateSeries coi_series(const Trajectory& tr, std::initializer_list<std::string> members) {
  const std::vector<std::string> v(members);
  return coi_series(tr, std::span<const std::string>(v));
}

/// Machine i relative to the system COI: delta_i - delta_COI, and
/// f_i-SYS = f_abs,i - (M_i / M_T) sum_j f_abs,j.
inline RelativeMachineSeries individual_series(const Trajectory& tr, const std::string& id) {
  const auto i = tr.index_of(id);
  const auto sys = coi_series(tr, std::span<const std::string>(tr.ids));
  const double share = tr.inertia[i] / sys.total_inertia;
  auto s = detail::shell(tr, id, Reference::SYS, tr.inertia[i]);
  for (std::size_t k = 0; k < tr.samples(); ++k) {
    s.delta_rel[k] = tr.angles[i][k] - sys.delta[k];
    s.omega_rel[k] = tr.speeds[i][k] - sys.omega[k];
    s.f_rel[k] = tr.acc_powers[i][k] - share * sys.f[k];
  }
  s.f_clear_faulton = tr.clear_faulton_acc[i] - share * sys.f_clear_faulton;
  return s;
}

/// Machine-CR (or Machine-NCR) in the COI-SYS reference. The force is the sum
/// of the members' COI-SYS forces, so a singleton group reproduces the
/// member's individual series exactly.
inline RelativeMachineSeries equivalent_series(const Trajectory& tr, const GroupPattern& pattern, Group which) {
  validate(pattern, tr);
  const auto& members = pattern.members(which);
  const auto agg = coi_series(tr, std::span<const std::string>(members));
  const auto sys = coi_series(tr, std::span<const std::string>(tr.ids));
  auto s = detail::shell(tr, which == Group::CR ? "CR" : "NCR", Reference::SYS, agg.total_inertia);
  for (std::size_t k = 0; k < tr.samples(); ++k) {
    s.delta_rel[k] = agg.delta[k] - sys.delta[k];
    s.omega_rel[k] = agg.omega[k] - sys.omega[k];
    s.f_rel[k] = 0.0;
  }
  s.f_clear_faulton = 0.0;
  for (const auto& id : members) {
    const auto i = tr.index_of(id);
    const double share = tr.inertia[i] / sys.total_inertia;
    for (std::size_t k = 0; k < tr.samples(); ++k) s.f_rel[k] += tr.acc_powers[i][k] - share * sys.f[k];
    s.f_clear_faulton += tr.clear_faulton_acc[i] - share * sys.f_clear_faulton;
  }
  return s;
}

/// Machine i relative to the equivalent machine of its own group (I-CR or
/// I-NCR system). Evaluated pairwise,
///   x_i-G = sum_{j in G, j != i} M_j (x_i - x_j) / M_G   for x in {delta, omega}
///   f_i-G = sum_{j in G, j != i} (M_j f_i - M_i f_j) / M_G,
/// which equals delta_i-SYS - delta_G-SYS and f_i-SYS - (M_i/M_G) f_G-SYS but
/// makes the two members of a two-machine group exact mirror images.
inline RelativeMachineSeries inner_group_series(const Trajectory& tr, const std::string& id, const GroupPattern& pattern) {
  validate(pattern, tr);
  const auto group = pattern.group_of(id);
  if (!group) fail("unknown machine id", id);
  const auto i = tr.index_of(id);
  const auto& members = pattern.members(*group);
  double m_group = 0.0;
  std::vector<std::size_t> others;
  for (const auto& mid : members) {
    const auto j = tr.index_of(mid);
    m_group += tr.inertia[j];
    if (j != i) others.push_back(j);
  }
  auto s = detail::shell(tr, id, *group == Group::CR ? Reference::CR : Reference::NCR, tr.inertia[i]);
  const double mi = tr.inertia[i];
  for (std::size_t k = 0; k < tr.samples(); ++k) {
    double d = 0.0, w = 0.0, f = 0.0;
    for (auto j : others) {
      const double mj = tr.inertia[j];
      d += mj * (tr.angles[i][k] - tr.angles[j][k]);
      w += mj * (tr.speeds[i][k] - tr.speeds[j][k]);
      f += mj * tr.acc_powers[i][k] - mi * tr.acc_powers[j][k];
    }
    s.delta_rel[k] = d / m_group;
    s.omega_rel[k] = w / m_group;
    s.f_rel[k] = f / m_group;
  }
  double fc = 0.0;
  for (auto j : others) fc += tr.inertia[j] * tr.clear_faulton_acc[i] - mi * tr.clear_faulton_acc[j];
  s.f_clear_faulton = fc / m_group;
  return s;
}

/// Largest residuals of sum M_i delta_i-G, sum M_i omega_i-G and sum f_i-G
/// over all samples for the inner-group series of one group.
struct FrameIdentityReport {
  double delta_residual = 0.0;
  double omega_residual = 0.0;
  double force_residual = 0.0;

  double worst() const { return std::max({delta_residual, omega_residual, force_residual}); }
  bool holds(double tol = 1e-9) const { return worst() <= tol; }
};

inline FrameIdentityReport frame_identity_report(std::span<const RelativeMachineSeries> group) {
  FrameIdentityReport r;
  if (group.empty()) return r;
  const auto& grid = group.front().times;
  for (const auto& s : group)
    if (s.times != grid) fail("mismatched sampling grids");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double d = 0.0, w = 0.0, f = 0.0;
    for (const auto& s : group) {
      d += s.inertia * s.delta_rel[k];
      w += s.inertia * s.omega_rel[k];
      f += s.f_rel[k];
    }
    r.delta_residual = std::max(r.delta_residual, std::abs(d));
    r.omega_residual = std::max(r.omega_residual, std::abs(w));
    r.force_residual = std::max(r.force_residual, std::abs(f));
  }
  double fc = 0.0;
  for (const auto& s : group) fc += s.f_clear_faulton;
  r.force_residual = std::max(r.force_residual, std::abs(fc));
  return r;
}

/// All inner-group series of one group, in member order.
inline std::vector<RelativeMachineSeries> group_inner_series(const Trajectory& tr, const GroupPattern& pattern, Group g) {
  std::vector<RelativeMachineSeries> out;
  for (const auto& id : pattern.members(g)) out.push_back(inner_group_series(tr, id, pattern));
  return out;
}

/// CSV `t,delta_rel,omega_rel,f_rel` after a `# subject=.. reference=.. inertia=..` line.
inline void write_series_csv(std::ostream& os, const RelativeMachineSeries& s) {
  os << "# subject=" << s.subject << " reference=" << to_string(s.reference) << " inertia=";
  write_g9(os, s.inertia);
  os << "\nt,delta_rel,omega_rel,f_rel\n";
  for (std::size_t k = 0; k < s.size(); ++k) {
    write_g9(os, s.times[k]);
    for (double v : {s.delta_rel[k], s.omega_rel[k], s.f_rel[k]}) {
      os << ',';
      write_g9(os, v);
    }
    os << '\n';
  }
}

}  // namespace tsa
