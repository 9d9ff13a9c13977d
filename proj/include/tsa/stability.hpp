#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tsa/error.hpp"
#include "tsa/frames.hpp"
#include "tsa/simulator.hpp"

namespace tsa {

/// |omega_rel| below this at an f zero is a grazing contact, not a DLP.
inline constexpr double kLiberationSpeedTolerance = 1e-6;
inline constexpr int kMaxSwings = 50;
/// Acceleration areas at or below this mean the subject never accelerated.
inline constexpr double kMinAccelerationArea = 1e-12;

struct KimbarkCurve {
  std::vector<std::pair<double, double>> points;  // (delta_rel, f_rel)
  std::vector<std::size_t> swing_marks;           // first sample after each omega sign change
};

enum class EventKind { DLP, DSP };

inline std::string_view to_string(EventKind k) { return k == EventKind::DLP ? "DLP" : "DSP"; }

struct SwingEvent {
  EventKind kind = EventKind::DSP;
  double time = 0.0;
  double delta_rel = 0.0;
  double residual_ke = 0.0;  // DLP only
  int swing_index = 1;
  std::size_t sample = 0;  // first sample at or after the event
};

struct EnergyLedger {
  std::vector<double> ke;
  std::vector<double> pe;
  std::vector<double> total;
  double ref_point = 0.0;  // delta_rel where pe = 0 (prefault equilibrium)
  double a_acc = 0.0;      // = ke at clearing
  std::optional<double> a_dec;
  std::optional<SwingEvent> mpp;
  std::size_t clear_index = 0;

  /// max |total(t) - total(clear)| over the postfault samples.
  double postfault_drift() const {
    double d = 0.0;
    for (std::size_t k = clear_index; k < total.size(); ++k) d = std::max(d, std::abs(total[k] - total[clear_index]));
    return d;
  }
};

namespace detail {

inline int sign(double v) { return (v > 0.0) - (v < 0.0); }

/// Linear interpolation of `v` at time t inside [times[j-1], times[j]].
inline double interp_at(std::span<const double> times, std::span<const double> v, std::size_t j, double t) {
  if (j == 0) return v[0];
  const double t0 = times[j - 1], t1 = times[j];
  if (t1 == t0) return v[j];
  const double a = (t - t0) / (t1 - t0);
  return v[j - 1] + a * (v[j] - v[j - 1]);
}

/// First sample index with time >= t.
inline std::size_t sample_at_or_after(std::span<const double> times, double t) {
  return static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t) - times.begin());
}

inline std::size_t clear_sample(const RelativeMachineSeries& s, double clear_time) {
  if (s.size() == 0) fail("clear time outside series range");
  const double tol = 1e-9 * std::max(1.0, std::abs(clear_time));
  if (s.clear_index < s.size() && std::abs(s.times[s.clear_index] - clear_time) <= tol) return s.clear_index;
  if (clear_time < s.times.front() - tol || clear_time > s.times.back() + tol) fail("clear time outside series range");
  const auto k = sample_at_or_after(s.times, clear_time - tol);
  if (k >= s.size() || std::abs(s.times[k] - clear_time) > tol) fail("clear time outside series range", "no sample at clearing");
  return k;
}

}  // namespace detail

inline KimbarkCurve kimbark(const RelativeMachineSeries& s) {
  KimbarkCurve c;
  c.points.reserve(s.size());
  int last = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    c.points.emplace_back(s.delta_rel[k], s.f_rel[k]);
    const int sg = detail::sign(s.omega_rel[k]);
    if (sg == 0) continue;
    if (last != 0 && sg != last) c.swing_marks.push_back(k);
    last = sg;
  }
  return c;
}

/// Scans the postfault segment swing by swing. Within a swing of direction
/// s = sign(omega_rel), a DLP is the point where s*f_rel climbs from negative
/// back to >= 0 while the subject still moves; a DSP is where omega_rel
/// reverses first. Scanning stops at the first DLP or after kMaxSwings.
inline std::vector<SwingEvent> swing_scan(const RelativeMachineSeries& s, double clear_time) {
  std::vector<SwingEvent> events;
  const std::size_t n = s.size();
  if (n == 0) return events;
  std::size_t k = detail::clear_sample(s, clear_time);
  while (k < n && s.omega_rel[k] == 0.0) ++k;
  if (k >= n) return events;

  const auto& t = s.times;
  const auto& w = s.omega_rel;
  const auto& f = s.f_rel;
  int dir = detail::sign(w[k]);
  int swing = 1;
  double prev_sf = dir * f[k];
  for (std::size_t j = k + 1; j < n; ++j) {
    const double sf = dir * f[j];
    const bool reversal = dir * w[j] < 0.0;
    const bool liberation = prev_sf < 0.0 && sf >= 0.0;
    const double t_rev = reversal ? refine_crossing(t[j - 1], w[j - 1], t[j], w[j]) : std::numeric_limits<double>::infinity();
    if (liberation) {
      const double t_lib = refine_crossing(t[j - 1], f[j - 1], t[j], f[j]);
      const double w_lib = detail::interp_at(t, w, j, t_lib);
      if (t_lib <= t_rev && std::abs(w_lib) > kLiberationSpeedTolerance) {
        events.push_back({EventKind::DLP, t_lib, detail::interp_at(t, s.delta_rel, j, t_lib),
                          0.5 * s.inertia * w_lib * w_lib, swing, j});
        return events;
      }
    }
    if (reversal) {
      events.push_back({EventKind::DSP, t_rev, detail::interp_at(t, s.delta_rel, j, t_rev), 0.0, swing, j});
      if (++swing > kMaxSwings) return events;
      dir = -dir;
      prev_sf = dir * f[j];
      continue;
    }
    prev_sf = sf;
  }
  return events;
}

namespace detail {

/// Derivative at x of the quadratic through three samples.
inline double quad_slope(const double* x, const double* y, double at) {
  return y[0] * (2 * at - x[1] - x[2]) / ((x[0] - x[1]) * (x[0] - x[2])) +
         y[1] * (2 * at - x[0] - x[2]) / ((x[1] - x[0]) * (x[1] - x[2])) +
         y[2] * (2 * at - x[0] - x[1]) / ((x[2] - x[0]) * (x[2] - x[1]));
}

/// Running integral of g over the samples [0, g.size()) of one stage by the
/// endpoint-corrected trapezoidal rule, h/2 (g_a + g_b) + h^2/12 (g'_a - g'_b),
/// with g' from local quadratics. Falls back to the plain rule below three
/// samples.
inline std::vector<double> corrected_trapezoid(std::span<const double> t, std::span<const double> g) {
  const std::size_t m = g.size();
  std::vector<double> out(m, 0.0);
  std::vector<double> dg(m, 0.0);
  if (m >= 3) {
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t c = std::clamp<std::size_t>(k, 1, m - 2) - 1;
      dg[k] = quad_slope(&t[c], &g[c], t[k]);
    }
  }
  for (std::size_t k = 1; k < m; ++k) {
    const double h = t[k] - t[k - 1];
    out[k] = out[k - 1] + 0.5 * h * (g[k - 1] + g[k]) + h * h / 12.0 * (dg[k - 1] - dg[k]);
  }
  return out;
}

}  // namespace detail

/// Kinetic energy 1/2 M omega^2 and potential energy -integral f d(delta)
/// from the first sample (the prefault equilibrium), taken in time as
/// -integral f omega dt. Fault-on and postfault stages are integrated
/// separately; the fault-on stage ends on the fault-on force at clearing.
inline EnergyLedger energy_ledger(const RelativeMachineSeries& s, double clear_time) {
  const std::size_t kc = detail::clear_sample(s, clear_time);
  const std::size_t n = s.size();
  EnergyLedger e;
  e.clear_index = kc;
  e.ref_point = s.delta_rel.front();
  e.ke.resize(n);
  e.pe.resize(n);
  e.total.resize(n);
  for (std::size_t k = 0; k < n; ++k) e.ke[k] = 0.5 * s.inertia * s.omega_rel[k] * s.omega_rel[k];
  std::vector<double> power(n);
  for (std::size_t k = 0; k < n; ++k) power[k] = s.f_rel[k] * s.omega_rel[k];
  std::vector<double> faulton(power.begin(), power.begin() + static_cast<std::ptrdiff_t>(kc + 1));
  if (kc == s.clear_index) faulton[kc] = s.f_clear_faulton * s.omega_rel[kc];
  const auto w_on = detail::corrected_trapezoid(std::span(s.times).first(kc + 1), faulton);
  for (std::size_t k = 0; k <= kc; ++k) e.pe[k] = -w_on[k];
  const auto w_post = detail::corrected_trapezoid(std::span(s.times).subspan(kc), std::span(power).subspan(kc));
  for (std::size_t k = kc; k < n; ++k) e.pe[k] = e.pe[kc] - w_post[k - kc];
  for (std::size_t k = 0; k < n; ++k) e.total[k] = e.ke[k] + e.pe[k];
  e.a_acc = e.ke[kc];
  const auto events = swing_scan(s, clear_time);
  if (!events.empty() && events.front().swing_index == 1) {
    const auto& ev = events.front();
    e.mpp = ev;
    e.a_dec = detail::interp_at(s.times, e.pe, ev.sample, ev.time) - e.pe[kc];
  }
  return e;
}

enum class MarginBasis { not_critical, liberation, stationary, stationary_unbounded, end_of_data };

inline std::string_view to_string(MarginBasis b) {
  switch (b) {
    case MarginBasis::not_critical: return "not_critical";
    case MarginBasis::liberation: return "liberation";
    case MarginBasis::stationary: return "stationary";
    case MarginBasis::stationary_unbounded: return "stationary_unbounded";
    case MarginBasis::end_of_data: return "end_of_data";
  }
  return "?";
}

struct Margin {
  double eta = std::numeric_limits<double>::infinity();
  MarginBasis basis = MarginBasis::not_critical;
  double a_acc = 0.0;
};

/// eta = (A_dec,available - A_acc) / A_acc on the first postfault swing,
/// evaluated through the energy identity A_acc - A_dec = KE at the MPP:
///   DLP on swing 1  -> eta = -KE_DLP / A_acc  (< 0)
///   DSP on swing 1  -> eta = A_extra / A_acc, A_extra = f_r^2 / (2 m), the
///                      triangle left under the Kimbark curve when f is
///                      extended linearly (slope m = df/d(delta) fitted near
///                      the return point) to its zero; +inf if the fit does
///                      not bend back toward zero
///   no swing-1 event -> eta = -KE_end / A_acc
///   A_acc ~ 0        -> +inf ("not critical")
inline Margin eac_margin_detail(const RelativeMachineSeries& s, double clear_time) {
  const auto ledger = energy_ledger(s, clear_time);
  Margin m;
  m.a_acc = ledger.a_acc;
  if (!(ledger.a_acc > kMinAccelerationArea)) return m;
  if (!ledger.mpp) {
    m.basis = MarginBasis::end_of_data;
    m.eta = -ledger.ke.back() / ledger.a_acc;
    return m;
  }
  const auto& ev = *ledger.mpp;
  if (ev.kind == EventKind::DLP) {
    m.basis = MarginBasis::liberation;
    m.eta = -ev.residual_ke / ledger.a_acc;
    return m;
  }
  // Least-squares slope of f against delta over the tail of the first swing.
  const std::size_t kc = ledger.clear_index;
  const double f_r = detail::interp_at(s.times, s.f_rel, ev.sample, ev.time);
  const double d_r = ev.delta_rel;
  const double reach = std::abs(d_r - s.delta_rel[kc]);
  std::vector<std::pair<double, double>> pts{{d_r, f_r}};
  for (std::size_t k = kc; k < ev.sample; ++k)
    if (std::abs(s.delta_rel[k] - d_r) <= 0.25 * reach) pts.emplace_back(s.delta_rel[k], s.f_rel[k]);
  if (pts.size() < 3 && ev.sample >= kc + 2) {
    pts = {{d_r, f_r}, {s.delta_rel[ev.sample - 1], s.f_rel[ev.sample - 1]}, {s.delta_rel[ev.sample - 2], s.f_rel[ev.sample - 2]}};
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double np = static_cast<double>(pts.size());
  const double den = np * sxx - sx * sx;
  const double slope = den > 0.0 ? (np * sxy - sx * sy) / den : 0.0;
  if (!(slope > 0.0)) {
    m.basis = MarginBasis::stationary_unbounded;
    m.eta = std::numeric_limits<double>::infinity();
    return m;
  }
  m.basis = MarginBasis::stationary;
  m.eta = 0.5 * f_r * f_r / slope / ledger.a_acc;
  return m;
}

inline double eac_margin(const RelativeMachineSeries& s, double clear_time) { return eac_margin_detail(s, clear_time).eta; }

// ---------------------------------------------------------------------------
// System verdicts

/// Every relative series derived from one trajectory under one pattern.
struct SeriesSet {
  GroupPattern pattern;
  double clear_time = 0.0;
  std::vector<RelativeMachineSeries> individual;  // trajectory machine order
  RelativeMachineSeries cr;
  RelativeMachineSeries ncr;
  std::vector<RelativeMachineSeries> inner;  // trajectory machine order

  const RelativeMachineSeries& individual_of(const std::string& id) const {
    for (const auto& s : individual)
      if (s.subject == id) return s;
    fail("unknown machine id", id);
  }
  const RelativeMachineSeries& inner_of(const std::string& id) const {
    for (const auto& s : inner)
      if (s.subject == id) return s;
    fail("unknown machine id", id);
  }
  const RelativeMachineSeries& equivalent(Group g) const { return g == Group::CR ? cr : ncr; }
};

inline SeriesSet build_series(const Trajectory& tr, const GroupPattern& pattern) {
  validate(pattern, tr);
  SeriesSet set;
  set.pattern = pattern;
  set.clear_time = tr.clear_time;
  for (const auto& id : tr.ids) set.individual.push_back(individual_series(tr, id));
  set.cr = equivalent_series(tr, pattern, Group::CR);
  set.ncr = equivalent_series(tr, pattern, Group::NCR);
  for (const auto& id : tr.ids) set.inner.push_back(inner_group_series(tr, id, pattern));
  return set;
}

struct DlpRecord {
  std::string subject;
  Reference reference = Reference::SYS;
  SwingEvent event;
};

struct SeriesEvents {
  std::string subject;
  Reference reference = Reference::SYS;
  std::vector<SwingEvent> events;
};

/// Checks on one inner-group DLP against the equivalent and individual DLPs.
struct OrderingRow {
  std::string machine;
  Group group = Group::CR;
  double t_igmdlp = 0.0;
  std::optional<double> t_edlp;
  std::optional<double> t_idlp;
  std::optional<bool> later_than_edlp;  // nullopt: no EDLP to compare with
  std::optional<bool> later_than_idlp;  // nullopt: the machine has no IDLP
  double f_machine_sys = 0.0;           // f_k-SYS at the IGMDLP
  double f_group_sys = 0.0;             // f of the machine's own equivalent, COI-SYS
  double product = 0.0;
  bool product_positive = false;

  bool satisfied() const {
    return later_than_edlp.value_or(false) && later_than_idlp.value_or(false) && product_positive;
  }
};

struct SystemVerdict {
  GroupPattern pattern;
  bool original_unstable = false;
  std::vector<DlpRecord> idlps;  // sorted by time
  std::optional<DlpRecord> earliest_idlp;
  bool equivalent_unstable = false;
  std::optional<DlpRecord> edlp_cr;
  std::optional<DlpRecord> edlp_ncr;
  std::optional<DlpRecord> edlp;  // earlier of the two mirrors
  std::vector<DlpRecord> igmdlps;  // sorted by time
  std::vector<OrderingRow> ordering;
  bool divergent = false;  // any inner-group machine unstable
  std::vector<SeriesEvents> events;

  std::string_view equivalence_quality() const { return divergent ? "divergent" : "close"; }

  std::optional<double> idlp_time(const std::string& id) const {
    for (const auto& r : idlps)
      if (r.subject == id) return r.event.time;
    return std::nullopt;
  }
};

namespace detail {

inline std::optional<SwingEvent> first_dlp(const std::vector<SwingEvent>& ev) {
  for (const auto& e : ev)
    if (e.kind == EventKind::DLP) return e;
  return std::nullopt;
}

inline void by_time(std::vector<DlpRecord>& v) {
  std::stable_sort(v.begin(), v.end(), [](const DlpRecord& a, const DlpRecord& b) { return a.event.time < b.event.time; });
}

inline double value_at(const RelativeMachineSeries& s, std::span<const double> v, double t) {
  auto j = sample_at_or_after(s.times, t);
  if (j >= s.size()) j = s.size() - 1;
  return interp_at(s.times, v, j, t);
}

}  // namespace detail

inline SystemVerdict verdicts(const SeriesSet& set) {
  SystemVerdict v;
  v.pattern = set.pattern;
  const double tc = set.clear_time;
  auto scan = [&](const RelativeMachineSeries& s) -> std::optional<DlpRecord> {
    auto ev = swing_scan(s, tc);
    v.events.push_back({s.subject, s.reference, ev});
    if (auto d = detail::first_dlp(ev)) return DlpRecord{s.subject, s.reference, *d};
    return std::nullopt;
  };

  for (const auto& s : set.individual)
    if (auto d = scan(s)) v.idlps.push_back(*d);
  detail::by_time(v.idlps);
  v.original_unstable = !v.idlps.empty();
  if (v.original_unstable) v.earliest_idlp = v.idlps.front();

  v.edlp_cr = scan(set.cr);
  v.edlp_ncr = scan(set.ncr);
  if (v.edlp_cr && (!v.edlp_ncr || v.edlp_cr->event.time <= v.edlp_ncr->event.time)) v.edlp = v.edlp_cr;
  else if (v.edlp_ncr) v.edlp = v.edlp_ncr;
  v.equivalent_unstable = v.edlp.has_value();

  for (const auto& s : set.inner)
    if (auto d = scan(s)) v.igmdlps.push_back(*d);
  detail::by_time(v.igmdlps);
  v.divergent = !v.igmdlps.empty();

  for (const auto& d : v.igmdlps) {
    OrderingRow row;
    row.machine = d.subject;
    row.group = d.reference == Reference::CR ? Group::CR : Group::NCR;
    row.t_igmdlp = d.event.time;
    if (v.edlp) {
      row.t_edlp = v.edlp->event.time;
      row.later_than_edlp = row.t_igmdlp >= *row.t_edlp;
    }
    row.t_idlp = v.idlp_time(d.subject);
    if (row.t_idlp) row.later_than_idlp = row.t_igmdlp >= *row.t_idlp;
    const auto& ind = set.individual_of(d.subject);
    const auto& eq = set.equivalent(row.group);
    row.f_machine_sys = detail::value_at(ind, ind.f_rel, row.t_igmdlp);
    row.f_group_sys = detail::value_at(eq, eq.f_rel, row.t_igmdlp);
    row.product = row.f_machine_sys * row.f_group_sys;
    row.product_positive = row.product > 0.0;
    v.ordering.push_back(row);
  }
  return v;
}

inline SystemVerdict verdicts(const Trajectory& tr, const GroupPattern& pattern) {
  return verdicts(build_series(tr, pattern));
}

/// CSV rows `subject,reference,kind,swing,time_s,delta_rel_rad,residual_ke`.
inline void write_events_csv(std::ostream& os, std::span<const SeriesEvents> all, bool header = true) {
  if (header) os << "subject,reference,kind,swing,time_s,delta_rel_rad,residual_ke\n";
  for (const auto& se : all)
    for (const auto& e : se.events) {
      os << se.subject << ',' << to_string(se.reference) << ',' << to_string(e.kind) << ',' << e.swing_index << ',';
      write_g9(os, e.time);
      os << ',';
      write_g9(os, e.delta_rel);
      os << ',';
      write_g9(os, e.residual_ke);
      os << '\n';
    }
}

/// CSV `t,delta_rel,f_rel,ke,pe,total` for plotting Kimbark curves and energy.
inline void write_energy_csv(std::ostream& os, const RelativeMachineSeries& s, const EnergyLedger& e) {
  os << "# subject=" << s.subject << " reference=" << to_string(s.reference) << " a_acc=";
  write_g9(os, e.a_acc);
  os << " a_dec=";
  if (e.a_dec) write_g9(os, *e.a_dec);
  else os << "none";
  os << "\nt,delta_rel,f_rel,ke,pe,total\n";
  for (std::size_t k = 0; k < s.size(); ++k) {
    write_g9(os, s.times[k]);
    for (double x : {s.delta_rel[k], s.f_rel[k], e.ke[k], e.pe[k], e.total[k]}) {
      os << ',';
      write_g9(os, x);
    }
    os << '\n';
  }
}

}  // namespace tsa
