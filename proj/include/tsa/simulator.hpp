#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tsa/case.hpp"
#include "tsa/error.hpp"
#include "tsa/power.hpp"

namespace tsa {

/// Dense absolute-frame solution. Per-machine columns are indexed
/// [machine][sample]. Speeds are deviations from synchronous speed (rad/s).
struct Trajectory {
  std::string case_ref;
  std::vector<std::string> ids;
  std::vector<double> inertia;  // M_i
  std::vector<double> times;
  std::vector<std::vector<double>> angles;
  std::vector<std::vector<double>> speeds;
  std::vector<std::vector<double>> acc_powers;  // f_abs,i on the stage active at the sample
  /// f_abs,i at the clearing state evaluated on the fault-on stage. The sample
  /// at clear_index carries the postfault value; this is its left limit.
  std::vector<double> clear_faulton_acc;
  std::size_t clear_index = 0;
  double clear_time = 0.0;
  double dt = 0.0;
  bool damped = false;

  std::size_t machines() const { return ids.size(); }
  std::size_t samples() const { return times.size(); }

  std::size_t index_of(const std::string& id) const {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return i;
    fail("unknown machine id", id);
  }
};

/// Classical fourth-order Runge-Kutta step for y' = rhs(y).
/// Scratch buffers live in the stepper so repeated steps do not allocate.
class Rk4Stepper {
 public:
  explicit Rk4Stepper(std::size_t n) : tmp_(n), k1_(n), k2_(n), k3_(n), k4_(n) {}

  template <typename Rhs>
  void step(Rhs&& rhs, std::vector<double>& y, double h) {
    const std::size_t n = y.size();
    rhs(y, k1_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + 0.5 * h * k1_[i];
    rhs(tmp_, k2_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + 0.5 * h * k2_[i];
    rhs(tmp_, k3_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * k3_[i];
    rhs(tmp_, k4_);
    for (std::size_t i = 0; i < n; ++i) y[i] += h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
  }

 private:
  std::vector<double> tmp_, k1_, k2_, k3_, k4_;
};

/// Integrates M_i dw_i/dt = f_abs,i - D_i w_i, d(delta_i)/dt = w_i from the
/// prefault equilibrium. The fault is applied at t = 0 and cleared at
/// clear_time; the fault-on interval is split into equal steps no longer
/// than dt so a sample lands exactly on clear_time. Postfault samples sit at
/// clear_time + k dt.
inline Trajectory simulate(const SystemCase& c, double t_end, double dt) {
  if (!(dt > 0.0 && dt <= 0.01)) fail("invalid step", "dt must be in (0, 0.01]");
  if (!(t_end > c.fault.clear_time)) fail("invalid horizon", "t_end must exceed clear_time");

  const std::size_t n = c.size();
  const auto delta0 = prefault_equilibrium(c);
  const auto emfs = c.emfs();

  Trajectory tr;
  tr.case_ref = c.meta.name;
  tr.dt = dt;
  tr.clear_time = c.fault.clear_time;
  for (const auto& m : c.machines) {
    tr.ids.push_back(m.id);
    tr.inertia.push_back(m.inertia_M);
    tr.damped = tr.damped || m.damping_D != 0.0;
  }
  const auto n_on = static_cast<std::size_t>(std::ceil(c.fault.clear_time / dt - 1e-9));
  const double h_on = c.fault.clear_time / static_cast<double>(n_on);
  const auto n_post = static_cast<std::size_t>(std::llround(std::ceil((t_end - c.fault.clear_time) / dt - 1e-9)));
  const std::size_t total = n_on + n_post + 1;
  tr.times.reserve(total);
  tr.angles.assign(n, {});
  tr.speeds.assign(n, {});
  tr.acc_powers.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    tr.angles[i].reserve(total);
    tr.speeds[i].reserve(total);
    tr.acc_powers[i].reserve(total);
  }

  std::vector<double> y(2 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) y[i] = delta0[i];
  std::vector<double> pe(n);

  const ReducedNetworkStage* active = &c.stage(Stage::faulton);
  auto rhs = [&](const std::vector<double>& state, std::vector<double>& dy) {
    electrical_power(*active, emfs, std::span<const double>(state.data(), n), pe);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& m = c.machines[i];
      const double w = state[n + i];
      dy[i] = w;
      dy[n + i] = (m.mech_power_Pm - pe[i] - m.damping_D * w) / m.inertia_M;
    }
  };
  auto record = [&](double t) {
    for (double v : y)
      if (!std::isfinite(v)) fail("numerical blow-up at t=" + std::to_string(t));
    electrical_power(*active, emfs, std::span<const double>(y.data(), n), pe);
    tr.times.push_back(t);
    for (std::size_t i = 0; i < n; ++i) {
      tr.angles[i].push_back(y[i]);
      tr.speeds[i].push_back(y[n + i]);
      tr.acc_powers[i].push_back(c.machines[i].mech_power_Pm - pe[i]);
    }
  };

  Rk4Stepper rk(2 * n);
  record(0.0);
  for (std::size_t k = 1; k <= n_on; ++k) {
    rk.step(rhs, y, h_on);
    if (k < n_on) record(static_cast<double>(k) * h_on);
  }
  // Left limit at clearing, then switch.
  for (double v : y)
    if (!std::isfinite(v)) fail("numerical blow-up at t=" + std::to_string(c.fault.clear_time));
  electrical_power(*active, emfs, std::span<const double>(y.data(), n), pe);
  tr.clear_faulton_acc.resize(n);
  for (std::size_t i = 0; i < n; ++i) tr.clear_faulton_acc[i] = c.machines[i].mech_power_Pm - pe[i];
  active = &c.stage(Stage::postfault);
  tr.clear_index = tr.times.size();
  record(c.fault.clear_time);
  for (std::size_t k = 1; k <= n_post; ++k) {
    rk.step(rhs, y, dt);
    record(c.fault.clear_time + static_cast<double>(k) * dt);
  }
  return tr;
}

inline Trajectory simulate(const SystemCase& c) { return simulate(c, c.run.t_end, c.run.dt); }

/// Linear zero crossing between (t0, v0) and (t1, v1).
inline double refine_crossing(double t0, double v0, double t1, double v1) {
  if (v0 == 0.0) return t0;
  if (v1 == 0.0) return t1;
  if ((v0 < 0.0) == (v1 < 0.0)) fail("no crossing");
  return t0 + (t1 - t0) * v0 / (v0 - v1);
}

/// Writes a value with 9 significant digits.
inline void write_g9(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  os << buf;
}

/// CSV: t,delta_<id>...,omega_<id>...,f_<id>...
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << 't';
  for (const char* prefix : {"delta_", "omega_", "f_"})
    for (const auto& id : tr.ids) os << ',' << prefix << id;
  os << '\n';
  for (std::size_t k = 0; k < tr.samples(); ++k) {
    write_g9(os, tr.times[k]);
    for (const auto* cols : {&tr.angles, &tr.speeds, &tr.acc_powers})
      for (const auto& col : *cols) {
        os << ',';
        write_g9(os, col[k]);
      }
    os << '\n';
  }
}

}  // namespace tsa
