#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tsa/error.hpp"

namespace tsa {

enum class Stage { prefault = 0, faulton = 1, postfault = 2 };

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::prefault: return "prefault";
    case Stage::faulton: return "faulton";
    case Stage::postfault: return "postfault";
  }
  return "?";
}

/// Classical-model machine on the system base. inertia_M = 2H / omega_syn.
struct MachineParams {
  std::string id;
  double inertia_M = 0.0;
  double mech_power_Pm = 0.0;
  double emf_mag = 0.0;
  double xd_prime = 0.0;
  int bus = 0;
  double damping_D = 0.0;
};

/// Network reduced to the generator internal nodes: Y = G + jB.
struct ReducedNetworkStage {
  Stage stage = Stage::prefault;
  Eigen::MatrixXd conductance_G;
  Eigen::MatrixXd susceptance_B;

  std::size_t size() const { return static_cast<std::size_t>(conductance_G.rows()); }
};

struct FaultSpec {
  int faulted_bus = 0;
  double clear_time = 0.0;
};

struct CaseMeta {
  std::string name;
  double base_mva = 100.0;
  double omega_syn = 2.0 * 3.14159265358979323846 * 60.0;
};

/// Optional run defaults carried by a case file.
struct RunDefaults {
  double dt = 0.001;
  double t_end = 5.0;
};

struct SystemCase {
  CaseMeta meta;
  std::vector<MachineParams> machines;
  std::array<ReducedNetworkStage, 3> stages;
  FaultSpec fault;
  RunDefaults run;
  /// Internal EMF angles derived from a power-flow snapshot (network mode only).
  std::optional<std::vector<double>> snapshot_angles;

  std::size_t size() const { return machines.size(); }

  const ReducedNetworkStage& stage(Stage s) const { return stages[static_cast<std::size_t>(s)]; }

  std::vector<double> emfs() const {
    std::vector<double> e;
    e.reserve(machines.size());
    for (const auto& m : machines) e.push_back(m.emf_mag);
    return e;
  }

  std::optional<std::size_t> find(std::string_view id) const {
    for (std::size_t i = 0; i < machines.size(); ++i)
      if (machines[i].id == id) return i;
    return std::nullopt;
  }
};

/// Copy of `c` with a different clearing time. Reduced matrices do not
/// depend on it, so nothing else changes.
inline SystemCase with_clear_time(SystemCase c, double clear_time) {
  if (!(clear_time > 0.0)) fail("malformed case", "clear_time must be > 0");
  c.fault.clear_time = clear_time;
  return c;
}

/// Throws "malformed case" when the invariants of the case types do not hold.
inline void validate(const SystemCase& c) {
  const std::size_t n = c.machines.size();
  if (n == 0) fail("malformed case", "no machines");
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = c.machines[i];
    if (!(m.inertia_M > 0.0)) fail("malformed case", "inertia must be > 0 for " + m.id);
    if (!(m.emf_mag > 0.0)) fail("malformed case", "emf must be > 0 for " + m.id);
    if (!(m.xd_prime > 0.0)) fail("malformed case", "xd_prime must be > 0 for " + m.id);
    if (!(m.damping_D >= 0.0)) fail("malformed case", "damping must be >= 0 for " + m.id);
    for (std::size_t j = i + 1; j < n; ++j)
      if (c.machines[j].id == m.id) fail("malformed case", "duplicate machine id " + m.id);
  }
  if (!(c.fault.clear_time > 0.0)) fail("malformed case", "clear_time must be > 0");
  for (const auto& s : c.stages) {
    const auto rows = static_cast<std::size_t>(s.conductance_G.rows());
    if (rows != n || static_cast<std::size_t>(s.conductance_G.cols()) != n ||
        static_cast<std::size_t>(s.susceptance_B.rows()) != n ||
        static_cast<std::size_t>(s.susceptance_B.cols()) != n)
      fail("malformed case", std::string("stage ") + std::string(to_string(s.stage)) +
                                 " is not " + std::to_string(n) + "x" + std::to_string(n));
    if (!s.conductance_G.allFinite() || !s.susceptance_B.allFinite())
      fail("malformed case", "non-finite admittance");
    const double asym_g = (s.conductance_G - s.conductance_G.transpose()).cwiseAbs().maxCoeff();
    const double asym_b = (s.susceptance_B - s.susceptance_B.transpose()).cwiseAbs().maxCoeff();
    if (asym_g > 1e-9 || asym_b > 1e-9)
      fail("malformed case", std::string("stage ") + std::string(to_string(s.stage)) +
                                 " is not symmetric");
  }
}

}  // namespace tsa
