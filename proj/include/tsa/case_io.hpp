#pragma once

// JSON case files.
//
//   {
//     "meta": {"name": "...", "base_mva": 100, "omega_syn": 376.99},
//     "machines": [{"id": "1", "H": 23.64, "D": 0, "xd_prime": 0.0608, "bus": 1,
//                   "Pm": 0.7, "E": 1.05}],          // Pm, E: reduced mode only
//     "mode": "reduced" | "network",
//     "reduced": {"prefault": {"G": [[..]], "B": [[..]]}, "faulton": {...}, "postfault": {...}},
//     "network": {"buses": [{"id", "Pd", "Qd", "Gs", "Bs"}],
//                 "branches": [{"from", "to", "r", "x", "b", "tap", "status_postfault"}],
//                 "snapshot": {"bus_voltages": [{"bus", "Vm", "Va"}],
//                              "machine_pq": [{"id", "P", "Q"}]}},
//     "fault": {"bus": 7, "clear_time": 0.083},
//     "simulation": {"dt": 0.001, "t_end": 5.0}        // optional run defaults
//   }
//
// Angles in radians, powers in p.u. on base_mva, H in seconds on base_mva.

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "tsa/case.hpp"
#include "tsa/error.hpp"
#include "tsa/network.hpp"
#include "tsa/power.hpp"

namespace tsa {

namespace detail {

using nlohmann::json;

inline const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) fail("malformed case", std::string("missing \"") + key + "\"");
  return j.at(key);
}

inline double number(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_number()) fail("malformed case", std::string("\"") + key + "\" is not a number");
  return v.get<double>();
}

inline double number_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? number(j, key) : fallback;
}

inline std::string id_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  fail("malformed case", "machine id must be a string or integer");
}

inline Eigen::MatrixXd matrix(const json& j, const char* key, std::size_t n) {
  const auto& rows = require(j, key);
  if (!rows.is_array() || rows.size() != n) fail("malformed case", std::string(key) + " has wrong row count");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = rows[r];
    if (!row.is_array() || row.size() != n) fail("malformed case", std::string(key) + " has wrong column count");
    for (std::size_t c = 0; c < n; ++c) {
      if (!row[c].is_number()) fail("malformed case", std::string(key) + " entry is not a number");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
    }
  }
  return m;
}

inline network::NetworkData parse_network(const json& j) {
  network::NetworkData net;
  for (const auto& b : require(j, "buses")) {
    net.buses.push_back({static_cast<int>(number(b, "id")), number_or(b, "Pd", 0.0), number_or(b, "Qd", 0.0),
                         number_or(b, "Gs", 0.0), number_or(b, "Bs", 0.0)});
  }
  for (const auto& br : require(j, "branches")) {
    network::Branch b;
    b.from = static_cast<int>(number(br, "from"));
    b.to = static_cast<int>(number(br, "to"));
    b.r = number(br, "r");
    b.x = number(br, "x");
    b.b = number_or(br, "b", 0.0);
    b.tap = number_or(br, "tap", 1.0);
    if (br.contains("status_postfault")) {
      const auto& s = br.at("status_postfault");
      b.in_service_postfault = s.is_boolean() ? s.get<bool>() : number(br, "status_postfault") != 0.0;
    }
    net.branches.push_back(b);
  }
  const auto& snap = require(j, "snapshot");
  for (const auto& v : require(snap, "bus_voltages"))
    net.voltages.push_back({static_cast<int>(number(v, "bus")), number(v, "Vm"), number(v, "Va")});
  for (const auto& pq : require(snap, "machine_pq"))
    net.machine_pq.push_back({id_string(require(pq, "id")), number(pq, "P"), number(pq, "Q")});
  return net;
}

inline SystemCase build_case_from(const json& doc) {
  SystemCase c;
  const auto& meta = require(doc, "meta");
  c.meta.name = meta.contains("name") ? meta.at("name").get<std::string>() : std::string("case");
  c.meta.base_mva = number_or(meta, "base_mva", 100.0);
  c.meta.omega_syn = number_or(meta, "omega_syn", c.meta.omega_syn);
  if (!(c.meta.omega_syn > 0.0)) fail("malformed case", "omega_syn must be > 0");

  const auto& fault = require(doc, "fault");
  c.fault.faulted_bus = static_cast<int>(number_or(fault, "bus", 0.0));
  c.fault.clear_time = number(fault, "clear_time");
  if (!(c.fault.clear_time > 0.0)) fail("malformed case", "clear_time must be > 0");

  if (doc.contains("simulation")) {
    const auto& sim = doc.at("simulation");
    c.run.dt = number_or(sim, "dt", c.run.dt);
    c.run.t_end = number_or(sim, "t_end", c.run.t_end);
  }

  const std::string mode = require(doc, "mode").get<std::string>();
  const bool reduced = mode == "reduced";
  if (!reduced && mode != "network") fail("malformed case", "mode must be \"reduced\" or \"network\"");
  if (doc.contains("reduced") == doc.contains("network"))
    fail("malformed case", "exactly one of \"reduced\" or \"network\" must be given");
  if (!doc.contains(reduced ? "reduced" : "network"))
    fail("malformed case", "mode \"" + mode + "\" without its data block");

  for (const auto& m : require(doc, "machines")) {
    MachineParams p;
    p.id = id_string(require(m, "id"));
    const double h = number(m, "H");
    p.inertia_M = 2.0 * h / c.meta.omega_syn;
    p.damping_D = number_or(m, "D", 0.0);
    p.xd_prime = number(m, "xd_prime");
    p.bus = static_cast<int>(number_or(m, "bus", 0.0));
    if (reduced) {
      p.mech_power_Pm = number(m, "Pm");
      p.emf_mag = number(m, "E");
    }
    c.machines.push_back(std::move(p));
  }
  const std::size_t n = c.machines.size();
  if (n == 0) fail("malformed case", "no machines");

  const Stage order[3] = {Stage::prefault, Stage::faulton, Stage::postfault};
  if (reduced) {
    const auto& red = doc.at("reduced");
    for (auto s : order) {
      const auto& blk = require(red, std::string(to_string(s)).c_str());
      auto& st = c.stages[static_cast<std::size_t>(s)];
      st.stage = s;
      st.conductance_G = matrix(blk, "G", n);
      st.susceptance_B = matrix(blk, "B", n);
    }
  } else {
    const auto net = parse_network(doc.at("network"));
    for (const auto& m : c.machines) (void)net.bus_index(m.bus);
    if (network::snapshot_mismatch(net, c.machines) > network::kSnapshotTolerance) fail("inconsistent snapshot");
    const auto emf = network::internal_emfs(net, c.machines);
    std::vector<double> angles(n);
    for (std::size_t i = 0; i < n; ++i) {
      c.machines[i].emf_mag = std::abs(emf[i]);
      angles[i] = std::arg(emf[i]);
    }
    for (auto s : order) c.stages[static_cast<std::size_t>(s)] = network::reduce_stage(net, c.machines, s, c.fault.faulted_bus);
    // Mechanical power is the prefault electrical output at the snapshot
    // angles, so the snapshot is an exact equilibrium of the reduced model.
    const auto pe = electrical_power(c.stage(Stage::prefault), c.emfs(), angles);
    for (std::size_t i = 0; i < n; ++i) c.machines[i].mech_power_Pm = pe[i];
    c.snapshot_angles = std::move(angles);
  }
  validate(c);
  return c;
}

}  // namespace detail

/// Parses case-file content and derives the three reduced network stages.
inline SystemCase build_case(std::string_view content) {
  using detail::json;
  try {
    return detail::build_case_from(json::parse(content));
  } catch (const json::exception& e) {
    fail("malformed case", e.what());
  }
}

inline SystemCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("case not found: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return build_case(buf.str());
}

}  // namespace tsa
