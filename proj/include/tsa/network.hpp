#pragma once

// Bus/branch network handling for network-mode cases: admittance assembly,
// constant-impedance loads from a power-flow snapshot, internal EMFs and
// Kron reduction to generator internal nodes.

#include <algorithm>
#include <array>
#include <complex>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tsa/case.hpp"
#include "tsa/error.hpp"

namespace tsa::network {

using cplx = std::complex<double>;

struct Bus {
  int id = 0;
  double Pd = 0.0;  // constant-power load in the snapshot, p.u.
  double Qd = 0.0;
  double Gs = 0.0;  // fixed shunt, p.u.
  double Bs = 0.0;
};

struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;     // total line charging
  double tap = 1.0;   // off-nominal ratio on the from side
  bool in_service_postfault = true;
};

struct BusVoltage {
  int bus = 0;
  double Vm = 1.0;
  double Va = 0.0;
};

struct MachinePQ {
  std::string id;
  double P = 0.0;
  double Q = 0.0;
};

struct NetworkData {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<BusVoltage> voltages;
  std::vector<MachinePQ> machine_pq;

  std::size_t bus_index(int id) const {
    for (std::size_t k = 0; k < buses.size(); ++k)
      if (buses[k].id == id) return k;
    fail("malformed case", "unknown bus " + std::to_string(id));
  }
};

inline constexpr double kSnapshotTolerance = 1e-6;

/// Bus admittance matrix of lines, transformers and fixed shunts (no loads).
/// In the postfault stage, branches flagged out of service are omitted.
inline Eigen::MatrixXcd bus_admittance(const NetworkData& net, Stage stage) {
  const auto nb = static_cast<Eigen::Index>(net.buses.size());
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(nb, nb);
  for (const auto& br : net.branches) {
    if (stage == Stage::postfault && !br.in_service_postfault) continue;
    if (br.r == 0.0 && br.x == 0.0) fail("malformed case", "zero-impedance branch");
    if (!(br.tap > 0.0)) fail("malformed case", "branch tap must be > 0");
    const auto f = static_cast<Eigen::Index>(net.bus_index(br.from));
    const auto t = static_cast<Eigen::Index>(net.bus_index(br.to));
    const cplx ys = 1.0 / cplx(br.r, br.x);
    const cplx ysh(0.0, br.b / 2.0);
    Y(f, f) += (ys + ysh) / (br.tap * br.tap);
    Y(t, t) += ys + ysh;
    Y(f, t) -= ys / br.tap;
    Y(t, f) -= ys / br.tap;
  }
  for (Eigen::Index k = 0; k < nb; ++k) {
    const auto& bus = net.buses[static_cast<std::size_t>(k)];
    Y(k, k) += cplx(bus.Gs, bus.Bs);
  }
  return Y;
}

inline std::vector<cplx> snapshot_voltages(const NetworkData& net) {
  std::vector<cplx> v(net.buses.size(), cplx(0.0, 0.0));
  std::vector<bool> seen(net.buses.size(), false);
  for (const auto& bv : net.voltages) {
    const auto k = net.bus_index(bv.bus);
    v[k] = std::polar(bv.Vm, bv.Va);
    seen[k] = true;
  }
  for (std::size_t k = 0; k < seen.size(); ++k)
    if (!seen[k]) fail("malformed case", "no snapshot voltage for bus " + std::to_string(net.buses[k].id));
  return v;
}

/// Complex power injection each machine delivers at its terminal bus.
inline std::vector<cplx> machine_injections(const NetworkData& net,
                                            const std::vector<MachineParams>& machines) {
  std::vector<cplx> s(machines.size());
  for (std::size_t i = 0; i < machines.size(); ++i) {
    auto it = std::find_if(net.machine_pq.begin(), net.machine_pq.end(),
                           [&](const MachinePQ& pq) { return pq.id == machines[i].id; });
    if (it == net.machine_pq.end()) fail("malformed case", "no snapshot P,Q for machine " + machines[i].id);
    s[i] = cplx(it->P, it->Q);
  }
  return s;
}

/// Largest |dP|, |dQ| between the snapshot and the network equations over all buses.
inline double snapshot_mismatch(const NetworkData& net, const std::vector<MachineParams>& machines) {
  const auto Y = bus_admittance(net, Stage::prefault);
  const auto v = snapshot_voltages(net);
  const auto s_gen = machine_injections(net, machines);
  std::vector<cplx> spec(net.buses.size());
  for (std::size_t k = 0; k < net.buses.size(); ++k) spec[k] = -cplx(net.buses[k].Pd, net.buses[k].Qd);
  for (std::size_t i = 0; i < machines.size(); ++i) spec[net.bus_index(machines[i].bus)] += s_gen[i];
  double worst = 0.0;
  for (std::size_t k = 0; k < net.buses.size(); ++k) {
    cplx current(0.0, 0.0);
    for (std::size_t j = 0; j < net.buses.size(); ++j)
      current += Y(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) * v[j];
    const cplx mis = v[k] * std::conj(current) - spec[k];
    worst = std::max({worst, std::abs(mis.real()), std::abs(mis.imag())});
  }
  return worst;
}

/// E = V + j x'd I with I = conj(S / V) at each machine terminal.
inline std::vector<cplx> internal_emfs(const NetworkData& net, const std::vector<MachineParams>& machines) {
  const auto v = snapshot_voltages(net);
  const auto s = machine_injections(net, machines);
  std::vector<cplx> e(machines.size());
  for (std::size_t i = 0; i < machines.size(); ++i) {
    const cplx vt = v[net.bus_index(machines[i].bus)];
    const cplx current = std::conj(s[i] / vt);
    e[i] = vt + cplx(0.0, machines[i].xd_prime) * current;
  }
  return e;
}

/// Admittance matrix over [internal nodes..., buses...] for one stage.
/// Loads become constant admittances (Pd - jQd)/|V|^2 from the snapshot.
/// In the fault-on stage the faulted bus is grounded, i.e. removed from the
/// bus block.
struct ExtendedNetwork {
  Eigen::MatrixXcd Y;
  std::size_t internal_nodes = 0;
  std::vector<int> bus_ids;  // buses retained after the internal nodes, in order
};

inline ExtendedNetwork extended_admittance(const NetworkData& net, const std::vector<MachineParams>& machines,
                                           Stage stage, int faulted_bus) {
  const auto ybus = bus_admittance(net, stage);
  const auto v = snapshot_voltages(net);
  const std::size_t ng = machines.size();
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < net.buses.size(); ++k)
    if (!(stage == Stage::faulton && net.buses[k].id == faulted_bus)) keep.push_back(k);
  if (stage == Stage::faulton && keep.size() == net.buses.size())
    fail("malformed case", "faulted bus " + std::to_string(faulted_bus) + " not in network");

  const auto dim = static_cast<Eigen::Index>(ng + keep.size());
  ExtendedNetwork out;
  out.internal_nodes = ng;
  out.Y = Eigen::MatrixXcd::Zero(dim, dim);
  std::vector<Eigen::Index> pos(net.buses.size(), -1);
  for (std::size_t r = 0; r < keep.size(); ++r) {
    pos[keep[r]] = static_cast<Eigen::Index>(ng + r);
    out.bus_ids.push_back(net.buses[keep[r]].id);
  }
  for (std::size_t a = 0; a < keep.size(); ++a) {
    for (std::size_t b = 0; b < keep.size(); ++b)
      out.Y(pos[keep[a]], pos[keep[b]]) =
          ybus(static_cast<Eigen::Index>(keep[a]), static_cast<Eigen::Index>(keep[b]));
    const auto& bus = net.buses[keep[a]];
    const double vm2 = std::norm(v[keep[a]]);
    out.Y(pos[keep[a]], pos[keep[a]]) += cplx(bus.Pd, -bus.Qd) / vm2;
  }
  for (std::size_t i = 0; i < ng; ++i) {
    const cplx y = 1.0 / cplx(0.0, machines[i].xd_prime);
    const auto g = static_cast<Eigen::Index>(i);
    out.Y(g, g) += y;
    const auto bk = net.bus_index(machines[i].bus);
    if (pos[bk] < 0) continue;  // terminal bus is the grounded fault point
    out.Y(pos[bk], pos[bk]) += y;
    out.Y(g, pos[bk]) -= y;
    out.Y(pos[bk], g) -= y;
  }
  return out;
}

/// Eliminates every node after the first `keep`: Ykk - Ykb Ybb^-1 Ybk.
inline Eigen::MatrixXcd kron_reduce(const Eigen::MatrixXcd& Y, std::size_t keep) {
  const auto k = static_cast<Eigen::Index>(keep);
  const auto m = Y.rows() - k;
  if (m == 0) return Y;
  const auto ybb = Y.bottomRightCorner(m, m);
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(ybb);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) fail("unreducible network");
  return Y.topLeftCorner(k, k) - Y.topRightCorner(k, m) * lu.solve(Y.bottomLeftCorner(m, k));
}

inline ReducedNetworkStage reduce_stage(const NetworkData& net, const std::vector<MachineParams>& machines,
                                        Stage stage, int faulted_bus) {
  const auto ext = extended_admittance(net, machines, stage, faulted_bus);
  const Eigen::MatrixXcd yr = kron_reduce(ext.Y, ext.internal_nodes);
  ReducedNetworkStage out;
  out.stage = stage;
  out.conductance_G = yr.real();
  out.susceptance_B = yr.imag();
  // Symmetric by construction up to round-off in the LU solve.
  out.conductance_G = 0.5 * (out.conductance_G + out.conductance_G.transpose()).eval();
  out.susceptance_B = 0.5 * (out.susceptance_B + out.susceptance_B.transpose()).eval();
  return out;
}

}  // namespace tsa::network
