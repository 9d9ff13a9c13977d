#!/usr/bin/env python3
"""Regenerate the shipped network-mode case files under data/cases/.

Network data: WSCC 3-machine 9-bus (Anderson & Fouad) and the New England
10-machine 39-bus system (MATPOWER case39, dynamic data from Pai). The
power-flow snapshot embedded in each file is solved here with pypower so
that the C++ side only has to verify it.

    python3 scripts/make_cases.py            # writes data/cases/*.json
"""
import json
import math
import pathlib

import numpy as np
from pypower.api import ppoption, runpf
from pypower.case39 import case39

OMEGA_SYN = 2.0 * math.pi * 60.0
OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "cases"


def wscc9():
    bus = np.array([
        # id type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin
        [1, 3, 0, 0, 0, 0, 1, 1.04, 0, 345, 1, 1.1, 0.9],
        [2, 2, 0, 0, 0, 0, 1, 1.025, 0, 345, 1, 1.1, 0.9],
        [3, 2, 0, 0, 0, 0, 1, 1.025, 0, 345, 1, 1.1, 0.9],
        [4, 1, 0, 0, 0, 0, 1, 1, 0, 345, 1, 1.1, 0.9],
        [5, 1, 125, 50, 0, 0, 1, 1, 0, 345, 1, 1.1, 0.9],
        [6, 1, 90, 30, 0, 0, 1, 1, 0, 345, 1, 1.1, 0.9],
        [7, 1, 0, 0, 0, 0, 1, 1, 0, 345, 1, 1.1, 0.9],
        [8, 1, 100, 35, 0, 0, 1, 1, 0, 345, 1, 1.1, 0.9],
        [9, 1, 0, 0, 0, 0, 1, 1, 0, 345, 1, 1.1, 0.9],
    ], dtype=float)
    gen = np.zeros((3, 21))
    gen[:, 0] = [1, 2, 3]
    gen[:, 1] = [71.6, 163, 85]
    gen[:, 3] = 9999
    gen[:, 4] = -9999
    gen[:, 5] = [1.04, 1.025, 1.025]
    gen[:, 6] = 100
    gen[:, 7] = 1
    gen[:, 8] = 9999
    br = [
        (1, 4, 0.0, 0.0576, 0.0),
        (2, 7, 0.0, 0.0625, 0.0),
        (3, 9, 0.0, 0.0586, 0.0),
        (4, 5, 0.010, 0.085, 0.176),
        (4, 6, 0.017, 0.092, 0.158),
        (5, 7, 0.032, 0.161, 0.306),
        (6, 9, 0.039, 0.170, 0.358),
        (7, 8, 0.0085, 0.072, 0.149),
        (8, 9, 0.0119, 0.1008, 0.209),
    ]
    branch = np.zeros((len(br), 13))
    for k, (f, t, r, x, b) in enumerate(br):
        branch[k, :5] = [f, t, r, x, b]
        branch[k, 10] = 1
        branch[k, 11] = -360
        branch[k, 12] = 360
    ppc = {"version": "2", "baseMVA": 100.0, "bus": bus, "gen": gen, "branch": branch}
    machines = [
        {"id": "1", "H": 23.64, "xd_prime": 0.0608, "bus": 1},
        {"id": "2", "H": 6.40, "xd_prime": 0.1198, "bus": 2},
        {"id": "3", "H": 3.01, "xd_prime": 0.1813, "bus": 3},
    ]
    return "wscc9", ppc, machines


def ne39():
    ppc = case39()
    # H (s) and x'd (p.u.) on the 100 MVA system base.
    dyn = {
        39: (500.0, 0.006), 31: (30.3, 0.0697), 32: (35.8, 0.0531),
        33: (28.6, 0.0436), 34: (26.0, 0.132), 35: (34.8, 0.05),
        36: (26.4, 0.049), 37: (24.3, 0.057), 38: (34.5, 0.057),
        30: (42.0, 0.031),
    }
    machines = []
    for row in ppc["gen"]:
        b = int(row[0])
        h, xd = dyn[b]
        machines.append({"id": f"G{b}", "H": h, "xd_prime": xd, "bus": b})
    return "ne39", ppc, machines


def solve(ppc):
    opt = ppoption(VERBOSE=0, OUT_ALL=0, PF_TOL=1e-13, PF_MAX_IT=50)
    res, ok = runpf(ppc, opt)
    assert ok, "power flow did not converge"
    return res


def network_block(res, machines, trip):
    base = res["baseMVA"]
    buses = []
    for row in res["bus"]:
        buses.append({
            "id": int(row[0]),
            "Pd": row[2] / base, "Qd": row[3] / base,
            "Gs": row[4] / base, "Bs": row[5] / base,
        })
    branches = []
    for row in res["branch"]:
        f, t = int(row[0]), int(row[1])
        tripped = trip is not None and {f, t} == set(trip)
        branches.append({
            "from": f, "to": t, "r": row[2], "x": row[3], "b": row[4],
            "tap": row[8] if row[8] != 0 else 1.0,
            "status_postfault": 0 if tripped else 1,
        })
    if trip is not None:
        assert any(b["status_postfault"] == 0 for b in branches), trip
    volts = [{"bus": int(r[0]), "Vm": r[7], "Va": math.radians(r[8])} for r in res["bus"]]
    pq = []
    for m, g in zip(machines, res["gen"]):
        assert int(g[0]) == m["bus"]
        pq.append({"id": m["id"], "P": g[1] / base, "Q": g[2] / base})
    return {"buses": buses, "branches": branches,
            "snapshot": {"bus_voltages": volts, "machine_pq": pq}}


# (file name, system, faulted bus, branch tripped at clearing, clear time s, t_end s)
SCENARIOS = [
    ("wscc9_bus7_stable", "wscc9", 7, (5, 7), 0.05, 5.0),
    ("wscc9_bus7_unstable", "wscc9", 7, (5, 7), 0.17, 2.0),
    ("wscc9_bus7_multiswing", "wscc9", 7, (5, 7), 0.19, 2.5),
    ("wscc9_bus9_unstable", "wscc9", 9, (6, 9), 0.22, 2.0),
    ("ne39_bus16_unstable", "ne39", 16, (15, 16), 0.25, 2.0),
    ("ne39_bus16_line16-21_unstable", "ne39", 16, (16, 21), 0.20, 2.0),
    ("ne39_bus24_unstable", "ne39", 24, (23, 24), 0.22, 2.0),
]


def main():
    systems = {}
    for make in (wscc9, ne39):
        name, ppc, machines = make()
        systems[name] = (solve(ppc), machines)
    OUT.mkdir(parents=True, exist_ok=True)
    for fname, sysname, fbus, trip, tc, t_end in SCENARIOS:
        res, machines = systems[sysname]
        doc = {
            "meta": {"name": fname, "base_mva": res["baseMVA"], "omega_syn": OMEGA_SYN},
            "mode": "network",
            "machines": [dict(m, D=0.0) for m in machines],
            "network": network_block(res, machines, trip),
            "fault": {"bus": fbus, "clear_time": tc},
            "simulation": {"dt": 0.001, "t_end": t_end},
        }
        (OUT / f"{fname}.json").write_text(json.dumps(doc, indent=1) + "\n")
        print("wrote", fname)


if __name__ == "__main__":
    main()
