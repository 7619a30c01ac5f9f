#!/usr/bin/env python3
"""Convert MATPOWER-style case tables to the gridlmp .case format.

The converter understands the standard MATPOWER column layout (bus, gen,
branch, gencost matrices) and writes the line-oriented .case schema
documented in docs/case-format.md.  Two bundled tables reproduce the
IEEE 14-bus and IEEE 118-bus test systems; pass --list to see them.

Usage:
    python3 scripts/import_matpower.py ieee14  > data/ieee14.case
    python3 scripts/import_matpower.py ieee118 > data/ieee118.case

MATPOWER conventions handled here:
  - bus type 3 = slack, 2 = pv, 1 = pq
  - Gs/Bs are MW/MVAr at V=1 p.u.; divided by baseMVA to get p.u. shunts
  - branch ratio 0 means no transformer (tap = 1.0)
  - gencost rows must be polynomial (model 2) with n = 3 (quadratic)
"""

import argparse
import sys

from case_tables import CASES  # bundled IEEE tables live next to this file


def fmt(x):
    return repr(float(x))


def convert(case, out):
    base = case["baseMVA"]
    bus_type = {1: "pq", 2: "pv", 3: "slack"}
    out.write(f"# {case['name']}\n")
    out.write("BASE\n")
    out.write(f"{fmt(base)}\n")
    out.write("BUS\n")
    out.write("# id, type, p_load_mw, q_load_mvar, v_min, v_max, g_shunt, b_shunt\n")
    for b in case["bus"]:
        i, t, pd, qd, gs, bs, vmax, vmin = b
        out.write(
            f"{int(i)}, {bus_type[int(t)]}, {fmt(pd)}, {fmt(qd)}, "
            f"{fmt(vmin)}, {fmt(vmax)}, {fmt(gs / base)}, {fmt(bs / base)}\n"
        )
    out.write("BRANCH\n")
    out.write("# from, to, r, x, b_charging, tap\n")
    for br in case["branch"]:
        f, t, r, x, b, ratio = br
        tap = ratio if ratio != 0 else 1.0
        out.write(f"{int(f)}, {int(t)}, {fmt(r)}, {fmt(x)}, {fmt(b)}, {fmt(tap)}\n")
    out.write("GEN\n")
    out.write("# bus, p_min_mw, p_max_mw, q_min_mvar, q_max_mvar, cost_a, cost_b, cost_c\n")
    for g, c in zip(case["gen"], case["gencost"]):
        bus, pmin, pmax, qmin, qmax = g
        a, bb, cc = c
        out.write(
            f"{int(bus)}, {fmt(pmin)}, {fmt(pmax)}, {fmt(qmin)}, {fmt(qmax)}, "
            f"{fmt(a)}, {fmt(bb)}, {fmt(cc)}\n"
        )


def sanity(case):
    ids = [int(b[0]) for b in case["bus"]]
    assert len(ids) == len(set(ids)), "duplicate bus ids"
    idset = set(ids)
    slacks = [b for b in case["bus"] if int(b[1]) == 3]
    assert len(slacks) == 1, f"expected one slack, got {len(slacks)}"
    # connectivity via union-find
    parent = {i: i for i in ids}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for br in case["branch"]:
        f, t = int(br[0]), int(br[1])
        assert f in idset and t in idset, f"branch {f}-{t} references unknown bus"
        assert br[2] ** 2 + br[3] ** 2 > 0, f"branch {f}-{t} has zero impedance"
        parent[find(f)] = find(t)
    roots = {find(i) for i in ids}
    assert len(roots) == 1, f"graph not connected: {len(roots)} components"
    for g in case["gen"]:
        assert int(g[0]) in idset, f"generator at unknown bus {g[0]}"
        assert g[1] <= g[2] and g[3] <= g[4], "inverted generator bounds"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("case", nargs="?", help="bundled case name")
    ap.add_argument("--list", action="store_true", help="list bundled cases")
    args = ap.parse_args()
    if args.list or not args.case:
        for name, c in CASES.items():
            print(f"{name}: {len(c['bus'])} buses, {len(c['branch'])} branches, "
                  f"{len(c['gen'])} generators")
        return
    case = CASES[args.case]
    sanity(case)
    convert(case, sys.stdout)


if __name__ == "__main__":
    main()
