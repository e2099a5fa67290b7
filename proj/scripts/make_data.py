#!/usr/bin/env python3
"""One-off generator for the bundled data files (feeder, prices, history).

The feeder is a balanced single-phase per-unit equivalent in the repo's own
format: inventory (branch/load/capacitor/switch counts), capacitor placement
and PV placement follow the public IEEE 123-bus test feeder; per-phase loads
are aggregated to balanced totals and impedances are per-unit equivalents on
a 4.16 kV / 5 MVA base.
"""
import math
import random

rng = random.Random(123123)

ROOT = 150

# --- topology ----------------------------------------------------------
# Compact hub layout: substation 150 -> 149 (switch) -> bus 1, then area
# hubs hanging off short trunk sections. The balanced equivalent keeps the
# feeder's inventory but collapses its geographic sprawl, so the longest
# electrical path stays under ten segments.
closed_switches = {(150, 149), (13, 152), (18, 135), (60, 160), (97, 197), (61, 610)}
open_switches = [(54, 94), (151, 300), (96, 450), (250, 47), (65, 610)]

# parent -> children over closed edges (switch edges included).
# Depths stay under nine segments: bus 1 is the master hub, area hubs sit
# at depth 3-5, laterals below a hub run at most two segments.
tree = {
    150: [149],
    149: [1],
    # master hub: residential stubs plus the area trunks
    1: [2, 4, 7, 8, 13, 57, 95],
    2: [3],
    4: [5, 6],
    7: [9],
    8: [10, 11, 12],
    # 13: 10s/20s/30s/40s region, with the 152 and 135 sectionalizers
    13: [14, 18, 21, 152, 35],
    14: [15, 16, 17],
    18: [19, 20, 135, 23],
    135: [33, 36],
    33: [28, 31, 32, 34],
    31: [30],
    36: [37, 38],
    21: [22, 25],
    23: [24, 47],
    47: [48, 49],
    49: [50, 51],
    51: [151],
    25: [26, 250, 29],
    26: [27],
    35: [39, 40, 42, 44],
    39: [41],
    42: [43],
    44: [45, 46],
    # 152: sectionalized 50s area
    152: [52],
    52: [53, 54, 55],
    53: [56],
    54: [58, 59],
    # 57: 60s area with the 160 sectionalizer and the 610 switch island
    57: [60, 61],
    60: [62, 160, 68, 70],
    62: [63],
    68: [69],
    70: [71],
    61: [610, 64, 66],
    64: [65],
    160: [67],
    67: [72, 76, 86, 89],
    72: [73, 78, 79],
    73: [74, 75],
    76: [77, 80, 82],
    80: [81],
    82: [83, 84, 85],
    86: [87],
    87: [88, 90, 91],
    89: [92, 93, 97],
    92: [94],
    93: [96],
    97: [197],
    # 95: 95-114 region
    95: [98, 99, 105, 108],
    98: [100],
    99: [101, 102, 103],
    101: [104],
    105: [106, 107],
    108: [109, 110, 111],
    109: [112],
    111: [300],
    110: [113, 114],
    113: [450],
}
edges = []
for parent, kids in tree.items():
    for kid in kids:
        edges.append((parent, kid, (parent, kid) in closed_switches))

# open ties (both endpoints already in the tree)
tree_buses = {150}
for a, b, _s in edges:
    tree_buses.add(a)
    tree_buses.add(b)
missing = sorted(set(range(1, 115)) - tree_buses)
# attach any unplaced buses as leaves spread over mid-depth hubs
hubs = [8, 14, 35, 52, 57, 67, 76, 86, 95, 105, 13, 21, 36, 44, 49]
for i, b in enumerate(missing):
    parent = hubs[i % len(hubs)]
    edges.append((parent, b, False))
    tree_buses.add(b)

# open ties (both endpoints must already exist in the tree)
tree_buses = {ROOT}
for a, b, _s in edges:
    tree_buses.add(a)
    tree_buses.add(b)
for a, b in open_switches:
    assert a in tree_buses and b in tree_buses, (a, b)
    edges.append((a, b, True))

# depth check (closed edges only)
import collections
_adj = collections.defaultdict(list)
_open = set(open_switches)
for a, b, _s in edges:
    if (a, b) in _open:
        continue
    _adj[a].append(b)
    _adj[b].append(a)
_depth = {150: 0}
_q = [150]
while _q:
    _i = _q.pop(0)
    for _j in _adj[_i]:
        if _j not in _depth:
            _depth[_j] = _depth[_i] + 1
            _q.append(_j)
max_depth = max(_depth.values())
print(f"max depth = {max_depth}")
assert max_depth <= 9, max_depth

# --- sanity: counts ----------------------------------------------------
n_basic = sum(1 for e in edges if not e[2])
n_switch = sum(1 for e in edges if e[2])
closed_edges = [e for e in edges if not e[2]] + \
               [e for e in edges if e[2] and (e[0], e[1]) not in [tuple(t) for t in open_switches]]
print(f"buses={len(tree_buses)} edges={len(edges)} basic={n_basic} switches={n_switch}")
assert n_switch == 11, n_switch
assert len(closed_edges) == len(tree_buses) - 1, (len(closed_edges), len(tree_buses))

# need exactly 118 basic branches
assert n_basic == 118, n_basic

# --- loads (balanced aggregates, IEEE-style magnitudes) ----------------
# 85 load buses; the real feeder's spot loads are 20-75 kW per phase.
no_load = {ROOT, 149, 152, 160, 135, 197, 610, 151, 300, 450, 250, 94,
           13, 18, 54, 57, 61, 67, 72, 76, 86, 89, 95, 105, 108, 110,
           1, 7, 8, 21, 23, 25, 26, 29, 30, 35, 40, 42, 44, 46}
load_buses = sorted(b for b in tree_buses if b not in no_load)
# trim/extend to exactly 85
while len(load_buses) > 85:
    load_buses.pop(rng.randrange(len(load_buses)))
assert len(load_buses) >= 85, len(load_buses)

kw_choices = [20, 20, 35, 40, 40, 40, 60, 75]
loads = {}
for b in load_buses:
    kw = rng.choice(kw_choices)
    kvar = int(round(kw * rng.choice([0.5, 0.5, 0.5, 0.45, 0.55])))
    loads[b] = (float(kw), float(kvar))
total_p = sum(p for p, _ in loads.values())
total_q = sum(q for _, q in loads.values())
print(f"loads={len(loads)} total_p={total_p} kW total_q={total_q} kvar")

caps = {83: 200.0, 88: 50.0, 90: 50.0, 92: 50.0}
pv_buses = [7, 23, 29, 35, 47, 49, 65, 76, 83, 99]
pv_cap = {b: 80.0 for b in pv_buses}

# --- impedances --------------------------------------------------------
# Z_base = 4.16^2 / 5 = 3.4611 ohm. The balanced equivalent folds the
# feeder's voltage regulation (substation LTC + line regulators, not
# modeled as devices) into stiff effective impedances: trunk ~0.001 pu r
# per segment, laterals ~0.002-0.004 pu r.
spine_pairs = {(150, 149), (149, 1), (1, 13), (1, 57), (1, 95), (1, 8), (13, 152), (152, 52), (57, 60), (57, 61), (60, 160), (160, 67), (13, 18), (13, 35)}
branch_lines = []
bus_set = sorted(tree_buses)

def imp(a, b, is_switch):
    if is_switch:
        return 0.001, 0.002, 2.0
    if (a, b) in spine_pairs:
        r = rng.uniform(0.0008, 0.0014)
        return round(r, 6), round(r * rng.uniform(1.8, 2.2), 6), 2.0
    r = rng.uniform(0.0018, 0.0042)
    return round(r, 6), round(r * rng.uniform(0.6, 1.1), 6), 1.2

open_set = {tuple(t) for t in open_switches}
for a, b, is_switch in edges:
    r, x, lmax = imp(a, b, is_switch)
    line = f"branch {a} {b} r={r:g} x={x:g} lmax={lmax:g}"
    if is_switch:
        line += " switch " + ("open" if (a, b) in open_set else "closed")
    branch_lines.append(line)

bus_lines = []
for b in bus_set:
    p, q = loads.get(b, (0.0, 0.0))
    line = f"bus {b}"
    if b == ROOT:
        line += " root"
    line += f" p={p:g} q={q:g} vmin=0.95 vmax=1.05"
    if b in caps:
        line += f" cap={caps[b]:g}"
    if b in pv_cap:
        line += f" pv={pv_cap[b]:g}"
    bus_lines.append(line)

header = """# IEEE 123-bus test feeder, balanced single-phase per-unit equivalent.
# Derived from the public IEEE distribution test feeder: inventory
# (118 basic branches, 85 loads, 4 capacitors, 11 switches: 6 closed,
# 5 open), capacitor and PV placements match the published system;
# per-phase spot loads are aggregated to balanced totals and line
# impedances are positive-sequence per-unit equivalents.
# Base: 5 MVA, 4.16 kV (Z_base = 3.4611 ohm).
base_mva = 5.0
base_kv = 4.16
"""

with open("data/ieee123.feeder", "w") as f:
    f.write(header)
    f.write("\n".join(bus_lines) + "\n")
    f.write("\n".join(branch_lines) + "\n")
print("wrote data/ieee123.feeder")

# --- prices + demand CSV ------------------------------------------------
# Demand shape: overnight trough, midday shoulder, evening peak. Totals are
# sized so the feeder stays comfortably inside its voltage band.
shape = [0.58, 0.55, 0.54, 0.54, 0.56, 0.60, 0.66, 0.72, 0.74, 0.75, 0.76,
         0.77, 0.76, 0.75, 0.74, 0.74, 0.78, 0.86, 0.95, 1.00, 0.97, 0.88,
         0.74, 0.63]
pv_shape = [0, 0, 0, 0, 0, 0.02, 0.10, 0.25, 0.42, 0.58, 0.70, 0.78, 0.80,
            0.76, 0.66, 0.52, 0.35, 0.18, 0.05, 0.01, 0, 0, 0, 0]
peak_kw = 0.72 * total_p
pv_total = sum(pv_cap.values())

c_da = [0.082, 0.078, 0.076, 0.075, 0.077, 0.083, 0.094, 0.105, 0.108, 0.107,
        0.105, 0.104, 0.102, 0.101, 0.100, 0.102, 0.110, 0.124, 0.138, 0.142,
        0.133, 0.118, 0.101, 0.089]
rows = ["hour,c_da,c_rt,c_pv,c_s,g_dl,g_pv_forecast"]
for t in range(24):
    da = c_da[t]
    rt = round(da * 1.6 + 0.012, 6)
    pvp = 0.045
    cs = round(da * 0.25, 6)
    g_dl = round(peak_kw * shape[t], 3)
    g_pv = round(pv_total * pv_shape[t], 3)
    rows.append(f"{t},{da:g},{rt:g},{pvp:g},{cs:g},{g_dl:g},{g_pv:g}")
with open("data/prices_24h.csv", "w") as f:
    f.write("\n".join(rows) + "\n")
print("wrote data/prices_24h.csv  peak", peak_kw)

# --- historical forecast errors (clearly bimodal mixture) ---------------
hist = ["timestamp,forecast,actual"]
n_days = 90
for d in range(n_days):
    for h in range(24):
        fc = 1500.0 + 900.0 * shape[h]
        if rng.random() < 0.70:
            e = rng.gauss(0.02, 0.025)
        else:
            e = rng.gauss(-0.06, 0.03)
        actual = fc * (1.0 + e)
        ts = f"2024-{3 + d // 30:02d}-{d % 30 + 1:02d}T{h:02d}:00"
        hist.append(f"{ts},{fc:.3f},{actual:.3f}")
with open("data/history_errors.csv", "w") as f:
    f.write("\n".join(hist) + "\n")
print("wrote data/history_errors.csv rows", len(hist) - 1)
