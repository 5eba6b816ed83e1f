"""Generate the bundled synthetic 24-bus day under src/psps/data/synth24/.

The fixture is a desk-scale stand-in for a reliability test system: 24
buses, 38 lines, 6 units, 17 loads, hourly horizon. Geography is chosen
so the risk pipeline derives exactly 11 zero-risk lines (14, 23-26, 28,
30-33, 38) from the bundled rasters: those lines run entirely inside a
zero-valued northern strip, every other line crosses painted cells. Line
19 connects two northern buses but threads a positive wedge.

Economics are laid out for branch-and-bound friendliness. Most demand
sits on the safe northern cluster, which carries enough local capacity
to never shed, so shutoff decisions only move small southern pockets and
the choice between local peakers and the cheap southern unit. That keeps
value-of-lost-load terms small at the optimum and the LP relaxation
close to the integer value. Twin circuits get asymmetric ratings so the
tree never splits on interchangeable lines.

The script also calibrates the log-wip sweep grid: it bisects pi_tol
until the day-ahead solve admits 1 through 12 energized nonzero-risk
lines, verifies the qualitative trends the test suite asserts, and
writes the grid into the bundled sweep config. Rerunning is
deterministic; artifacts only change when the parameters here change.
"""

import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from psps.cli import derive_seed  # noqa: E402
from psps.formulation import LOG_WIP, RiskBudget, solve_day_ahead  # noqa: E402
from psps.milp import SolveLimits  # noqa: E402
from psps.network import coarsen_horizon, load_network  # noqa: E402
from psps.risk import (WFPI, WLFP, build_line_risk, load_raster,  # noqa: E402
                       load_reliability_table)
from psps.rt import average_available_generation, evaluate_plan  # noqa: E402
from psps.scenarios import DAY_AHEAD, Scenario, ScenarioSet  # noqa: E402

OUT = ROOT / "src" / "psps" / "data" / "synth24"

BUILD_SEED = 20240917

# raster frame: 30 rows x 36 cols, 0.05 deg cells, south-west corner anchor
XLL, YLL, CELL, NROWS, NCOLS = -117.70, 33.50, 0.05, 30, 36

# cells with center latitude at or above this stay unpainted (zero metric)
SAFE_LAT = 34.475

ZERO_RISK_LINES = {14, 23, 24, 25, 26, 28, 30, 31, 32, 33, 38}

# bus id -> (lat, lon), snapped to cell centers
BUSES = {
    1: (33.675, -117.425),
    2: (33.675, -117.025),
    3: (33.925, -117.475),
    4: (33.925, -117.125),
    5: (33.775, -117.325),
    6: (33.825, -116.775),
    7: (33.675, -116.575),
    8: (33.875, -116.625),
    9: (34.525, -117.425),
    10: (34.225, -116.925),
    11: (34.525, -117.225),
    12: (34.225, -117.125),
    13: (34.275, -116.775),
    14: (34.875, -117.225),
    15: (34.875, -116.875),
    16: (34.875, -117.075),
    17: (34.775, -116.775),
    18: (34.775, -116.575),
    19: (34.275, -116.575),
    20: (34.275, -116.425),
    21: (34.675, -116.675),
    22: (34.675, -116.475),
    23: (34.325, -116.275),
    24: (34.225, -117.325),
}

# line id -> (from_bus, to_bus, flow_max)
LINES = {
    1: (1, 2, 120.0),
    2: (1, 3, 120.0),
    3: (1, 5, 120.0),
    4: (2, 4, 120.0),
    5: (2, 6, 120.0),
    6: (3, 9, 100.0),
    7: (3, 24, 150.0),
    8: (4, 9, 100.0),
    9: (5, 10, 120.0),
    10: (6, 10, 120.0),
    11: (7, 8, 120.0),
    12: (8, 9, 100.0),
    13: (8, 10, 120.0),
    14: (9, 11, 150.0),
    15: (9, 12, 100.0),
    16: (10, 11, 100.0),
    17: (10, 12, 120.0),
    18: (11, 13, 100.0),
    19: (11, 14, 150.0),
    20: (12, 13, 150.0),
    21: (12, 23, 150.0),
    22: (13, 23, 150.0),
    23: (14, 16, 200.0),
    24: (15, 16, 200.0),
    25: (15, 21, 150.0),
    26: (15, 21, 130.0),
    27: (15, 24, 120.0),
    28: (16, 17, 200.0),
    29: (16, 19, 120.0),
    30: (17, 18, 200.0),
    31: (17, 22, 150.0),
    32: (18, 21, 150.0),
    33: (18, 21, 130.0),
    34: (19, 20, 150.0),
    35: (19, 20, 130.0),
    36: (20, 23, 150.0),
    37: (20, 23, 130.0),
    38: (21, 22, 200.0),
}

# generator id -> (bus, p_max, marginal, startup, shutdown)
# 1 and 2 cover the northern cluster, 5 covers the 9/11 pair, 3 is the
# cheap southern unit whose exports displace 2 and 5 once enough import
# paths are energized, 4 is a small local unit in the southwest, 6 is
# northern reserve that should stay off in every sane plan
GENERATORS = {
    1: (16, 320.0, 10.0, 160.0, 30.0),
    2: (17, 200.0, 24.0, 90.0, 20.0),
    3: (23, 380.0, 4.0, 140.0, 30.0),
    4: (1, 140.0, 14.0, 70.0, 15.0),
    5: (9, 120.0, 28.0, 60.0, 12.0),
    6: (15, 150.0, 34.0, 50.0, 10.0),
}

# demand id == bus id for the 17 load buses, value is the daily peak MW;
# the safe northern cluster (14-18, 21, 22) holds most of the load, the
# 9/11 pair is self-sufficient through unit 5, and the southern pockets
# are small enough that shedding them never dominates the objective
LOAD_PEAKS = {
    1: 25.0, 3: 20.0, 5: 15.0, 7: 15.0, 9: 55.0, 10: 25.0, 11: 45.0,
    13: 20.0, 14: 60.0, 15: 70.0, 16: 95.0, 17: 60.0, 18: 70.0,
    19: 20.0, 20: 15.0, 21: 50.0, 22: 45.0,
}

VOLL = 1000.0

# hourly profile as a fraction of peak, evening-peaking
SHAPE = (0.65, 0.62, 0.60, 0.60, 0.62, 0.68, 0.76, 0.84, 0.88, 0.90,
         0.92, 0.93, 0.93, 0.92, 0.91, 0.92, 0.95, 1.00, 0.99, 0.96,
         0.90, 0.82, 0.74, 0.68)

COARSEN = 12       # sweep studies run on the 2-step copy
SWEEP_RT_SAMPLES = 12
SWEEP_SEED = 90210
SWEEP_GAP = 1e-4
SWEEP_NODES = 30000


def cell_center(i, j):
    lat = YLL + (NROWS - 0.5 - i) * CELL
    lon = XLL + (j + 0.5) * CELL
    return lat, lon


def paint_rasters():
    """WFPI and WLFP value grids over the same geography."""
    wfpi = np.zeros((NROWS, NCOLS))
    wlfp = np.zeros((NROWS, NCOLS))
    for i in range(NROWS):
        for j in range(NCOLS):
            lat, lon = cell_center(i, j)
            if lat >= SAFE_LAT:
                continue
            if lon < -117.125:
                wfpi[i, j], wlfp[i, j] = 30.0, 3.0e-4
            elif lon < -116.625:
                wfpi[i, j], wlfp[i, j] = 40.0, 2.0e-4
            else:
                wfpi[i, j], wlfp[i, j] = 50.0, 5.0e-4
    # wedge across the line-19 corridor, rows 4..8 x cols 8..9
    wfpi[4:9, 8:10] = 100.0
    wlfp[4:9, 8:10] = 8.0e-4
    return wfpi, wlfp


def write_raster(path, values):
    lines = [
        f"ncols {NCOLS}",
        f"nrows {NROWS}",
        f"xllcorner {XLL}",
        f"yllcorner {YLL}",
        f"cellsize {CELL}",
        "NODATA_value -9999",
    ]
    for row in values:
        lines.append(" ".join(f"{v:.10g}" for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_tables():
    wfpi_bins = [(0, 25, 0.0), (25, 35, 0.004), (35, 45, 0.006),
                 (45, 80, 0.010), (80, 150, 0.020)]
    wlfp_bins = [(0, 1.0e-4, 0.0), (1.0e-4, 2.5e-4, 0.004),
                 (2.5e-4, 3.5e-4, 0.006), (3.5e-4, 6.0e-4, 0.010),
                 (6.0e-4, 1.0e-3, 0.020)]
    for name, bins in (("wfpi_table.csv", wfpi_bins),
                       ("wlfp_table.csv", wlfp_bins)):
        with open(OUT / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["value_lo", "value_hi", "mean_owip"])
            w.writerows(bins)


def network_doc():
    buses = [{"id": b, "name": f"bus{b}", "latitude": lat, "longitude": lon}
             for b, (lat, lon) in sorted(BUSES.items())]
    lines = []
    for lid, (fb, tb, cap) in sorted(LINES.items()):
        # full thermal loading moves the angle pair by 0.12 rad, so the
        # de-energized flow relaxation stays a few times the rating
        # instead of the enormous constant a stiffer line would give
        lines.append({
            "id": lid, "from_bus": fb, "to_bus": tb,
            "susceptance": cap / 0.12,
            "flow_min": -cap, "flow_max": cap,
            "endpoints": [list(BUSES[fb]), list(BUSES[tb])],
        })
    gens = []
    for gid, (bus, p_max, marg, start, shut) in sorted(GENERATORS.items()):
        gens.append({
            "id": gid, "bus": bus, "p_min": 0.0, "p_max": p_max,
            "ramp_down": -p_max, "ramp_up": p_max,
            "min_up": 2, "min_down": 2,
            "marginal_cost": marg, "startup_cost": start,
            "shutdown_cost": shut, "initially_on": False,
        })
    demands = []
    for bus, peak in sorted(LOAD_PEAKS.items()):
        profile = [round(peak * s, 1) for s in SHAPE]
        demands.append({"id": bus, "bus": bus, "voll": VOLL,
                        "base_profile": profile})
    return {"buses": buses, "lines": lines, "generators": gens,
            "demands": demands, "horizon": 24, "step_hours": 1.0}


def write_history():
    """Ten plausible autumn days for scenario construction demos."""
    rng = np.random.default_rng(BUILD_SEED)
    total = np.array([sum(round(p * s, 1) for p in LOAD_PEAKS.values())
                      for s in SHAPE])
    with open(OUT / "history_demand.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "step", "total_demand"])
        for d in range(10):
            scale = 0.92 + 0.02 * d
            noise = rng.normal(0.0, 0.01, len(SHAPE))
            for t, v in enumerate(total, start=1):
                w.writerow([f"2025-10-{d + 1:02d}", t,
                            round(float(v * scale * (1 + noise[t - 1])), 2)])


def write_realized_demand():
    rng = np.random.default_rng(BUILD_SEED + 1)
    with open(OUT / "realized_demand.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["demand_id", "step", "mw"])
        for bus, peak in sorted(LOAD_PEAKS.items()):
            noise = rng.normal(0.0, 0.015, len(SHAPE))
            for t, s in enumerate(SHAPE, start=1):
                w.writerow([bus, t,
                            round(float(peak * s * (1 + noise[t - 1])), 2)])


def write_fire_records():
    """Two regional clouds of large fires for the clustering demo."""
    rng = np.random.default_rng(BUILD_SEED + 2)
    rows = []
    for _ in range(120):
        lat = float(rng.normal(33.9, 0.18))
        lon = float(rng.normal(-117.2, 0.22))
        month = int(rng.choice(range(1, 13),
                               p=np.array([2, 2, 3, 4, 6, 10, 14, 16, 15,
                                           12, 9, 7], dtype=float) / 100))
        day = int(rng.integers(1, 28))
        year = int(rng.integers(2015, 2025))
        acres = float(np.round(rng.lognormal(7.0, 0.8), 1))
        rows.append((f"{year:04d}-{month:02d}-{day:02d}",
                     round(lat, 4), round(lon, 4), acres))
    for _ in range(80):
        lat = float(rng.normal(34.3, 0.12))
        lon = float(rng.normal(-116.4, 0.20))
        month = int(rng.choice(range(1, 13),
                               p=np.array([1, 1, 2, 3, 5, 9, 15, 18, 17,
                                           13, 9, 7], dtype=float) / 100))
        day = int(rng.integers(1, 28))
        year = int(rng.integers(2015, 2025))
        acres = float(np.round(rng.lognormal(6.8, 0.9), 1))
        rows.append((f"{year:04d}-{month:02d}-{day:02d}",
                     round(lat, 4), round(lon, 4), acres))
    rows.sort()
    with open(OUT / "fire_records.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "latitude", "longitude", "acres"])
        w.writerows(rows)


def base_scenarios(net):
    demand = {d.id: tuple(d.base_profile) for d in net.demands}
    total = tuple(sum(d.base_profile[t] for d in net.demands)
                  for t in range(net.horizon))
    return ScenarioSet(scenarios=(Scenario(
        id=0, probability=1.0, demand=demand, line_risk={},
        total_demand=total),), kind=DAY_AHEAD)


def nzr_count(plan, line_risk):
    risky = {lr.line_id for lr in line_risk if lr.pi > 0.0}
    return sum(1 for lid, pattern in plan.line_on.items()
               if lid in risky and all(pattern))


def solve_point(net, scns, line_risk, pi_tol):
    budget = RiskBudget(mode=LOG_WIP, pi_tol=pi_tol)
    limits = SolveLimits(gap=SWEEP_GAP, nodes=SWEEP_NODES)
    t0 = time.time()
    plan, dispatch, costs = solve_day_ahead(net, scns, budget,
                                            line_risk=line_risk,
                                            limits=limits)
    elapsed = time.time() - t0
    served = 0.0
    for did, fractions in dispatch.served[0].items():
        curve = scns.scenarios[0].demand[did]
        served += sum(c * x for c, x in zip(curve, fractions))
    served *= net.step_hours
    return {
        "plan": plan,
        "count": nzr_count(plan, line_risk),
        "served": served,
        "aag": average_available_generation(net, plan),
        "da_cost": costs.total,
        "seconds": elapsed,
    }


def calibrate_grid(net, scns, line_risk):
    """Bisect pi_tol in log space until each target count 1..12 appears."""
    log_all_dark = sum(lr.log_pi for lr in line_risk if lr.pi > 0.0)
    lo0, hi0 = log_all_dark, 0.0
    cache = {}

    def count_at(log_tol):
        if log_tol not in cache:
            cache[log_tol] = solve_point(net, scns, line_risk,
                                         math.exp(log_tol))
            point = cache[log_tol]
            print(f"  pi_tol=e^{log_tol:.4f} -> nzr={point['count']} "
                  f"served={point['served']:.0f} aag={point['aag']:.0f} "
                  f"da={point['da_cost']:.0f} [{point['seconds']:.1f}s]")
        return cache[log_tol]["count"]

    grid = {}
    for target in range(1, 13):
        lo, hi = lo0, hi0
        found = None
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            c = count_at(mid)
            if c == target:
                found = mid
                break
            if c < target:
                lo = mid
            else:
                hi = mid
        if found is None:
            raise SystemExit(f"calibration missed target count {target}; "
                             f"bracket [{lo:.4f}, {hi:.4f}]")
        grid[target] = found
    return grid, cache


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    doc = network_doc()
    (OUT / "synth24.json").write_text(json.dumps(doc, indent=1) + "\n")
    wfpi, wlfp = paint_rasters()
    write_raster(OUT / "wfpi.asc", wfpi)
    write_raster(OUT / "wlfp.asc", wlfp)
    write_tables()
    write_history()
    write_realized_demand()
    write_fire_records()

    net24 = load_network(OUT / "synth24.json")
    raster = load_raster(OUT / "wfpi.asc", WFPI)
    table = load_reliability_table(OUT / "wfpi_table.csv", WFPI)
    line_risk = build_line_risk(net24, raster, table)
    zero = {lr.line_id for lr in line_risk if lr.pi == 0.0}
    if zero != ZERO_RISK_LINES:
        raise SystemExit(f"zero-risk set mismatch:\n  got  {sorted(zero)}\n"
                         f"  want {sorted(ZERO_RISK_LINES)}")
    print(f"zero-risk lines emerge correctly: {sorted(zero)}")
    for lr in sorted(line_risk, key=lambda r: r.pi):
        if lr.pi > 0.0:
            print(f"  line {lr.line_id:2d}: pi={lr.pi:.4f} "
                  f"cells={len(lr.cells)}")

    wl_risk = build_line_risk(net24, load_raster(OUT / "wlfp.asc", WLFP),
                              load_reliability_table(OUT / "wlfp_table.csv",
                                                     WLFP))
    wl_zero = {lr.line_id for lr in wl_risk if lr.pi == 0.0}
    if wl_zero != ZERO_RISK_LINES:
        raise SystemExit(f"wlfp zero-risk set mismatch: {sorted(wl_zero)}")

    net = coarsen_horizon(net24, COARSEN)
    coarse_risk = build_line_risk(net, raster, table)
    scns = base_scenarios(net)
    print(f"calibrating sweep on H={net.horizon} copy")
    grid, cache = calibrate_grid(net, scns, coarse_risk)

    pi_tols = [math.exp(grid[k]) for k in range(1, 13)]
    config = {
        "network": "synth24.json",
        "raster": {"wfpi": "wfpi.asc", "wlfp": "wlfp.asc"},
        "reliability_table": {"wfpi": "wfpi_table.csv",
                              "wlfp": "wlfp_table.csv"},
        "metric": "wfpi",
        "coarsen": COARSEN,
        "seed": SWEEP_SEED,
        "solver": {"gap": SWEEP_GAP, "nodes": SWEEP_NODES},
        "sweep": {"pi_tol_grid": pi_tols},
        "rt": {"samples": SWEEP_RT_SAMPLES},
    }
    (OUT / "sweep_wfpi.json").write_text(
        json.dumps(config, indent=1) + "\n")

    # trend preview on the calibrated points, with the same recourse
    # sampling the command line sweep will use
    rows = []
    for i, k in enumerate(range(1, 13)):
        point = cache[grid[k]]
        rt = evaluate_plan(net, point["plan"], coarse_risk,
                           n=SWEEP_RT_SAMPLES,
                           seed=derive_seed(SWEEP_SEED, "rt", i),
                           limits=SolveLimits(gap=SWEEP_GAP,
                                              nodes=SWEEP_NODES))
        rows.append((k, point["served"], point["aag"], point["da_cost"],
                     rt.expected_cost))
    print("count  served     aag    da_cost    rt_cost")
    for k, served, aag, da, rt_cost in rows:
        print(f"{k:5d} {served:8.1f} {aag:7.1f} {da:10.1f} {rt_cost:10.1f}")
    served_seq = [r[1] for r in rows]
    # gap-limited incumbents can wobble served energy by a sliver of a
    # megawatt-hour without changing which pockets are picked up
    if any(b < a - 1.0 for a, b in zip(served_seq, served_seq[1:])):
        raise SystemExit("served energy is not nondecreasing over the grid")
    aag7, aag12 = rows[6][2], rows[11][2]
    if not aag12 < aag7:
        raise SystemExit(f"AAG trend violated: aag(12)={aag12} "
                         f"aag(7)={aag7}")
    rt_min = min(range(12), key=lambda i: rows[i][4])
    aag_max = max(range(12), key=lambda i: rows[i][2])
    if rt_min == aag_max:
        raise SystemExit(f"cheapest recourse point {rt_min + 1} collides "
                         f"with the AAG peak")
    print("trends hold: served nondecreasing, aag(12) < aag(7), "
          f"cheapest rt at {rt_min + 1} lines vs aag peak at "
          f"{aag_max + 1}")
    total = sum(p["seconds"] for p in cache.values())
    print(f"total solve time {total:.1f}s over {len(cache)} points")


if __name__ == "__main__":
    main()
