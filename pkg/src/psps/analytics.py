"""Cost-distribution and risk-metric analytics.

Holds the CVaR primitives shared by the day-ahead objective and the value
of stochastic modeling study, plus the wildfire metric comparison tools
(bus-level MAE, fire clustering, observed ignition probabilities).
"""

from __future__ import annotations

import csv
import datetime
import math
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, DegenerateCluster, DimensionMismatch,
                     ParseError, ZeroArea)

KM_PER_DEG = 111.32
DAYS_IN_MONTH = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)
LARGE_FIRE_ACRES = 500.0


def cvar(values, probabilities, epsilon):
    """Conditional value at risk of a discrete cost distribution.

    Mean of the worst (1 - epsilon) probability mass, splitting the atom
    that straddles the threshold. epsilon = 0 reduces to the plain mean.
    """
    vals = np.asarray(values, dtype=float)
    probs = np.asarray(probabilities, dtype=float)
    if vals.shape != probs.shape:
        raise DimensionMismatch(
            f"{vals.size} values against {probs.size} probabilities")
    if vals.size == 0:
        raise DimensionMismatch("empty distribution")
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon {epsilon} outside [0, 1)")
    total = probs.sum()
    if abs(total - 1.0) > 1e-9 or np.any(probs < 0.0):
        raise ValueError("probabilities must be nonnegative and sum to 1")
    tail = 1.0 - epsilon
    order = np.argsort(-vals, kind="stable")
    acc = 0.0
    remaining = tail
    for i in order:
        take = min(remaining, probs[i])
        acc += take * vals[i]
        remaining -= take
        if remaining <= 1e-15:
            break
    return acc / tail


def cvar_lp(values, probabilities, epsilon):
    """CVaR via its linear-programming form, for cross-checking.

    min over nu of nu + (1/(1-epsilon)) * sum_w pi_w * max(0, v_w - nu).
    The optimum is attained with nu at one of the cost atoms, so the
    search scans them directly.
    """
    vals = np.asarray(values, dtype=float)
    probs = np.asarray(probabilities, dtype=float)
    if vals.shape != probs.shape or vals.size == 0:
        raise DimensionMismatch("values and probabilities mismatch")
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon {epsilon} outside [0, 1)")
    best = math.inf
    for nu in vals:
        obj = nu + float(probs @ np.maximum(vals - nu, 0.0)) / (1.0 - epsilon)
        best = min(best, obj)
    return best


@dataclass(frozen=True)
class MeanRiskValue:
    mean: float
    cvar: float
    combined: float    # (1 - beta) * mean + beta * cvar
    beta: float
    epsilon: float


def mean_risk(values, probabilities, beta, epsilon):
    """Blend a cost distribution's mean with its CVaR tail."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta {beta} outside [0, 1]")
    probs = np.asarray(probabilities, dtype=float)
    vals = np.asarray(values, dtype=float)
    mean = float(probs @ vals)
    tail = cvar(vals, probs, epsilon)
    return MeanRiskValue(mean=mean, cvar=tail,
                         combined=(1.0 - beta) * mean + beta * tail,
                         beta=beta, epsilon=epsilon)


# -- value of the stochastic solution --------------------------------------------


@dataclass(frozen=True)
class VssReport:
    ev: float      # deterministic optimum on the expected scenario
    mrws: float    # wait and see: clairvoyant per-scenario optima blended
    mrrp: float    # recourse problem: the stochastic mean-CVaR optimum
    mrev: float    # expectation of the EV plan under every scenario
    mrvpi: float   # mrrp - mrws
    mrvss: float   # mrev - mrrp
    beta: float
    epsilon: float
    per_scenario_ws: tuple
    per_scenario_ev: tuple


def compute_vss_vpi(net, scenarios, budget, cvar_config=None, *,
                    line_risk=None, theta_bound=0.6, limits=None):
    """Value of perfect information and of stochastic modeling.

    Solves the deterministic expected-scenario problem, the clairvoyant
    per-scenario problems, the full stochastic problem, and the recourse
    evaluation of the deterministic plan, then assembles the standard
    mean-risk comparison. Slack-band budgets are rejected because their
    penalty term would price the stochastic and recourse stages
    differently and break the ordering guarantees.
    """
    from .formulation import (WFPI_SLACK, CvarConfig, solve_day_ahead)
    from .scenarios import Scenario, ScenarioSet, expected_scenario

    scns = scenarios.scenarios
    if len(scns) < 2:
        raise ConfigError("value metrics need at least 2 scenarios")
    if budget is not None and budget.mode == WFPI_SLACK:
        raise ConfigError("slack-band budgets are not comparable across "
                          "the stochastic and recourse stages")
    cfg = cvar_config if cvar_config is not None else CvarConfig(beta=0.0)
    beta, eps = cfg.beta, cfg.epsilon
    probs = [s.probability for s in scns]

    def _single(scn):
        return ScenarioSet(scenarios=(
            Scenario(id=scn.id, probability=1.0, demand=scn.demand,
                     line_risk=scn.line_risk,
                     total_demand=scn.total_demand),), kind=scenarios.kind)

    mean_scn = expected_scenario(scenarios)
    ev_plan, _, ev_costs = solve_day_ahead(
        net, _single(mean_scn), budget, line_risk=line_risk,
        theta_bound=theta_bound, limits=limits)

    ws_totals = []
    for scn in scns:
        _, _, costs = solve_day_ahead(
            net, _single(scn), budget, line_risk=line_risk,
            theta_bound=theta_bound, limits=limits)
        ws_totals.append(costs.total)
    ws = mean_risk(ws_totals, probs, beta, eps)

    _, _, rp_costs = solve_day_ahead(
        net, scenarios, budget,
        cvar=cfg if beta > 0.0 else None,
        line_risk=line_risk, theta_bound=theta_bound, limits=limits)
    mrrp = rp_costs.mean_cvar_objective

    ev_totals = []
    for scn in scns:
        _, _, costs = solve_day_ahead(
            net, _single(scn), budget=None, fix_plan=ev_plan,
            theta_bound=theta_bound, limits=limits)
        ev_totals.append(costs.total)
    eev = mean_risk(ev_totals, probs, beta, eps)

    return VssReport(ev=ev_costs.total, mrws=ws.combined, mrrp=mrrp,
                     mrev=eev.combined, mrvpi=mrrp - ws.combined,
                     mrvss=eev.combined - mrrp, beta=beta, epsilon=eps,
                     per_scenario_ws=tuple(ws_totals),
                     per_scenario_ev=tuple(ev_totals))


# -- wildfire metric validation ---------------------------------------------------


def mae_by_bus(wip_series, owip_series, assignment):
    """Mean absolute error between bus ignition series and cluster series.

    ``wip_series`` maps bus to 12 monthly probabilities, ``owip_series``
    maps cluster to 12 monthly observed probabilities, and ``assignment``
    sends each bus to its cluster.
    """
    out = {}
    for bus, series in wip_series.items():
        if len(series) != 12:
            raise DimensionMismatch(
                f"bus {bus} has {len(series)} monthly values, wanted 12")
        if bus not in assignment:
            raise DimensionMismatch(f"bus {bus} missing from assignment")
        cluster = assignment[bus]
        if cluster not in owip_series:
            raise DimensionMismatch(
                f"bus {bus} assigned to unknown cluster {cluster}")
        observed = owip_series[cluster]
        if len(observed) != 12:
            raise DimensionMismatch(
                f"cluster {cluster} has {len(observed)} monthly values, "
                "wanted 12")
        out[bus] = sum(abs(a - b) for a, b in zip(series, observed)) / 12.0
    return out


def mae_improvement(mae_baseline, mae_candidate):
    """Percent MAE reduction of the candidate metric over the baseline."""
    if mae_baseline == 0.0:
        raise ValueError("baseline MAE is zero, improvement undefined")
    return 100.0 * (mae_baseline - mae_candidate) / mae_baseline


# -- fire history clustering ------------------------------------------------------


@dataclass(frozen=True)
class FireRecord:
    date: datetime.date
    latitude: float
    longitude: float
    acres: float


@dataclass(frozen=True)
class KmeansResult:
    assignments: tuple   # record index -> cluster index
    centroids: tuple     # (latitude, longitude) per cluster
    hull_areas_km2: tuple


def load_fire_records(path, *, min_acres=LARGE_FIRE_ACRES):
    """Read a fire history CSV, keeping fires above the acreage floor."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        needed = {"date", "latitude", "longitude", "acres"}
        if reader.fieldnames is None or not needed <= set(reader.fieldnames):
            raise ParseError("fire history needs date, latitude, longitude, "
                             "acres columns", path=str(path))
        for i, row in enumerate(reader, start=2):
            try:
                rec = FireRecord(
                    date=datetime.date.fromisoformat(row["date"].strip()),
                    latitude=float(row["latitude"]),
                    longitude=float(row["longitude"]),
                    acres=float(row["acres"]))
            except (ValueError, AttributeError) as exc:
                raise ParseError(f"bad fire record: {exc}", path=str(path),
                                 line=i)
            if rec.acres >= min_acres:
                records.append(rec)
    return records


def _kmeans_once(points, k, rng):
    n = len(points)
    centroids = np.empty((k, 2))
    first = int(rng.integers(n))
    centroids[0] = points[first]
    for j in range(1, k):
        d2 = np.min(((points[:, None, :] - centroids[None, :j, :]) ** 2)
                    .sum(axis=2), axis=1)
        total = d2.sum()
        if total <= 0.0:
            centroids[j] = points[int(rng.integers(n))]
            continue
        centroids[j] = points[int(rng.choice(n, p=d2 / total))]
    assign = np.full(n, -1, dtype=int)
    for _round in range(200):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            members = points[assign == j]
            if members.size == 0:
                return None
            centroids[j] = members.mean(axis=0)
    return assign, centroids


def kmeans_regions(records, k, seed):
    """Partition fire records into k geographic clusters.

    Lloyd's algorithm over (latitude, longitude) with k-means++ seeding.
    An empty cluster triggers one re-seed before giving up.
    """
    if k < 1:
        raise ValueError(f"cluster count {k} must be positive")
    if len(records) < k:
        raise DegenerateCluster(
            f"{len(records)} records cannot fill {k} clusters")
    points = np.array([(r.latitude, r.longitude) for r in records])
    rng = np.random.default_rng(seed)
    result = _kmeans_once(points, k, rng)
    if result is None:
        result = _kmeans_once(points, k, np.random.default_rng(seed + 1))
    if result is None:
        raise DegenerateCluster(
            f"a cluster emptied twice while fitting k={k}")
    assign, centroids = result
    areas = []
    for j in range(k):
        member_points = points[assign == j]
        areas.append(hull_area_km2(member_points))
    return KmeansResult(assignments=tuple(int(a) for a in assign),
                        centroids=tuple((float(lat), float(lon))
                                        for lat, lon in centroids),
                        hull_areas_km2=tuple(areas))


def convex_hull(points):
    """Monotone chain hull, counterclockwise, no repeated endpoint."""
    pts = sorted({(float(x), float(y)) for x, y in points})
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return ((a[0] - o[0]) * (b[1] - o[1])
                - (a[1] - o[1]) * (b[0] - o[0]))

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def hull_area_km2(points):
    """Convex hull area of (lat, lon) points on an equirectangular map."""
    if len(points) < 3:
        return 0.0
    hull = convex_hull(points)
    if len(hull) < 3:
        return 0.0
    mean_lat = sum(p[0] for p in hull) / len(hull)
    scale_x = KM_PER_DEG * math.cos(math.radians(mean_lat))
    xy = [(lon * scale_x, lat * KM_PER_DEG) for lat, lon in hull]
    area = 0.0
    for i, (x1, y1) in enumerate(xy):
        x2, y2 = xy[(i + 1) % len(xy)]
        area += x1 * y2 - x2 * y1
    return abs(area) / 2.0


def owip_histogram(records, hull_area, years):
    """Observed monthly ignition probability for one cluster.

    Month m counts fire start dates across all years, normalized by the
    cluster hull area times the days in that month times the year count.
    """
    if hull_area <= 0.0:
        raise ZeroArea(f"hull area {hull_area} must be positive")
    if years < 1:
        raise ValueError(f"year count {years} must be at least 1")
    counts = [0] * 12
    for rec in records:
        counts[rec.date.month - 1] += 1
    return tuple(counts[m] / (hull_area * DAYS_IN_MONTH[m] * years)
                 for m in range(12))
