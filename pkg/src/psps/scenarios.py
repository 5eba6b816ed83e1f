"""Day-ahead scenario construction from historical demand and risk days.

A scenario couples a total demand curve (projected onto the individual
loads) with per-line ignition probabilities for the day. Scenario sets
come from either backward reduction over whole historical days or a
five-point gaussian fan around the per-step sample mean, with risk pulled
from the nearest historical day in cumulative-risk terms.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import date as date_type
from pathlib import Path

import numpy as np

from .errors import (
    InsufficientHistory,
    ParseError,
    ValidationError,
    ZeroTotal,
)
from .risk import metric_to_wip, sanitize_metric

DAY_AHEAD = "day-ahead"
REAL_TIME = "real-time"

FAN_OFFSETS = (-2.0, -1.0, 0.0, 1.0, 2.0)


def _phi(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


# probability mass of the standard normal over the five fan intervals
FAN_PROBABILITIES = (
    _phi(-1.5),
    _phi(-0.5) - _phi(-1.5),
    _phi(0.5) - _phi(-0.5),
    _phi(1.5) - _phi(0.5),
    1.0 - _phi(1.5),
)


@dataclass(frozen=True)
class HistoryDay:
    date: date_type
    total_demand_curve: tuple
    cumulative_bus_risk: float
    per_line_metric: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    id: int
    probability: float
    demand: dict        # demand id -> per-step MW tuple
    line_risk: dict     # line id -> ignition probability, constant over steps
    total_demand: tuple = ()


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple
    kind: str

    def __post_init__(self):
        diags = []
        if self.kind not in (DAY_AHEAD, REAL_TIME):
            diags.append(f"unknown scenario set kind {self.kind!r}")
        total = sum(s.probability for s in self.scenarios)
        if abs(total - 1.0) > 1e-9:
            diags.append(f"scenario probabilities sum to {total!r}, not 1")
        for s in self.scenarios:
            if s.probability <= 0.0:
                diags.append(f"scenario {s.id}: probability {s.probability} "
                             "is not positive")
            if any(v < 0.0 for curve in s.demand.values() for v in curve):
                diags.append(f"scenario {s.id}: negative demand value")
            if any(not 0.0 <= r < 1.0 for r in s.line_risk.values()):
                diags.append(f"scenario {s.id}: line risk outside [0, 1)")
        if diags:
            raise ValidationError(diags)


# -- backward reduction --------------------------------------------------------


def _feature_matrix(history):
    curves = np.asarray([d.total_demand_curve for d in history], dtype=float)
    risks = np.asarray([d.cumulative_bus_risk for d in history], dtype=float)
    feats = np.column_stack([curves, risks])
    mu = feats.mean(axis=0)
    sd = feats.std(axis=0)
    sd[sd == 0.0] = 1.0
    return (feats - mu) / sd


def reduce_scenarios(history, k):
    """Backward reduction to k representative days with merged probabilities.

    Repeatedly deletes the day whose probability times distance to its
    nearest surviving neighbor is smallest, handing its probability to
    that neighbor. Distances are Euclidean over the z-scored demand curve
    concatenated with the z-scored cumulative risk.
    """
    n = len(history)
    if k < 1 or n < k:
        raise InsufficientHistory(
            f"cannot reduce {n} history days to {k} scenarios")
    feats = _feature_matrix(history)
    dist = np.sqrt(((feats[:, None, :] - feats[None, :, :]) ** 2).sum(axis=2))
    probs = np.full(n, 1.0 / n)
    alive = list(range(n))
    while len(alive) > k:
        best = None
        for j in alive:
            others = [i for i in alive if i != j]
            di = min(others, key=lambda i: (dist[j, i], i))
            cost = probs[j] * dist[j, di]
            if best is None or cost < best[0] - 1e-15:
                best = (cost, j, di)
        _, j, di = best
        probs[di] += probs[j]
        probs[j] = 0.0
        alive.remove(j)
    return [history[i] for i in alive], [float(probs[i]) for i in alive]


# -- gaussian fan ---------------------------------------------------------------


def _fan_curves(history):
    if len(history) < 2:
        raise InsufficientHistory(
            f"gaussian fan needs at least 2 history days, got {len(history)}")
    curves = np.asarray([d.total_demand_curve for d in history], dtype=float)
    mu = curves.mean(axis=0)
    sd = curves.std(axis=0, ddof=1)
    return [np.maximum(mu + o * sd, 0.0) for o in FAN_OFFSETS]


def _fan_risk_targets(history):
    risks = np.asarray([d.cumulative_bus_risk for d in history], dtype=float)
    mu = float(risks.mean())
    sd = float(risks.std(ddof=1))
    return [mu + o * sd for o in FAN_OFFSETS]


def line_risk_from_day(day, table):
    """Per-line ignition probabilities from a history day's line metrics."""
    out = {}
    for line_id, value in day.per_line_metric.items():
        wip = metric_to_wip(sanitize_metric(value, table.metric), table)
        out[int(line_id)] = min(wip, 1.0 - 1e-12)
    return out


def gaussian_fan(history, net=None, table=None,
                 fan_probability_mode="normal-partition"):
    """Five-scenario fan: demand curves mu, mu+-sigma, mu+-2sigma.

    Probabilities follow the standard normal partition by default; mode
    "tree" instead reuses the probabilities of a 5-day backward reduction,
    matched to the fan curves in increasing-energy order. When ``net`` is
    given, curves are projected onto its demands; when ``table`` is also
    given, each fan point gets the line risk of the history day whose
    cumulative risk is nearest the equally fanned risk value.
    """
    curves = _fan_curves(history)
    if fan_probability_mode == "normal-partition":
        probs = list(FAN_PROBABILITIES)
    elif fan_probability_mode == "tree":
        _, tree_probs = reduce_scenarios(history, 5)
        probs = tree_probs  # survivors keep date order; pair by fan order
    else:
        raise ValueError(
            f"unknown fan_probability_mode {fan_probability_mode!r}")
    risk_targets = _fan_risk_targets(history) if table is not None else None
    scenarios = []
    for i, curve in enumerate(curves):
        demand = project_demand(curve, net) if net is not None else {}
        line_risk = {}
        if risk_targets is not None:
            day = match_risk_day(risk_targets[i], history)
            line_risk = line_risk_from_day(day, table)
        scenarios.append(Scenario(id=i, probability=probs[i], demand=demand,
                                  line_risk=line_risk,
                                  total_demand=tuple(float(v) for v in curve)))
    return ScenarioSet(scenarios=tuple(scenarios), kind=DAY_AHEAD)


def match_risk_day(target, history):
    """History day whose cumulative risk is nearest; ties pick the earliest."""
    if not history:
        raise InsufficientHistory("empty history")
    return min(history,
               key=lambda d: (abs(d.cumulative_bus_risk - target), d.date))


def project_demand(total_curve, net):
    """Split a total curve across demands in proportion to their peaks."""
    total = np.asarray(total_curve, dtype=float)
    if not np.any(total > 0.0):
        raise ZeroTotal("total demand curve is identically zero")
    peaks = {d.id: max(d.base_profile) for d in net.demands}
    peak_sum = sum(peaks.values())
    if peak_sum <= 0.0:
        raise ZeroTotal("network demand peaks sum to zero")
    return {did: tuple(float(v) for v in total * (peak / peak_sum))
            for did, peak in peaks.items()}


def expected_scenario(scn_set):
    """Probability-weighted mean scenario (demand and risk elementwise)."""
    scns = scn_set.scenarios
    demand_keys = scns[0].demand.keys()
    risk_keys = scns[0].line_risk.keys()
    demand = {}
    for key in demand_keys:
        acc = np.zeros(len(scns[0].demand[key]))
        for s in scns:
            acc += s.probability * np.asarray(s.demand[key], dtype=float)
        demand[key] = tuple(float(v) for v in acc)
    line_risk = {key: float(sum(s.probability * s.line_risk[key] for s in scns))
                 for key in risk_keys}
    total = ()
    if scns[0].total_demand:
        acc = np.zeros(len(scns[0].total_demand))
        for s in scns:
            acc += s.probability * np.asarray(s.total_demand, dtype=float)
        total = tuple(float(v) for v in acc)
    return Scenario(id=0, probability=1.0, demand=demand,
                    line_risk=line_risk, total_demand=total)


# -- persistence ----------------------------------------------------------------


def load_history(demand_csv, line_metric_csv=None):
    """Read history days from CSVs.

    The demand file has columns date, step, total_demand (steps 1-based).
    The optional line metric file has columns date, line_id, value; a
    day's cumulative risk is the sum of its line metric values.
    """
    demand_csv = str(demand_csv)
    by_date = {}
    try:
        with open(demand_csv, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {
                    "date", "step", "total_demand"} <= set(reader.fieldnames):
                raise ParseError(
                    "history needs columns date, step, total_demand",
                    demand_csv)
            for lineno, row in enumerate(reader, start=2):
                try:
                    day = date_type.fromisoformat(row["date"])
                    step = int(row["step"])
                    mw = float(row["total_demand"])
                except (TypeError, ValueError):
                    raise ParseError("bad history row", demand_csv,
                                     lineno) from None
                by_date.setdefault(day, {})[step] = mw
    except OSError as exc:
        raise ParseError(f"cannot read history: {exc.strerror or exc}",
                         demand_csv)
    if not by_date:
        raise ParseError("history file has no rows", demand_csv)
    lengths = {len(steps) for steps in by_date.values()}
    if len(lengths) != 1:
        raise ValidationError(
            [f"history days have differing step counts {sorted(lengths)}"])
    horizon = lengths.pop()
    metrics = {}
    if line_metric_csv is not None:
        line_metric_csv = str(line_metric_csv)
        try:
            with open(line_metric_csv, newline="", encoding="utf-8") as fh:
                reader = csv.DictReader(fh)
                if reader.fieldnames is None or not {
                        "date", "line_id", "value"} <= set(reader.fieldnames):
                    raise ParseError(
                        "line metrics need columns date, line_id, value",
                        line_metric_csv)
                for lineno, row in enumerate(reader, start=2):
                    try:
                        day = date_type.fromisoformat(row["date"])
                        lid = int(row["line_id"])
                        val = float(row["value"])
                    except (TypeError, ValueError):
                        raise ParseError("bad line metric row",
                                         line_metric_csv, lineno) from None
                    metrics.setdefault(day, {})[lid] = val
        except OSError as exc:
            raise ParseError(
                f"cannot read line metrics: {exc.strerror or exc}",
                line_metric_csv)
    days = []
    for day in sorted(by_date):
        steps = by_date[day]
        if sorted(steps) != list(range(1, horizon + 1)):
            raise ValidationError(
                [f"history {day}: steps are not 1..{horizon}"])
        curve = tuple(steps[t] for t in range(1, horizon + 1))
        per_line = metrics.get(day, {})
        days.append(HistoryDay(
            date=day, total_demand_curve=curve,
            cumulative_bus_risk=float(sum(per_line.values())),
            per_line_metric=per_line))
    return days


def save_scenario_set(scn_set, path):
    doc = {"kind": scn_set.kind, "scenarios": [
        {"id": s.id, "probability": s.probability,
         "total_demand": list(s.total_demand),
         "demand": {str(k): list(v) for k, v in sorted(s.demand.items())},
         "line_risk": {str(k): v for k, v in sorted(s.line_risk.items())}}
        for s in scn_set.scenarios]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_scenario_set(path):
    path = str(path)
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read scenarios: {exc.strerror or exc}", path)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno)
    try:
        scenarios = tuple(
            Scenario(id=int(s["id"]), probability=float(s["probability"]),
                     demand={int(k): tuple(v)
                             for k, v in s.get("demand", {}).items()},
                     line_risk={int(k): float(v)
                                for k, v in s.get("line_risk", {}).items()},
                     total_demand=tuple(s.get("total_demand", ())))
            for s in doc["scenarios"])
        return ScenarioSet(scenarios=scenarios, kind=doc["kind"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed scenario document: {exc}", path)
