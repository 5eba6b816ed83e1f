"""Real-time stress testing of a committed shutoff plan.

Draws Monte Carlo line-outage scenarios against the plan's energized lines,
re-dispatches the fixed commitment per scenario (recourse LPs with shedding
always available), and aggregates costs, served energy, realized risk, and
the average available generation of the plan. A receding-horizon mode
replays a day step by step with a short lookahead window.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .formulation import DispatchSolution, build_day_ahead, extract_dispatch
from .errors import (ConfigError, DimensionMismatch, InfeasibleModel,
                     NumericalFailure, ParseError, ValidationError)
from .milp import GAP_LIMIT, INFEASIBLE, OPTIMAL, SolveLimits, solve_milp
from .scenarios import DAY_AHEAD, Scenario, ScenarioSet

UNIFORM_ONSET = "uniform"
WHOLE_DAY_ONSET = "whole-day"


@dataclass(frozen=True)
class OutageScenario:
    id: int
    probability: float
    availability: dict    # line id -> 0/1 tuple, <= plan energization
    demand: dict          # demand id -> MW tuple (empty: base profiles)


@dataclass(frozen=True)
class RtReport:
    per_scenario: tuple       # realized cost of each outage scenario
    expected_cost: float
    median_cost: float
    p95_cost: float
    realized_risk: float      # log-constraint left side at the plan decisions
    demand_served_mwh: float  # probability-weighted served energy
    aag_mw: float
    onset: str
    n: int
    seed: int


def _single_set(scn):
    return ScenarioSet(scenarios=(scn,), kind=DAY_AHEAD)


def _effective_plan(plan, availability):
    line_down = {}
    for lid, avail in availability.items():
        downs = []
        prev = 1
        for v in avail:
            downs.append(1 if v < prev else 0)
            prev = v
        line_down[lid] = tuple(downs)
    return replace(plan, line_on=dict(availability), line_down=line_down)


def sample_outages(line_risk, plan, n, seed, *, onset=UNIFORM_ONSET,
                   demand=None):
    """Monte Carlo availability patterns for the plan's energized lines.

    Each energized line ignites with its daily probability; an ignited
    line drops out from a uniformly drawn onset step (or from step 1 in
    whole-day mode). Streams are derived from (seed, scenario id), so any
    prefix of the samples is reproducible.
    """
    if n < 1:
        raise ConfigError(f"sample count {n} must be at least 1")
    if onset not in (UNIFORM_ONSET, WHOLE_DAY_ONSET):
        raise ConfigError(f"unknown onset mode {onset!r}")
    by_id = {lr.line_id: lr for lr in line_risk}
    horizon = len(next(iter(plan.line_on.values()))) if plan.line_on else 0
    demand = demand or {}
    out = []
    for s in range(n):
        rng = np.random.default_rng([seed, s])
        avail = {}
        for lid, pattern in sorted(plan.line_on.items()):
            pi = by_id[lid].pi if lid in by_id else 0.0
            if any(pattern) and pi > 0.0 and rng.random() < pi:
                onset_step = 1 if onset == WHOLE_DAY_ONSET else \
                    int(rng.integers(1, horizon + 1))
                avail[lid] = tuple(
                    v if t + 1 < onset_step else 0
                    for t, v in enumerate(pattern))
            else:
                avail[lid] = tuple(pattern)
        out.append(OutageScenario(id=s, probability=1.0 / n,
                                  availability=avail, demand=demand))
    return out


def solve_recourse(net, plan, scenario, *, theta_bound=0.6, limits=None):
    """Re-dispatch the fixed plan under one outage scenario.

    Returns the dispatch and the scenario cost, which charges the plan's
    sunk commitment cost plus operating and lost-load cost. Shedding keeps
    the problem feasible for any availability pattern; a committed unit
    stranded behind failed lines backs its output down below minimum at
    the steep ``relief_penalty_rate`` charge rather than going infeasible.
    """
    effective = _effective_plan(plan, scenario.availability)
    scn = Scenario(id=scenario.id, probability=1.0, demand=scenario.demand,
                   line_risk={}, total_demand=())
    single = _single_set(scn)
    model = build_day_ahead(net, single, budget=None, fix_plan=effective,
                            theta_bound=theta_bound, min_output_relief=True)
    sol = solve_milp(model, limits or SolveLimits())
    if sol.status == INFEASIBLE:
        # only a malformed plan gets here, e.g. one re-energizing a line
        raise InfeasibleModel(
            f"fixed plan infeasible under scenario {scenario.id}")
    if sol.status not in (OPTIMAL, GAP_LIMIT):
        raise NumericalFailure(f"recourse dispatch ended {sol.status}")
    return extract_dispatch(net, single, sol), sol.objective


def average_available_generation(net, plan):
    """Committed capacity averaged over the day, (dt/H) sum p_max * z."""
    H = net.horizon
    total = 0.0
    for g in net.generators:
        total += g.p_max * sum(plan.gen_on[g.id])
    return net.step_hours * total / H


def realized_risk(line_risk, line_status):
    """Log-budget left side at realized end-of-day line statuses.

    ``line_status`` maps line id to truthy (energized) or falsy (dark);
    zero-risk lines contribute nothing either way.
    """
    acc = 0.0
    for lr in line_risk:
        if lr.pi <= 0.0 or lr.line_id not in line_status:
            continue
        if line_status[lr.line_id]:
            acc += lr.log_one_minus_pi
        else:
            acc += lr.log_pi
    return acc


def plan_end_status(plan):
    return {lid: pattern[-1] for lid, pattern in plan.line_on.items()}


def evaluate_plan(net, plan, line_risk, *, n=1000, seed=0,
                  onset=UNIFORM_ONSET, demand=None, theta_bound=0.6,
                  limits=None):
    """Monte Carlo stress test of a plan; identical patterns solve once."""
    scenarios = sample_outages(line_risk, plan, n, seed, onset=onset,
                               demand=demand)
    cache = {}
    costs = np.zeros(n)
    served = np.zeros(n)
    for scn in scenarios:
        key = tuple(sorted(scn.availability.items()))
        if key not in cache:
            dispatch, cost = solve_recourse(net, plan, scn,
                                            theta_bound=theta_bound,
                                            limits=limits)
            cache[key] = (cost, _served_energy(net, dispatch, scn))
        costs[scn.id], served[scn.id] = cache[key]
    return RtReport(
        per_scenario=tuple(costs.tolist()),
        expected_cost=float(costs.mean()),
        median_cost=float(np.quantile(costs, 0.5)),
        p95_cost=float(np.quantile(costs, 0.95)),
        realized_risk=realized_risk(line_risk, plan_end_status(plan)),
        demand_served_mwh=float(served.mean()),
        aag_mw=average_available_generation(net, plan),
        onset=onset, n=n, seed=seed)


def _served_energy(net, dispatch, scenario):
    H = net.horizon
    mwh = 0.0
    for d in net.demands:
        curve = scenario.demand.get(d.id, d.base_profile)
        x = dispatch.served[scenario.id][d.id]
        mwh += sum(curve[t] * x[t] * net.step_hours for t in range(H))
    return mwh


def load_realized_demand(path):
    """Read realized per-demand curves from a demand_id,step,mw CSV."""
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        needed = {"demand_id", "step", "mw"}
        if reader.fieldnames is None or not needed <= set(reader.fieldnames):
            raise ParseError("realized demand needs demand_id, step, mw "
                             "columns", path=str(path))
        for i, row in enumerate(reader, start=2):
            try:
                did = int(row["demand_id"])
                step = int(row["step"])
                mw = float(row["mw"])
            except (TypeError, ValueError) as exc:
                raise ParseError(f"bad realized demand row: {exc}",
                                 path=str(path), line=i)
            rows.setdefault(did, {})[step] = mw
    if not rows:
        raise ParseError("realized demand file is empty", path=str(path))
    diags = []
    lengths = {did: max(steps) for did, steps in rows.items()}
    horizon = max(lengths.values())
    out = {}
    for did, steps in sorted(rows.items()):
        if sorted(steps) != list(range(1, horizon + 1)):
            diags.append(f"demand {did}: steps must cover 1..{horizon}, "
                         f"got {sorted(steps)}")
            continue
        out[did] = tuple(steps[t] for t in range(1, horizon + 1))
    if diags:
        raise ValidationError(diags)
    return out


def receding_horizon_run(net, plan, demand, window, *, availability=None,
                         theta_bound=0.6):
    """Replay the day committing one step at a time with a short lookahead.

    At each step the recourse LP is solved over ``window`` steps (demand
    and plan padded by holding their last value past the day's end), only
    the first step is kept, and the generator ramp anchor carries the
    committed auxiliary output into the next window.
    """
    H = net.horizon
    if not 1 <= window <= H:
        raise ConfigError(f"window {window} outside 1..{H}")
    for d in net.demands:
        if d.id in demand and len(demand[d.id]) < H:
            raise DimensionMismatch(
                f"realized demand for {d.id} shorter than the horizon")
    avail = availability or plan.line_on
    committed_p = {g.id: [] for g in net.generators}
    committed_aux = {g.id: [] for g in net.generators}
    committed_flow = {line.id: [] for line in net.lines}
    committed_theta = {b.id: [] for b in net.buses}
    committed_x = {d.id: [] for d in net.demands}
    prev_aux = {g.id: 0.0 for g in net.generators}
    for t0 in range(1, H + 1):
        steps = [min(t0 + k, H) for k in range(window)]
        win_net = replace(net, horizon=window, generators=tuple(
            replace(g, initially_on=bool(
                plan.gen_on[g.id][t0 - 2] if t0 > 1 else g.initially_on))
            for g in net.generators))
        win_plan = replace(
            plan,
            gen_on={gid: tuple(vals[s - 1] for s in steps)
                    for gid, vals in plan.gen_on.items()},
            line_on={lid: tuple(vals[s - 1] for s in steps)
                     for lid, vals in avail.items()})
        win_demand = {d.id: tuple(
            demand.get(d.id, d.base_profile)[s - 1] for s in steps)
            for d in net.demands}
        scn = Scenario(id=0, probability=1.0, demand=win_demand,
                       line_risk={}, total_demand=())
        model = build_day_ahead(win_net, _single_set(scn), budget=None,
                                fix_plan=win_plan, theta_bound=theta_bound,
                                min_output_relief=True)
        for g in net.generators:
            lo = max(g.p_min - g.p_max, prev_aux[g.id] + g.ramp_down)
            hi = min(0.0, prev_aux[g.id] + g.ramp_up)
            model.set_var_bounds(f"paux_{g.id}_1_0", lo, hi)
        sol = solve_milp(model, SolveLimits())
        if sol.status not in (OPTIMAL, GAP_LIMIT):
            raise NumericalFailure(
                f"receding window at step {t0} ended {sol.status}")
        dispatch = extract_dispatch(win_net, _single_set(scn), sol)
        for g in net.generators:
            committed_p[g.id].append(dispatch.gen_p[0][g.id][0])
            committed_aux[g.id].append(dispatch.gen_aux[0][g.id][0])
            prev_aux[g.id] = dispatch.gen_aux[0][g.id][0]
        for line in net.lines:
            committed_flow[line.id].append(dispatch.line_flow[0][line.id][0])
        for b in net.buses:
            committed_theta[b.id].append(dispatch.theta[0][b.id][0])
        for d in net.demands:
            committed_x[d.id].append(dispatch.served[0][d.id][0])
    return DispatchSolution(
        gen_p={0: {k: tuple(v) for k, v in committed_p.items()}},
        gen_aux={0: {k: tuple(v) for k, v in committed_aux.items()}},
        line_flow={0: {k: tuple(v) for k, v in committed_flow.items()}},
        theta={0: {k: tuple(v) for k, v in committed_theta.items()}},
        served={0: {k: tuple(v) for k, v in committed_x.items()}})
