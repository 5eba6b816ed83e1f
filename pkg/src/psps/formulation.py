"""Day-ahead shutoff planning model: unit commitment plus line de-energization.

Builds the two-stage MILP. First-stage binaries commit generators and
energize lines for the whole day; second-stage continuous dispatch (output,
flows, angles, served-load fractions) is replicated per demand scenario.
A wildfire risk budget restricts which lines may stay energized, in one of
four modes, and the objective is either expected cost or a mean-CVaR blend.

Commitment extraction recomputes startup/shutdown indicators from the
on/off trajectory rather than reading their variables, which keeps them
canonical when startup costs are zero and the LP leaves them degenerate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .analytics import cvar as cvar_tail
from .errors import (
    ConfigError,
    DimensionMismatch,
    InfeasibleModel,
    NumericalFailure,
    SolverLimit,
)
from .milp import (
    BINARY,
    GAP_LIMIT,
    INFEASIBLE,
    MilpModel,
    NODE_LIMIT,
    OPTIMAL,
    SolveLimits,
    UNBOUNDED,
    solve_milp,
)

WFPI_SUM = "wfpi-sum"
N_MINUS_K = "n-minus-k"
WFPI_SLACK = "wfpi-slack"
LOG_WIP = "log-wip"

_MODES = (WFPI_SUM, N_MINUS_K, WFPI_SLACK, LOG_WIP)

# formulation size guard; the bundled 24-bus day fits under these
MAX_VARS = 6000
MAX_CONSTRS = 8000


@dataclass(frozen=True)
class RiskBudget:
    """Line energization budget. Exactly one mode's fields apply."""

    mode: str
    r_tol: float | None = None         # wfpi-sum / wfpi-slack
    k: int | None = None               # n-minus-k
    pi_tol: float | None = None        # log-wip
    r_slack_max: float | None = None   # wfpi-slack
    log_semantics: str = "status"      # log-wip: "status" or "shutdown-step"
    slack_penalty: float = 1.0         # wfpi-slack objective coefficient

    def validate(self, n_lines=None):
        if self.mode not in _MODES:
            raise ConfigError(f"unknown budget mode {self.mode!r}")
        need = {WFPI_SUM: ("r_tol",), N_MINUS_K: ("k",),
                WFPI_SLACK: ("r_tol", "r_slack_max"),
                LOG_WIP: ("pi_tol",)}[self.mode]
        allowed = set(need)
        for field_name in ("r_tol", "k", "pi_tol", "r_slack_max"):
            val = getattr(self, field_name)
            if field_name in allowed:
                if val is None:
                    raise ConfigError(
                        f"budget mode {self.mode} requires {field_name}")
            elif val is not None:
                raise ConfigError(
                    f"budget mode {self.mode} does not take {field_name}")
        if self.mode in (WFPI_SUM, WFPI_SLACK) and self.r_tol < 0.0:
            raise ConfigError(f"r_tol {self.r_tol} is negative")
        if self.mode == WFPI_SLACK and self.r_slack_max < 0.0:
            raise ConfigError(f"r_slack_max {self.r_slack_max} is negative")
        if self.mode == N_MINUS_K:
            if self.k < 0 or (n_lines is not None and self.k > n_lines):
                raise ConfigError(f"k {self.k} outside 0..{n_lines}")
        if self.mode == LOG_WIP:
            if not 0.0 < self.pi_tol <= 1.0:
                raise ConfigError(f"pi_tol {self.pi_tol} outside (0, 1]")
            if self.log_semantics not in ("status", "shutdown-step"):
                raise ConfigError(
                    f"unknown log_semantics {self.log_semantics!r}")


@dataclass(frozen=True)
class CvarConfig:
    beta: float
    epsilon: float = 0.95

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta {self.beta} outside [0, 1]")
        if not 0.0 <= self.epsilon < 1.0:
            raise ConfigError(f"epsilon {self.epsilon} outside [0, 1)")


@dataclass(frozen=True)
class CommitmentPlan:
    gen_on: dict       # generator id -> 0/1 tuple over steps
    gen_up: dict
    gen_dn: dict
    line_on: dict      # line id -> 0/1 tuple over steps
    line_down: dict    # 1 exactly at the step a line goes dark


_PLAN_FIELDS = ("gen_on", "gen_up", "gen_dn", "line_on", "line_down")


def save_plan(plan, path):
    payload = {field: {str(k): list(v)
                       for k, v in sorted(getattr(plan, field).items())}
               for field in _PLAN_FIELDS}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_plan(path):
    with open(path) as fh:
        payload = json.load(fh)
    missing = [f for f in _PLAN_FIELDS if f not in payload]
    if missing:
        raise ConfigError(f"plan file {path} missing {missing}")
    kwargs = {}
    for field in _PLAN_FIELDS:
        kwargs[field] = {int(k): tuple(int(x) for x in v)
                         for k, v in payload[field].items()}
    return CommitmentPlan(**kwargs)


@dataclass(frozen=True)
class DispatchSolution:
    gen_p: dict        # scenario id -> generator id -> MW tuple
    gen_aux: dict
    line_flow: dict    # scenario id -> line id -> MW tuple
    theta: dict        # scenario id -> bus id -> radians tuple
    served: dict       # scenario id -> demand id -> fraction tuple


@dataclass(frozen=True)
class CostBreakdown:
    uc: float
    oc: float              # probability-weighted operating cost
    voll: float            # probability-weighted lost-load cost
    slack_penalty: float
    total: float
    per_scenario: tuple    # cost of each scenario, set order
    mean: float
    cvar: float
    mean_cvar_objective: float


# variable naming: steps are 1-based, w is the scenario id
def _zg(g, t):
    return f"zg_{g}_{t}"


def _zup(g, t):
    return f"zup_{g}_{t}"


def _zdn(g, t):
    return f"zdn_{g}_{t}"


def _zl(line, t):
    return f"zl_{line}_{t}"


def _pg(g, t, w):
    return f"pg_{g}_{t}_{w}"


def _paux(g, t, w):
    return f"paux_{g}_{t}_{w}"


def _rel(g, t, w):
    return f"rel_{g}_{t}_{w}"


def _pl(line, t, w):
    return f"pl_{line}_{t}_{w}"


def _th(bus, t, w):
    return f"th_{bus}_{t}_{w}"


def _xd(d, t, w):
    return f"xd_{d}_{t}_{w}"


def _demand_curve(scn, demand):
    return scn.demand.get(demand.id, demand.base_profile)


def _reference_bus(net):
    gen_buses = {g.bus for g in net.generators}
    return min(b.id for b in net.buses if b.id in gen_buses)


def emit_risk_budget(model, net, line_risk, budget, horizon):
    """Add the per-step budget rows restricting line energization."""
    budget.validate(len(net.lines))
    if budget.mode == N_MINUS_K:
        limit = len(net.lines) - budget.k
        for t in range(1, horizon + 1):
            model.add_constr({_zl(line.id, t): 1.0 for line in net.lines},
                             "<=", float(limit), name=f"budget_{t}")
        return
    if line_risk is None:
        raise ConfigError(
            f"budget mode {budget.mode} requires per-line risk data")
    by_id = {lr.line_id: lr for lr in line_risk}
    missing = [line.id for line in net.lines if line.id not in by_id]
    if missing:
        raise ConfigError(f"no line risk entry for lines {missing}")
    if budget.mode == WFPI_SUM:
        for t in range(1, horizon + 1):
            terms = {_zl(line.id, t): by_id[line.id].metric_value
                     for line in net.lines}
            model.add_constr(terms, "<=", budget.r_tol, name=f"budget_{t}")
        return
    if budget.mode == WFPI_SLACK:
        model.add_var("rslack", 0.0, budget.r_slack_max)
        for t in range(1, horizon + 1):
            terms = {_zl(line.id, t): by_id[line.id].metric_value
                     for line in net.lines}
            terms["rslack"] = -1.0
            model.add_constr(terms, "==", budget.r_tol, name=f"budget_{t}")
        return
    # log-wip: zero-risk lines are excluded from both sums
    risky = [by_id[line.id] for line in net.lines if by_id[line.id].pi > 0.0]
    log_tol = math.log(budget.pi_tol)
    if budget.log_semantics == "status":
        # sum over dark ln(pi) + sum over lit ln(1-pi) <= ln(pi_tol), with
        # (1 - z) selecting dark lines; constants move to the right side
        base = sum(lr.log_pi for lr in risky)
        for t in range(1, horizon + 1):
            terms = {_zl(lr.line_id, t): lr.log_one_minus_pi - lr.log_pi
                     for lr in risky}
            model.add_constr(terms, "<=", log_tol - base, name=f"budget_{t}")
        return
    # shutdown-step: the ln(pi) term fires only when the line goes dark,
    # via zdn_t = z_{t-1} - z_t with z_0 = 1
    for t in range(1, horizon + 1):
        terms = {}
        rhs = log_tol
        for lr in risky:
            terms[_zl(lr.line_id, t)] = lr.log_one_minus_pi - lr.log_pi
            if t == 1:
                rhs -= lr.log_pi
            else:
                terms[_zl(lr.line_id, t - 1)] = \
                    terms.get(_zl(lr.line_id, t - 1), 0.0) + lr.log_pi
        model.add_constr(terms, "<=", rhs, name=f"budget_{t}")


def relief_penalty_rate(net):
    """Per MWh charge for running a committed unit below its minimum.

    Priced above any achievable saving, so relief appears in an optimum
    only when a fixed commitment would otherwise have no feasible dispatch
    (a unit stranded behind failed lines, for example).
    """
    worst_voll = max((d.voll for d in net.demands), default=0.0)
    worst_marg = max((g.marginal_cost for g in net.generators), default=0.0)
    return 10.0 * (worst_voll + worst_marg + 1.0)


def build_day_ahead(net, scenarios, budget, cvar=None, *, line_risk=None,
                    theta_bound=0.6, fix_plan=None, min_output_relief=False,
                    name="day-ahead"):
    """Assemble the day-ahead MILP for a network and scenario set.

    ``fix_plan`` pins all commitment binaries to an existing plan and drops
    the budget rows, which turns the model into the pure recourse LP used
    when re-dispatching a frozen plan against new scenarios.

    ``min_output_relief`` (recourse builds only) adds a penalized slack that
    lets delivered output drop below a committed unit's minimum, keeping the
    LP feasible for any availability pattern. The ramp constraints keep
    acting on the unrelieved trajectory, so upward movements stay honest.
    """
    if budget is not None:
        budget.validate(len(net.lines))
    if cvar is not None and cvar.beta > 0.0 and len(scenarios.scenarios) < 2:
        raise ConfigError("CVaR weighting needs at least 2 scenarios")
    if min_output_relief and fix_plan is None:
        raise ConfigError("minimum output relief is a recourse device and "
                          "needs a fixed plan")
    if min_output_relief and cvar is not None and cvar.beta > 0.0:
        raise ConfigError("minimum output relief does not combine with "
                          "CVaR weighting")
    relief_rate = relief_penalty_rate(net) if min_output_relief else 0.0
    H = net.horizon
    dt = net.step_hours
    scns = scenarios.scenarios
    model = MilpModel(name=name)

    # first-stage commitment
    for g in net.generators:
        for t in range(1, H + 1):
            if fix_plan is not None:
                v = float(fix_plan.gen_on[g.id][t - 1])
                model.add_var(_zg(g.id, t), v, v)
                model.add_var(_zup(g.id, t), 0.0, 1.0)
                model.add_var(_zdn(g.id, t), 0.0, 1.0)
            else:
                model.add_var(_zg(g.id, t), kind=BINARY)
                model.add_var(_zup(g.id, t), 0.0, 1.0)
                model.add_var(_zdn(g.id, t), 0.0, 1.0)
    for line in net.lines:
        for t in range(1, H + 1):
            if fix_plan is not None:
                v = float(fix_plan.line_on[line.id][t - 1])
                model.add_var(_zl(line.id, t), v, v)
            else:
                model.add_var(_zl(line.id, t), kind=BINARY)

    # unit commitment logic
    for g in net.generators:
        z0 = 1.0 if g.initially_on else 0.0
        for t in range(1, H + 1):
            up_terms = {_zup(g.id, s): 1.0
                        for s in range(max(1, t - g.min_up), t + 1)}
            up_terms[_zg(g.id, t)] = -1.0
            model.add_constr(up_terms, "<=", 0.0, name=f"minup_{g.id}_{t}")
            dn_terms = {_zdn(g.id, s): 1.0
                        for s in range(max(1, t - g.min_down), t + 1)}
            dn_terms[_zg(g.id, t)] = 1.0
            model.add_constr(dn_terms, "<=", 1.0, name=f"mindn_{g.id}_{t}")
            # switching consistency: z_t - z_{t-1} = zup_t - zdn_t
            sw = {_zg(g.id, t): 1.0, _zup(g.id, t): -1.0, _zdn(g.id, t): 1.0}
            if t == 1:
                model.add_constr(sw, "==", z0, name=f"switch_{g.id}_1")
            else:
                sw[_zg(g.id, t - 1)] = -1.0
                model.add_constr(sw, "==", 0.0, name=f"switch_{g.id}_{t}")

    # once a line is switched off it stays off
    for line in net.lines:
        for t in range(1, H):
            model.add_constr({_zl(line.id, t): 1.0,
                              _zl(line.id, t + 1): -1.0}, ">=", 0.0,
                             name=f"persist_{line.id}_{t}")

    ref = _reference_bus(net)
    by_bus_gen = {}
    for g in net.generators:
        by_bus_gen.setdefault(g.bus, []).append(g)
    by_bus_from = {}
    by_bus_to = {}
    for line in net.lines:
        by_bus_from.setdefault(line.from_bus, []).append(line)
        by_bus_to.setdefault(line.to_bus, []).append(line)
    by_bus_dem = {}
    for d in net.demands:
        by_bus_dem.setdefault(d.bus, []).append(d)

    # per-scenario dispatch
    for scn in scns:
        w = scn.id
        for t in range(1, H + 1):
            for g in net.generators:
                model.add_var(_pg(g.id, t, w), 0.0, g.p_max)
                aux_lb = g.p_min - g.p_max
                aux_ub = 0.0
                if t == 1:
                    # initial p_aux is zero, so step-1 aux obeys the ramp
                    aux_lb = max(aux_lb, g.ramp_down)
                    aux_ub = min(aux_ub, g.ramp_up)
                model.add_var(_paux(g.id, t, w), aux_lb, aux_ub)
                if min_output_relief:
                    model.add_var(_rel(g.id, t, w), 0.0, g.p_max)
            for line in net.lines:
                model.add_var(_pl(line.id, t, w), line.flow_min, line.flow_max)
            for b in net.buses:
                if b.id == ref:
                    model.add_var(_th(b.id, t, w), 0.0, 0.0)
                else:
                    model.add_var(_th(b.id, t, w), -math.inf, math.inf)
            for d in net.demands:
                model.add_var(_xd(d.id, t, w), 0.0, 1.0)
        for t in range(1, H + 1):
            for g in net.generators:
                model.add_constr({_pg(g.id, t, w): 1.0,
                                  _zg(g.id, t): -g.p_max}, "<=", 0.0,
                                 name=f"cap_hi_{g.id}_{t}_{w}")
                cap_lo = {_pg(g.id, t, w): 1.0, _zg(g.id, t): -g.p_min}
                aux_eq = {_paux(g.id, t, w): 1.0, _pg(g.id, t, w): -1.0,
                          _zg(g.id, t): g.p_max}
                if min_output_relief:
                    cap_lo[_rel(g.id, t, w)] = 1.0
                    aux_eq[_rel(g.id, t, w)] = -1.0
                model.add_constr(cap_lo, ">=", 0.0,
                                 name=f"cap_lo_{g.id}_{t}_{w}")
                model.add_constr(aux_eq, "==", 0.0,
                                 name=f"aux_{g.id}_{t}_{w}")
                if t > 1:
                    ramp = {_paux(g.id, t, w): 1.0, _paux(g.id, t - 1, w): -1.0}
                    model.add_constr(ramp, "<=", g.ramp_up,
                                     name=f"ramp_up_{g.id}_{t}_{w}")
                    model.add_constr(ramp, ">=", g.ramp_down,
                                     name=f"ramp_dn_{g.id}_{t}_{w}")
            for line in net.lines:
                b = line.susceptance
                big = b * theta_bound
                flow = {_pl(line.id, t, w): 1.0,
                        _th(line.from_bus, t, w): -b,
                        _th(line.to_bus, t, w): b}
                hi = dict(flow)
                hi[_zl(line.id, t)] = big
                model.add_constr(hi, "<=", big, name=f"flow_hi_{line.id}_{t}_{w}")
                lo = dict(flow)
                lo[_zl(line.id, t)] = -big
                model.add_constr(lo, ">=", -big,
                                 name=f"flow_lo_{line.id}_{t}_{w}")
                model.add_constr({_pl(line.id, t, w): 1.0,
                                  _zl(line.id, t): -line.flow_max}, "<=", 0.0,
                                 name=f"thermal_hi_{line.id}_{t}_{w}")
                model.add_constr({_pl(line.id, t, w): 1.0,
                                  _zl(line.id, t): -line.flow_min}, ">=", 0.0,
                                 name=f"thermal_lo_{line.id}_{t}_{w}")
            for b in net.buses:
                terms = {}
                for g in by_bus_gen.get(b.id, ()):
                    terms[_pg(g.id, t, w)] = 1.0
                for line in by_bus_from.get(b.id, ()):
                    terms[_pl(line.id, t, w)] = -1.0
                for line in by_bus_to.get(b.id, ()):
                    terms[_pl(line.id, t, w)] = 1.0
                for d in by_bus_dem.get(b.id, ()):
                    mw = _demand_curve(scn, d)[t - 1]
                    if mw != 0.0:
                        terms[_xd(d.id, t, w)] = -mw
                if terms:
                    model.add_constr(terms, "==", 0.0,
                                     name=f"balance_{b.id}_{t}_{w}")

    if budget is not None and fix_plan is None:
        emit_risk_budget(model, net, line_risk, budget, H)

    # objective: expected cost, optionally blended with CVaR
    beta = cvar.beta if cvar is not None else 0.0
    use_cvar = cvar is not None and beta > 0.0
    mean_w = 1.0 - beta if use_cvar else 1.0

    uc_terms = {}
    for g in net.generators:
        for t in range(1, H + 1):
            uc_terms[_zup(g.id, t)] = g.startup_cost
            uc_terms[_zdn(g.id, t)] = g.shutdown_cost
    slack_terms = {}
    if budget is not None and fix_plan is None and budget.mode == WFPI_SLACK:
        slack_terms["rslack"] = budget.slack_penalty

    obj = {}
    constant = 0.0

    def _bump(terms, weight):
        for var, coef in terms.items():
            if coef != 0.0:
                obj[var] = obj.get(var, 0.0) + weight * coef

    _bump(uc_terms, mean_w)
    _bump(slack_terms, mean_w)
    scen_exprs = []
    for scn in scns:
        w = scn.id
        terms = {}
        base = 0.0
        for g in net.generators:
            for t in range(1, H + 1):
                terms[_pg(g.id, t, w)] = g.marginal_cost * dt
                if min_output_relief:
                    terms[_rel(g.id, t, w)] = relief_rate * dt
        for d in net.demands:
            curve = _demand_curve(scn, d)
            for t in range(1, H + 1):
                mw = curve[t - 1]
                if mw != 0.0:
                    terms[_xd(d.id, t, w)] = -d.voll * mw * dt
                    base += d.voll * mw * dt
        scen_exprs.append((scn, terms, base))
        _bump(terms, mean_w * scn.probability)
        constant += mean_w * scn.probability * base

    if use_cvar:
        model.add_var("nu", -math.inf, math.inf)
        obj["nu"] = beta
        for scn, terms, base in scen_exprs:
            gname = f"gam_{scn.id}"
            model.add_var(gname, 0.0, math.inf)
            obj[gname] = beta * scn.probability / (1.0 - cvar.epsilon)
            # gam_w >= cost_w - nu
            row = {gname: 1.0, "nu": 1.0}
            for var, coef in uc_terms.items():
                row[var] = row.get(var, 0.0) - coef
            for var, coef in slack_terms.items():
                row[var] = row.get(var, 0.0) - coef
            for var, coef in terms.items():
                row[var] = row.get(var, 0.0) - coef
            model.add_constr(row, ">=", base, name=f"cvar_{scn.id}")

    model.set_objective(obj, constant)
    model.check_size(max_vars=MAX_VARS, max_constrs=MAX_CONSTRS)
    return model


def _runs_to_switches(values, initial):
    ups = []
    dns = []
    prev = initial
    for v in values:
        ups.append(1 if v > prev else 0)
        dns.append(1 if v < prev else 0)
        prev = v
    return tuple(ups), tuple(dns)


def extract_plan(net, solution):
    """Typed commitment plan from a solved model's variable assignment."""
    gen_on = {}
    gen_up = {}
    gen_dn = {}
    for g in net.generators:
        vals = []
        for t in range(1, net.horizon + 1):
            raw = solution.value(_zg(g.id, t))
            v = int(round(raw))
            if abs(raw - v) > 1e-6:
                raise NumericalFailure(
                    f"commitment {_zg(g.id, t)} = {raw} is not integral")
            vals.append(v)
        gen_on[g.id] = tuple(vals)
        gen_up[g.id], gen_dn[g.id] = _runs_to_switches(
            vals, 1 if g.initially_on else 0)
    line_on = {}
    line_down = {}
    for line in net.lines:
        vals = []
        for t in range(1, net.horizon + 1):
            raw = solution.value(_zl(line.id, t))
            v = int(round(raw))
            if abs(raw - v) > 1e-6:
                raise NumericalFailure(
                    f"energization {_zl(line.id, t)} = {raw} is not integral")
            vals.append(v)
        line_on[line.id] = tuple(vals)
        # lines start the day energized
        _, downs = _runs_to_switches(vals, 1)
        line_down[line.id] = downs
    return CommitmentPlan(gen_on=gen_on, gen_up=gen_up, gen_dn=gen_dn,
                          line_on=line_on, line_down=line_down)


def _clamped(value, lo, hi):
    if value < lo - 1e-6 or value > hi + 1e-6:
        raise NumericalFailure(f"value {value} escapes box [{lo}, {hi}]")
    return min(max(value, lo), hi)


def extract_dispatch(net, scenarios, solution):
    gen_p = {}
    gen_aux = {}
    line_flow = {}
    theta = {}
    served = {}
    H = net.horizon
    for scn in scenarios.scenarios:
        w = scn.id
        gen_p[w] = {g.id: tuple(
            _clamped(solution.value(_pg(g.id, t, w)), 0.0, g.p_max)
            for t in range(1, H + 1)) for g in net.generators}
        gen_aux[w] = {g.id: tuple(
            solution.value(_paux(g.id, t, w)) for t in range(1, H + 1))
            for g in net.generators}
        line_flow[w] = {line.id: tuple(
            _clamped(solution.value(_pl(line.id, t, w)), line.flow_min,
                     line.flow_max) for t in range(1, H + 1))
            for line in net.lines}
        theta[w] = {b.id: tuple(
            solution.value(_th(b.id, t, w)) for t in range(1, H + 1))
            for b in net.buses}
        served[w] = {d.id: tuple(
            _clamped(solution.value(_xd(d.id, t, w)), 0.0, 1.0)
            for t in range(1, H + 1)) for d in net.demands}
    return DispatchSolution(gen_p=gen_p, gen_aux=gen_aux, line_flow=line_flow,
                            theta=theta, served=served)


def evaluate_costs(net, plan, dispatch, scenarios, *, slack_value=0.0,
                   slack_penalty=1.0, cvar=None):
    """Recompute the cost breakdown from typed solution pieces."""
    H = net.horizon
    dt = net.step_hours
    uc = 0.0
    for g in net.generators:
        if g.id not in plan.gen_on or len(plan.gen_on[g.id]) != H:
            raise DimensionMismatch(f"plan missing generator {g.id}")
        uc += g.startup_cost * sum(plan.gen_up[g.id])
        uc += g.shutdown_cost * sum(plan.gen_dn[g.id])
    slack_cost = slack_penalty * slack_value
    per_scenario = []
    oc_mean = 0.0
    voll_mean = 0.0
    for scn in scenarios.scenarios:
        w = scn.id
        if w not in dispatch.gen_p:
            raise DimensionMismatch(f"dispatch missing scenario {w}")
        oc = sum(g.marginal_cost * p * dt
                 for g in net.generators for p in dispatch.gen_p[w][g.id])
        voll = 0.0
        for d in net.demands:
            curve = _demand_curve(scn, d)
            x = dispatch.served[w][d.id]
            voll += sum(d.voll * curve[t] * (1.0 - x[t]) * dt
                        for t in range(H))
        per_scenario.append(uc + oc + voll + slack_cost)
        oc_mean += scn.probability * oc
        voll_mean += scn.probability * voll
    probs = [s.probability for s in scenarios.scenarios]
    mean = float(sum(p * c for p, c in zip(probs, per_scenario)))
    eps = cvar.epsilon if cvar is not None else 0.95
    beta = cvar.beta if cvar is not None else 0.0
    tail = cvar_tail(per_scenario, probs, eps)
    objective = (1.0 - beta) * mean + beta * tail if beta > 0.0 else mean
    return CostBreakdown(uc=uc, oc=oc_mean, voll=voll_mean,
                         slack_penalty=slack_cost,
                         total=uc + oc_mean + voll_mean + slack_cost,
                         per_scenario=tuple(per_scenario), mean=mean,
                         cvar=tail, mean_cvar_objective=objective)


def solve_day_ahead(net, scenarios, budget, cvar=None, *, line_risk=None,
                    theta_bound=0.6, fix_plan=None, limits=None):
    """Build, solve, and extract the day-ahead plan.

    Returns (CommitmentPlan, DispatchSolution, CostBreakdown). Raises
    InfeasibleModel when no plan satisfies the budget, and SolverLimit
    when the node budget runs out before the gap target is met.
    """
    model = build_day_ahead(net, scenarios, budget, cvar,
                            line_risk=line_risk, theta_bound=theta_bound,
                            fix_plan=fix_plan)
    sol = solve_milp(model, limits or SolveLimits())
    if sol.status == INFEASIBLE:
        hint = ""
        if budget is not None and fix_plan is None:
            hint = f" (budget mode {budget.mode} may be too tight)"
        raise InfeasibleModel(f"day-ahead model is infeasible{hint}")
    if sol.status == UNBOUNDED:
        raise NumericalFailure("day-ahead model reported unbounded")
    if sol.status == NODE_LIMIT:
        raise SolverLimit(
            f"node limit reached with gap {sol.gap!r} after {sol.nodes} nodes")
    if sol.status not in (OPTIMAL, GAP_LIMIT):
        raise NumericalFailure(f"unexpected solver status {sol.status}")
    plan = extract_plan(net, sol)
    dispatch = extract_dispatch(net, scenarios, sol)
    slack_value = sol.values.get("rslack", 0.0)
    penalty = budget.slack_penalty if (
        budget is not None and budget.mode == WFPI_SLACK) else 1.0
    costs = evaluate_costs(net, plan, dispatch, scenarios,
                           slack_value=slack_value, slack_penalty=penalty,
                           cvar=cvar)
    if sol.status == OPTIMAL:
        drift = abs(costs.mean_cvar_objective - sol.objective)
        scale = max(1.0, abs(sol.objective))
        if drift > 1e-5 * scale:
            raise NumericalFailure(
                f"objective {sol.objective} disagrees with recomputed "
                f"breakdown {costs.mean_cvar_objective}")
    return plan, dispatch, costs
