"""Command line front end wiring ingestion, solves, simulation, analytics.

Every subcommand reads a JSON config, resolves flag overrides, derives all
randomness from one seed, and writes its artifacts plus a manifest into the
output directory. Failures exit nonzero after printing a machine-readable
JSON line naming the failing stage.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .analytics import (compute_vss_vpi, kmeans_regions, load_fire_records,
                        mae_by_bus, mae_improvement, owip_histogram)
from .errors import (ConfigError, DimensionMismatch, InfeasibleModel,
                     ModelTooLarge, NumericalFailure, ParseError, PspsError,
                     SolverLimit, ValidationError)
from .formulation import (LOG_WIP, N_MINUS_K, WFPI_SLACK, WFPI_SUM,
                          CvarConfig, RiskBudget, load_plan, save_plan,
                          solve_day_ahead)
from .milp import SolveLimits
from .network import coarsen_horizon, load_network
from .risk import (WFPI, WLFP, LineRisk, build_line_risk, load_raster,
                   load_reliability_table)
from .rt import evaluate_plan, load_realized_demand
from .scenarios import (DAY_AHEAD, Scenario, ScenarioSet, gaussian_fan,
                        line_risk_from_day, load_history, project_demand,
                        reduce_scenarios)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER_LIMIT = 4
EXIT_IO = 5

BUDGET_MODES = (WFPI_SUM, N_MINUS_K, WFPI_SLACK, LOG_WIP)


class StageFailure(Exception):
    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


class _stage:
    """Tags any toolkit or I/O error with the pipeline stage it came from."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, (PspsError, OSError,
                                                ValueError, KeyError)):
            raise StageFailure(self.name, exc) from exc
        return False


def derive_seed(seed, stage, index=0):
    """Stable sub-seed for one pipeline stage."""
    digest = hashlib.sha256(f"{seed}:{stage}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def config_hash(command, cfg, seed):
    canon = json.dumps({"command": command, "config": cfg, "seed": seed},
                       sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _exit_code(exc):
    if isinstance(exc, (ParseError, OSError)):
        return EXIT_IO
    if isinstance(exc, InfeasibleModel):
        return EXIT_INFEASIBLE
    if isinstance(exc, (SolverLimit, NumericalFailure, ModelTooLarge)):
        return EXIT_SOLVER_LIMIT
    return EXIT_CONFIG


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _read_config(path):
    with _stage("cli"):
        with open(path) as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {path} is not valid JSON: {exc}")
        if not isinstance(cfg, dict):
            raise ConfigError(f"config {path} must be a JSON object")
    return cfg


def _resolve(cfg, args):
    """Fold CLI flag overrides into the config dict."""
    out = dict(cfg)
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "samples", None) is not None:
        out.setdefault("rt", {})
        out["rt"] = {**out["rt"], "samples": args.samples}
    if getattr(args, "metric", None) is not None:
        out["metric"] = args.metric
    out.setdefault("seed", 0)
    out.setdefault("metric", "wfpi")
    if out["metric"] not in ("wfpi", "wlfp"):
        raise ConfigError(f"metric {out['metric']!r} not one of wfpi, wlfp")
    return out


def _metric_name(cfg):
    return WFPI if cfg["metric"] == "wfpi" else WLFP


def _pick_path(entry, metric_key, what):
    """Config entries may be one path or a {metric: path} table."""
    if isinstance(entry, str):
        return entry
    if isinstance(entry, dict):
        if metric_key not in entry:
            raise ConfigError(f"{what} has no entry for {metric_key!r}")
        return entry[metric_key]
    raise ConfigError(f"{what} must be a path or a metric table")


def _load_net(cfg):
    with _stage("grid-model"):
        if "network" not in cfg:
            raise ConfigError("config needs a network path")
        net = load_network(cfg["network"])
        factor = int(cfg.get("coarsen", 1))
        if factor > 1:
            net = coarsen_horizon(net, factor)
    return net


def _coarsen_curve(curve, factor):
    # same convention as coarsen_horizon: keep every factor-th sample
    if factor <= 1:
        return tuple(curve)
    return tuple(curve[::factor])


def _build_risk(cfg, net):
    with _stage("risk-pipeline"):
        if "line_risk" in cfg:
            return _load_line_risk(cfg["line_risk"])
        for key in ("raster", "reliability_table"):
            if key not in cfg:
                raise ConfigError(f"config needs {key} to build line risk")
        metric = _metric_name(cfg)
        raster = load_raster(_pick_path(cfg["raster"], cfg["metric"],
                                        "raster"), metric)
        table = load_reliability_table(
            _pick_path(cfg["reliability_table"], cfg["metric"],
                       "reliability_table"), metric)
        aggregation = cfg.get("aggregation", "cell-mean")
        return build_line_risk(net, raster, table, aggregation=aggregation)


def _load_line_risk(path):
    with open(path) as fh:
        payload = json.load(fh)
    out = []
    for row in payload:
        out.append(LineRisk(line_id=int(row["line_id"]),
                            pi=float(row["pi"]),
                            log_pi=float(row["log_pi"]),
                            log_one_minus_pi=float(row["log_one_minus_pi"]),
                            cells=tuple(tuple(c) for c in row["cells"]),
                            metric_value=float(row["metric_value"])))
    return out


def _dump_line_risk(line_risk, path):
    payload = [{"line_id": lr.line_id, "pi": lr.pi, "log_pi": lr.log_pi,
                "log_one_minus_pi": lr.log_one_minus_pi,
                "cells": [list(c) for c in lr.cells],
                "metric_value": lr.metric_value}
               for lr in sorted(line_risk, key=lambda r: r.line_id)]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _reliability_table(cfg):
    metric = _metric_name(cfg)
    return load_reliability_table(
        _pick_path(cfg["reliability_table"], cfg["metric"],
                   "reliability_table"), metric)


def _base_scenarios(net):
    demand = {d.id: tuple(d.base_profile) for d in net.demands}
    total = tuple(sum(d.base_profile[t] for d in net.demands)
                  for t in range(net.horizon))
    return ScenarioSet(scenarios=(Scenario(
        id=0, probability=1.0, demand=demand, line_risk={},
        total_demand=total),), kind=DAY_AHEAD)


def _build_scenarios(cfg, net):
    with _stage("scenario-engine"):
        options = cfg.get("scenario", {})
        source = options.get("source", "base")
        if source == "base":
            return _base_scenarios(net)
        if "history" not in cfg or "demand" not in cfg["history"]:
            raise ConfigError(f"scenario source {source!r} needs "
                              "history.demand")
        history = load_history(cfg["history"]["demand"],
                               cfg["history"].get("line_metric"))
        factor = int(cfg.get("coarsen", 1))
        if factor > 1:
            history = [replace(day, total_demand_curve=_coarsen_curve(
                day.total_demand_curve, factor)) for day in history]
        table = None
        if "reliability_table" in cfg:
            table = _reliability_table(cfg)
        if source == "reduce":
            k = int(options.get("k", 5))
            days, probs = reduce_scenarios(history, k)
            scns = []
            for i, (day, prob) in enumerate(zip(days, probs)):
                risk = line_risk_from_day(day, table) if table else {}
                scns.append(Scenario(
                    id=i, probability=prob,
                    demand=project_demand(day.total_demand_curve, net),
                    line_risk=risk,
                    total_demand=tuple(float(v)
                                       for v in day.total_demand_curve)))
            return ScenarioSet(scenarios=tuple(scns), kind=DAY_AHEAD)
        if source == "fan":
            mode = options.get("fan_probability_mode", "normal-partition")
            return gaussian_fan(history, net=net, table=table,
                                fan_probability_mode=mode)
        raise ConfigError(f"unknown scenario source {source!r}")


def _budget(cfg):
    with _stage("cli"):
        block = cfg.get("budget")
        if block is None:
            return None
        if "mode" not in block:
            raise ConfigError("budget block needs a mode")
        mode = block["mode"]
        if mode not in BUDGET_MODES:
            raise ConfigError(f"budget mode {mode!r} not one of "
                              f"{BUDGET_MODES}")
        kwargs = {key: block[key] for key in
                  ("r_tol", "k", "pi_tol", "r_slack_max", "slack_penalty",
                   "log_semantics") if key in block}
        return RiskBudget(mode=mode, **kwargs)


def _cvar(cfg):
    with _stage("cli"):
        block = cfg.get("cvar")
        if block is None:
            return None
        return CvarConfig(beta=float(block.get("beta", 0.0)),
                          epsilon=float(block.get("epsilon", 0.95)))


def _limits(cfg):
    with _stage("cli"):
        block = cfg.get("solver")
        if block is None:
            return None
        unknown = set(block) - {"gap", "nodes", "time_sec"}
        if unknown:
            raise ConfigError(f"unknown solver keys {sorted(unknown)}")
        kwargs = {}
        if "gap" in block:
            kwargs["gap"] = float(block["gap"])
        if "nodes" in block:
            kwargs["nodes"] = int(block["nodes"])
        if "time_sec" in block:
            kwargs["time_sec"] = float(block["time_sec"])
        return SolveLimits(**kwargs)


def _manifest(out_dir, command, cfg, artifacts):
    payload = {
        "tool": "psps-toolkit",
        "version": __version__,
        "command": command,
        "seed": cfg["seed"],
        "config": cfg,
        "config_hash": config_hash(command, cfg, cfg["seed"]),
        "artifacts": sorted(artifacts),
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    _write_json(out_dir / "manifest.json", payload)


def _write_plan_artifacts(out_dir, net, plan, dispatch, costs):
    save_plan(plan, out_dir / "plan.json")
    gen_rows = []
    for gid in sorted(plan.gen_on):
        for t in range(net.horizon):
            gen_rows.append([gid, t + 1, plan.gen_on[gid][t],
                             plan.gen_up[gid][t], plan.gen_dn[gid][t]])
    _write_csv(out_dir / "plan_generators.csv",
               ["generator_id", "step", "on", "startup", "shutdown"],
               gen_rows)
    line_rows = []
    for lid in sorted(plan.line_on):
        for t in range(net.horizon):
            line_rows.append([lid, t + 1, plan.line_on[lid][t],
                              plan.line_down[lid][t]])
    _write_csv(out_dir / "plan_lines.csv",
               ["line_id", "step", "energized", "shutoff"], line_rows)
    rows = []
    for w in sorted(dispatch.gen_p):
        for kind, block in (("gen_p", dispatch.gen_p),
                            ("gen_aux", dispatch.gen_aux),
                            ("line_flow", dispatch.line_flow),
                            ("theta", dispatch.theta),
                            ("served", dispatch.served)):
            for eid in sorted(block[w]):
                for t, value in enumerate(block[w][eid]):
                    rows.append([w, kind, eid, t + 1, repr(float(value))])
    _write_csv(out_dir / "dispatch.csv",
               ["scenario", "kind", "id", "step", "value"], rows)
    _write_json(out_dir / "costs.json", {
        "uc": costs.uc, "oc": costs.oc, "voll": costs.voll,
        "slack_penalty": costs.slack_penalty, "total": costs.total,
        "per_scenario": list(costs.per_scenario),
        "mean": costs.mean, "cvar": costs.cvar,
        "mean_cvar_objective": costs.mean_cvar_objective,
    })
    return ["plan.json", "plan_generators.csv", "plan_lines.csv",
            "dispatch.csv", "costs.json"]


def _count_active_risky(plan, line_risk):
    """Lines with positive ignition risk kept energized the whole day."""
    risky = {lr.line_id for lr in line_risk if lr.pi > 0.0}
    return sum(1 for lid, pattern in plan.line_on.items()
               if lid in risky and all(pattern))


def _has_risk_inputs(cfg):
    return "line_risk" in cfg or "raster" in cfg


def _cmd_solve_da(cfg, out_dir):
    net = _load_net(cfg)
    budget = _budget(cfg)
    if _has_risk_inputs(cfg):
        line_risk = _build_risk(cfg, net)
    elif budget is None:
        line_risk = []
    else:
        with _stage("cli"):
            raise ConfigError("a risk budget needs line_risk or "
                              "raster + reliability_table")
    scenarios = _build_scenarios(cfg, net)
    cvar_config = _cvar(cfg)
    with _stage("psps-formulation"):
        plan, dispatch, costs = solve_day_ahead(
            net, scenarios, budget, cvar=cvar_config, line_risk=line_risk,
            theta_bound=float(cfg.get("theta_bound", 0.6)),
            limits=_limits(cfg))
    with _stage("io"):
        artifacts = _write_plan_artifacts(out_dir, net, plan, dispatch,
                                          costs)
        _dump_line_risk(line_risk, out_dir / "line_risk.json")
        artifacts.append("line_risk.json")
    return artifacts


def _rt_report(cfg, net, plan, line_risk, *, seed, out_dir):
    rt_cfg = cfg.get("rt", {})
    samples = int(rt_cfg.get("samples", 200))
    onset = rt_cfg.get("onset", "uniform")
    demand = None
    if "realized_demand" in cfg:
        with _stage("io"):
            demand = load_realized_demand(cfg["realized_demand"])
            factor = int(cfg.get("coarsen", 1))
            if factor > 1:
                demand = {k: _coarsen_curve(v, factor)
                          for k, v in demand.items()}
    with _stage("rt-evaluator"):
        report = evaluate_plan(net, plan, line_risk, n=samples, seed=seed,
                               onset=onset, demand=demand,
                               theta_bound=float(cfg.get("theta_bound",
                                                         0.6)),
                               limits=_limits(cfg))
    payload = {
        "expected_cost": report.expected_cost,
        "median_cost": report.median_cost,
        "p95_cost": report.p95_cost,
        "realized_risk": report.realized_risk,
        "demand_served_mwh": report.demand_served_mwh,
        "aag_mw": report.aag_mw,
        "onset": report.onset,
        "n": report.n,
        "seed": report.seed,
        "per_scenario": list(report.per_scenario),
    }
    _write_json(out_dir / "rt_report.json", payload)
    _write_csv(out_dir / "rt_scenarios.csv", ["scenario_id", "cost"],
               [[i, repr(c)] for i, c in enumerate(report.per_scenario)])
    return report


def _cmd_simulate_rt(cfg, out_dir):
    net = _load_net(cfg)
    with _stage("cli"):
        if "plan" not in cfg:
            raise ConfigError("simulate-rt needs a plan path")
    with _stage("io"):
        plan = load_plan(cfg["plan"])
    line_risk = _build_risk(cfg, net)
    _rt_report(cfg, net, plan, line_risk,
               seed=derive_seed(cfg["seed"], "rt"), out_dir=out_dir)
    return ["rt_report.json", "rt_scenarios.csv"]


def _cmd_sweep(cfg, out_dir):
    net = _load_net(cfg)
    line_risk = _build_risk(cfg, net)
    scenarios = _build_scenarios(cfg, net)
    cvar_config = _cvar(cfg)
    with _stage("cli"):
        block = cfg.get("sweep")
        if not block:
            raise ConfigError("sweep needs a sweep block with a grid")
        grids = [(param, block[key]) for param, key in
                 (("pi_tol", "pi_tol_grid"), ("r_tol", "r_tol_grid"),
                  ("k", "k_grid")) if key in block]
        if len(grids) != 1:
            raise ConfigError("sweep wants exactly one of pi_tol_grid, "
                              "r_tol_grid, k_grid")
        param, grid = grids[0]
        base_budget = cfg.get("budget") or {}
        mode = base_budget.get("mode") or {
            "pi_tol": LOG_WIP, "r_tol": WFPI_SUM, "k": N_MINUS_K}[param]
    rows = []
    artifacts = []
    for i, value in enumerate(grid):
        point_cfg = dict(cfg)
        point_cfg["budget"] = {**base_budget, "mode": mode, param: value}
        budget = _budget(point_cfg)
        sub = out_dir / f"point_{i:02d}"
        sub.mkdir(parents=True, exist_ok=True)
        with _stage("psps-formulation"):
            plan, dispatch, costs = solve_day_ahead(
                net, scenarios, budget, cvar=cvar_config,
                line_risk=line_risk,
                theta_bound=float(cfg.get("theta_bound", 0.6)),
                limits=_limits(cfg))
        with _stage("io"):
            _write_plan_artifacts(sub, net, plan, dispatch, costs)
        report = _rt_report(cfg, net, plan, line_risk,
                            seed=derive_seed(cfg["seed"], "rt", i),
                            out_dir=sub)
        rows.append([i, param, repr(float(value)),
                     _count_active_risky(plan, line_risk),
                     repr(costs.total), repr(report.expected_cost),
                     repr(report.demand_served_mwh), repr(report.aag_mw)])
        artifacts.append(f"point_{i:02d}")
    _write_csv(out_dir / "sweep_summary.csv",
               ["point", "parameter", "value", "nzr_active_lines",
                "da_cost", "rt_expected_cost", "demand_served_mwh",
                "aag_mw"], rows)
    artifacts.append("sweep_summary.csv")
    return artifacts


def _cmd_risk_build(cfg, out_dir):
    net = _load_net(cfg)
    line_risk = _build_risk(cfg, net)
    with _stage("io"):
        _dump_line_risk(line_risk, out_dir / "line_risk.json")
        _write_csv(out_dir / "line_risk.csv",
                   ["line_id", "pi", "metric_value", "zero_risk"],
                   [[lr.line_id, repr(lr.pi), repr(lr.metric_value),
                     int(lr.zero_risk)]
                    for lr in sorted(line_risk, key=lambda r: r.line_id)])
    return ["line_risk.json", "line_risk.csv"]


def _cmd_analyze_vss(cfg, out_dir):
    net = _load_net(cfg)
    line_risk = _build_risk(cfg, net) if _has_risk_inputs(cfg) else None
    scenarios = _build_scenarios(cfg, net)
    budget = _budget(cfg)
    cvar_config = _cvar(cfg)
    with _stage("analytics"):
        report = compute_vss_vpi(net, scenarios, budget, cvar_config,
                                 line_risk=line_risk,
                                 theta_bound=float(cfg.get("theta_bound",
                                                           0.6)),
                                 limits=_limits(cfg))
    with _stage("io"):
        _write_json(out_dir / "vss_report.json", {
            "ev": report.ev, "mrws": report.mrws, "mrrp": report.mrrp,
            "mrev": report.mrev, "mrvpi": report.mrvpi,
            "mrvss": report.mrvss, "beta": report.beta,
            "epsilon": report.epsilon,
        })
        _write_csv(out_dir / "vss_scenarios.csv",
                   ["scenario", "clairvoyant_cost", "ev_plan_cost"],
                   [[i, repr(a), repr(b)] for i, (a, b) in
                    enumerate(zip(report.per_scenario_ws,
                                  report.per_scenario_ev))])
    return ["vss_report.json", "vss_scenarios.csv"]


def _read_series_csv(path, key_name):
    """Rows of key,m1..m12 into {key: 12-tuple}."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != key_name or len(header) != 13:
            raise ParseError(f"series file needs {key_name},m1..m12 "
                             "columns", path=str(path))
        for i, row in enumerate(reader, start=2):
            try:
                out[int(row[0])] = tuple(float(v) for v in row[1:13])
            except (ValueError, IndexError) as exc:
                raise ParseError(f"bad series row: {exc}", path=str(path),
                                 line=i)
    return out


def _cmd_analyze_mae(cfg, out_dir):
    with _stage("cli"):
        block = cfg.get("mae")
        if not block:
            raise ConfigError("analyze mae needs a mae block")
        for key in ("wip", "owip", "assignment"):
            if key not in block:
                raise ConfigError(f"mae block needs {key}")
    with _stage("io"):
        assignment = {}
        with open(block["assignment"], newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or \
                    not {"bus", "cluster"} <= set(reader.fieldnames):
                raise ParseError("assignment needs bus, cluster columns",
                                 path=str(block["assignment"]))
            for row in reader:
                assignment[int(row["bus"])] = int(row["cluster"])
        wip = {m: _read_series_csv(p, "bus")
               for m, p in block["wip"].items()}
        owip = {m: _read_series_csv(p, "cluster")
                for m, p in block["owip"].items()}
    with _stage("analytics"):
        maes = {m: mae_by_bus(wip[m], owip[m], assignment) for m in wip}
        payload = {"mae": {m: {str(b): v for b, v in by_bus.items()}
                           for m, by_bus in maes.items()}}
        rows = []
        if set(maes) == {"wfpi", "wlfp"}:
            improvement = {
                bus: mae_improvement(maes["wfpi"][bus], maes["wlfp"][bus])
                for bus in maes["wfpi"]}
            payload["improvement_pct"] = {
                str(b): v for b, v in improvement.items()}
            rows = [[bus, repr(maes["wfpi"][bus]), repr(maes["wlfp"][bus]),
                     repr(improvement[bus])] for bus in sorted(improvement)]
    with _stage("io"):
        _write_json(out_dir / "mae_report.json", payload)
        if rows:
            _write_csv(out_dir / "mae.csv",
                       ["bus", "mae_wfpi", "mae_wlfp", "improvement_pct"],
                       rows)
    return ["mae_report.json"] + (["mae.csv"] if rows else [])


def _cmd_analyze_clusters(cfg, out_dir):
    with _stage("cli"):
        if "fire_records" not in cfg:
            raise ConfigError("analyze clusters needs fire_records")
        block = cfg.get("clusters", {})
        k = int(block.get("k", 6))
    with _stage("io"):
        records = load_fire_records(cfg["fire_records"])
    with _stage("analytics"):
        result = kmeans_regions(records, k,
                                derive_seed(cfg["seed"], "clusters"))
        years = int(block.get("years", 0))
        if years < 1:
            years = max(r.date.year for r in records) - \
                min(r.date.year for r in records) + 1
        owip_rows = []
        owip_payload = {}
        for j in range(k):
            members = [r for r, a in zip(records, result.assignments)
                       if a == j]
            area = result.hull_areas_km2[j]
            if area > 0.0:
                hist = owip_histogram(members, area, years)
            else:
                hist = (0.0,) * 12
            owip_payload[str(j)] = list(hist)
            for m, v in enumerate(hist):
                owip_rows.append([j, m + 1, repr(v)])
    with _stage("io"):
        _write_json(out_dir / "clusters.json", {
            "k": k, "years": years,
            "centroids": [list(c) for c in result.centroids],
            "hull_areas_km2": list(result.hull_areas_km2),
            "owip": owip_payload,
        })
        _write_csv(out_dir / "cluster_assignments.csv",
                   ["record", "date", "latitude", "longitude", "acres",
                    "cluster"],
                   [[i, r.date.isoformat(), repr(r.latitude),
                     repr(r.longitude), repr(r.acres), a]
                    for i, (r, a) in enumerate(zip(records,
                                                   result.assignments))])
        _write_csv(out_dir / "cluster_owip.csv",
                   ["cluster", "month", "owip"], owip_rows)
    return ["clusters.json", "cluster_assignments.csv", "cluster_owip.csv"]


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="psps",
        description="Plan and stress-test public safety power shutoffs.")
    parser.add_argument("--version", action="version",
                        version=f"psps-toolkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--metric", choices=["wfpi", "wlfp"], default=None)

    for name in ("solve-da", "simulate-rt", "sweep"):
        common(sub.add_parser(name))
    analyze = sub.add_parser("analyze")
    analyze.add_argument("what", choices=["vss", "mae", "clusters"])
    common(analyze)
    risk = sub.add_parser("risk")
    risk.add_argument("what", choices=["build"])
    common(risk)
    return parser


_COMMANDS = {
    "solve-da": _cmd_solve_da,
    "simulate-rt": _cmd_simulate_rt,
    "sweep": _cmd_sweep,
    ("analyze", "vss"): _cmd_analyze_vss,
    ("analyze", "mae"): _cmd_analyze_mae,
    ("analyze", "clusters"): _cmd_analyze_clusters,
    ("risk", "build"): _cmd_risk_build,
}


def run_pipeline(command, cfg, out_dir):
    """Execute one subcommand on a resolved config; returns artifact names."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = _COMMANDS[command]
    artifacts = handler(cfg, out_dir)
    with _stage("io"):
        name = command if isinstance(command, str) else " ".join(command)
        _manifest(out_dir, name, cfg, artifacts)
    return artifacts


def main(argv=None):
    args = _build_parser().parse_args(argv)
    command = args.command
    if command in ("analyze", "risk"):
        command = (command, args.what)
    try:
        cfg = _read_config(args.config)
        with _stage("cli"):
            cfg = _resolve(cfg, args)
        out_dir = args.out or cfg.get("out") or "psps-out"
        run_pipeline(command, cfg, out_dir)
    except StageFailure as failure:
        cause = failure.cause
        code = _exit_code(cause)
        print(json.dumps({
            "stage": failure.stage,
            "error": type(cause).__name__,
            "message": str(cause),
            "exit_code": code,
        }, sort_keys=True))
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
