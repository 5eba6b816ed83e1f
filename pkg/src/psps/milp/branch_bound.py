"""LP and MILP entry points: two-phase simplex plus best-first branch and bound.

Node selection is best-bound with plunging: after branching, the child on the
rounded side of the fractional variable is solved immediately (warm dual
start from the parent basis), while its sibling goes on the heap keyed by the
parent bound. Popping a heap node restores the stored basis snapshot and
refactors once. Branching picks the most fractional binary, lowest index on
ties. A rounding heuristic at the root supplies an early incumbent.

All tie-breaks are index-ordered and all arithmetic is deterministic, so
repeated solves of the same model return bit-identical solutions.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from ..errors import NumericalFailure
from .model import (
    GAP_LIMIT,
    INFEASIBLE,
    MilpSolution,
    NODE_LIMIT,
    OPTIMAL,
    UNBOUNDED,
)
from .simplex import RevisedSimplex

INTEGRALITY_TOL = 1e-6
DEFAULT_GAP = 1e-6


@dataclass
class SolveLimits:
    """Stopping controls for solve_milp.

    ``gap`` is the relative MIP gap at which search stops; at or below 1e-6
    the result is reported Optimal, otherwise GapLimit. ``time_sec`` maps to
    the NodeLimit status since the status set has no separate time member.
    """

    gap: float = DEFAULT_GAP
    nodes: int = 200_000
    time_sec: float | None = None


@dataclass
class LpSolution:
    status: str
    objective: float | None
    values: dict
    duals: np.ndarray | None
    reduced_costs: np.ndarray | None
    iterations: int


def _make_simplex(model):
    c, a, senses, b, lb, ub, is_int = model.to_csc()
    sx = RevisedSimplex(c, a, senses, b, lb, ub)
    return sx, is_int


def solve_lp(model):
    """Solve the LP relaxation (binaries relaxed to their bounds)."""
    if model.num_vars == 0:
        return LpSolution(OPTIMAL, model.obj_constant, {}, None, None, 0)
    sx, _ = _make_simplex(model)
    status = sx.solve_from_scratch()
    if status != OPTIMAL:
        return LpSolution(status, None, {}, None, None, sx.iterations)
    x = sx.x_struct()
    values = dict(zip(model.var_names, x.tolist()))
    y = sx.duals()
    d = sx.cost - sx.At @ y
    return LpSolution(OPTIMAL, sx.objective() + model.obj_constant, values,
                      y[:model.num_constrs], d[:model.num_vars], sx.iterations)


def _fractional(x, int_idx):
    frac = x[int_idx] - np.round(x[int_idx])
    dist = np.abs(frac)
    worst = int(np.argmax(np.minimum(dist, 1.0 - dist)))
    return dist, worst


def solve_milp(model, limits=None):
    """Branch-and-bound minimization over the model's binary variables."""
    limits = limits or SolveLimits()
    if model.num_vars == 0:
        return MilpSolution(OPTIMAL, model.obj_constant, {}, gap=0.0, nodes=0)
    int_idx = np.asarray(model.binary_indices(), dtype=np.intp)
    sx, _ = _make_simplex(model)
    t0 = time.monotonic()
    names = model.var_names
    const = model.obj_constant

    status = sx.solve_from_scratch()
    nodes = 1
    if status == INFEASIBLE:
        return MilpSolution(INFEASIBLE, nodes=nodes, iterations=sx.iterations)
    if status == UNBOUNDED:
        return MilpSolution(UNBOUNDED, nodes=nodes, iterations=sx.iterations)
    if int_idx.size == 0:
        x = sx.x_struct()
        return MilpSolution(OPTIMAL, sx.objective() + const,
                            dict(zip(names, x.tolist())), gap=0.0, nodes=nodes,
                            iterations=sx.iterations)

    root_bounds = (sx.lb[int_idx].copy(), sx.ub[int_idx].copy())
    incumbent = None
    incumbent_x = None

    def snap_values(x):
        vals = x.copy()
        vals[int_idx] = np.round(vals[int_idx])
        return dict(zip(names, vals.tolist()))

    def try_incumbent(x, obj):
        nonlocal incumbent, incumbent_x
        if incumbent is None or obj < incumbent - 1e-12:
            incumbent = obj
            incumbent_x = snap_values(x)

    def reset_bounds(changes):
        lbs, ubs = root_bounds
        sx.lb[int_idx] = lbs
        sx.ub[int_idx] = ubs
        for j, lo, hi in changes:
            sx.lb[j] = lo
            sx.ub[j] = hi

    # rounding heuristic: fix binaries at the rounded root solution
    root_snap = sx.snapshot()
    root_obj = sx.objective()
    root_x = sx.x_struct()
    dist, _ = _fractional(root_x, int_idx)
    if np.max(np.minimum(dist, 1.0 - dist)) <= INTEGRALITY_TOL:
        return MilpSolution(OPTIMAL, root_obj + const, snap_values(root_x),
                            gap=0.0, nodes=nodes, iterations=sx.iterations)
    rounded = np.round(root_x[int_idx])
    sx.lb[int_idx] = rounded
    sx.ub[int_idx] = rounded
    try:
        hstat = sx.warm_solve()
        if hstat == OPTIMAL:
            try_incumbent(sx.x_struct(), sx.objective())
    except NumericalFailure:
        pass
    reset_bounds([])
    sx.restore(root_snap)
    sx._recompute_xb()

    heap = []  # (bound, seq, changes tuple, basis snapshot)
    seq = 0
    gap_tol = limits.gap
    opt_tol = min(DEFAULT_GAP, gap_tol)

    def rel_gap(lower):
        # incumbent and node bounds are raw c@x values; the gap is quoted
        # on the full objective so the constant term does not distort it
        if incumbent is None:
            return math.inf
        up = incumbent + const
        denom = max(1.0, abs(up))
        return max(0.0, (up - (lower + const)) / denom)

    def finished(lower):
        return incumbent is not None and rel_gap(lower) <= gap_tol

    cur_changes = []
    cur_obj = root_obj
    diving = True
    final = None
    best_lower = root_obj

    while True:
        if limits.time_sec is not None and time.monotonic() - t0 > limits.time_sec:
            final = NODE_LIMIT
            break
        if nodes >= limits.nodes:
            final = NODE_LIMIT
            break

        open_bounds = [h[0] for h in heap]
        if diving:
            open_bounds.append(cur_obj)
        best_lower = min(open_bounds) if open_bounds else (
            incumbent if incumbent is not None else root_obj)
        if finished(best_lower):
            break

        if not diving:
            if not heap:
                break
            bound, _, changes, snap = heapq.heappop(heap)
            if incumbent is not None and bound >= incumbent - 1e-12:
                continue
            cur_changes = list(changes)
            reset_bounds(cur_changes)
            try:
                sx.restore(snap)
                stat = sx.warm_solve()
            except NumericalFailure:
                stat = _cold_retry(sx)
            nodes += 1
            if stat != OPTIMAL:
                continue
            cur_obj = sx.objective()
            if incumbent is not None and cur_obj >= incumbent - 1e-12:
                continue
            diving = True
            continue

        # diving at a solved node with objective cur_obj
        x = sx.x_struct()
        dist, worst = _fractional(x, int_idx)
        frac_score = np.minimum(dist, 1.0 - dist)
        if float(frac_score[worst]) <= INTEGRALITY_TOL:
            try_incumbent(x, cur_obj)
            diving = False
            continue
        j = int(int_idx[worst])
        value = x[j]
        dive_side = 1.0 if value >= 0.5 else 0.0
        other_side = 1.0 - dive_side
        snap = sx.snapshot()
        heapq.heappush(heap, (cur_obj, seq,
                              tuple(cur_changes + [(j, other_side, other_side)]),
                              snap))
        seq += 1
        cur_changes.append((j, dive_side, dive_side))
        sx.set_bound(j, dive_side, dive_side)
        try:
            stat = sx.warm_solve()
        except NumericalFailure:
            reset_bounds(cur_changes)
            stat = _cold_retry(sx)
        nodes += 1
        if stat != OPTIMAL:
            diving = False
            continue
        cur_obj = sx.objective()
        if incumbent is not None and cur_obj >= incumbent - 1e-12:
            diving = False
            continue

    if incumbent is None:
        if final == NODE_LIMIT:
            return MilpSolution(NODE_LIMIT, nodes=nodes, iterations=sx.iterations)
        return MilpSolution(INFEASIBLE, nodes=nodes, iterations=sx.iterations)

    gap = rel_gap(best_lower) if (heap or diving or final) else 0.0
    if final is None and not heap and not diving:
        gap = 0.0
    if gap <= opt_tol:
        status = OPTIMAL
    elif gap <= gap_tol:
        status = GAP_LIMIT
    else:
        status = NODE_LIMIT
    return MilpSolution(status, incumbent + const, incumbent_x, gap=gap,
                        nodes=nodes, iterations=sx.iterations)


def _cold_retry(sx):
    try:
        return sx.solve_from_scratch()
    except NumericalFailure:
        raise
