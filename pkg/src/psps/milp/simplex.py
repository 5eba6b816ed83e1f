"""Bounded-variable revised simplex on a sparse LU basis factorization.

Columns are structural variables, then one logical (slack) per row, then one
artificial per row. Slack bounds encode the row sense (<=: [0,inf),
==: [0,0], >=: (-inf,0]). Artificial columns are +e_i; their bounds are set
from the cold-start residual during phase 1 and pinned to [0,0] afterwards.

The basis is held as a sparse LU factorization plus a product-form eta file
and refactorized every `refactor_every` pivots, so one pivot costs a pair of
triangular solves and an O(m) update per eta instead of an O(m^2) dense
inverse update. Reduced costs are maintained incrementally between pivots
and rebuilt at every refresh; an optimality claim is only accepted against
freshly rebuilt reduced costs.

A bounded-variable dual simplex re-solves after bound or right-hand-side
edits from a previously optimal basis (costs do not change under branching,
so the parent basis stays dual feasible); branch-and-bound and the Monte
Carlo recourse chains rely on it. The dual gets a short iteration leash:
past it a restart is cheaper than riding out a degenerate stall, so
warm_solve falls back to a cold start.

Anti-cycling: Dantzig pricing switches to Bland's rule after a long run of
consecutive degenerate pivots. Instances are desk scale by contract
(~5,000 rows/columns).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from ..errors import NumericalFailure
from .model import EQUAL, GREATER_EQUAL, INFEASIBLE, LESS_EQUAL, OPTIMAL, UNBOUNDED

NB_LOWER = 0
NB_UPPER = 1
BASIC = 2
NB_FREE = 3

_INF = math.inf


class RevisedSimplex:
    """Two-phase primal + dual simplex with bounded variables."""

    def __init__(self, c, a, senses, b, lb, ub,
                 feas_tol=1e-8, cost_tol=1e-9, pivot_tol=1e-9,
                 refactor_every=100, max_iter=None):
        a_sp = sparse.csc_matrix(a) if sparse.issparse(a) else \
            sparse.csc_matrix(np.asarray(a, dtype=float))
        self.m, self.n = a_sp.shape
        m, n = self.m, self.n
        self.ncols = n + 2 * m
        self.b = np.asarray(b, dtype=float).copy()
        self.feas_tol = feas_tol
        self.cost_tol = cost_tol
        self.pivot_tol = pivot_tol
        self.refactor_every = refactor_every
        self.max_iter = max_iter or max(20000, 50 * (m + n))

        self.lb = np.full(self.ncols, -_INF)
        self.ub = np.full(self.ncols, _INF)
        self.lb[:n] = lb
        self.ub[:n] = ub
        for i, s in enumerate(senses):
            if s == LESS_EQUAL:
                self.lb[n + i], self.ub[n + i] = 0.0, _INF
            elif s == GREATER_EQUAL:
                self.lb[n + i], self.ub[n + i] = -_INF, 0.0
            elif s == EQUAL:
                self.lb[n + i], self.ub[n + i] = 0.0, 0.0
            else:
                raise ValueError(f"unknown sense {s!r}")
        # artificials disabled until a cold start
        self.lb[n + m:] = 0.0
        self.ub[n + m:] = 0.0

        eye = sparse.identity(m, format="csc", dtype=float)
        full = sparse.hstack([a_sp, eye, eye], format="csc")
        full.sort_indices()
        self._acsc = full
        self._colptr = full.indptr
        self._colidx = full.indices
        self._colval = full.data
        self.At = full.T.tocsr()    # (ncols, m): row j holds column j
        self.A_rows = full.tocsr()  # (m, ncols) for residuals

        self.cost = np.zeros(self.ncols)
        self.cost[:n] = c

        self.basis = np.arange(n + m, n + 2 * m)
        self.vstat = np.zeros(self.ncols, dtype=np.int8)
        self.xB = np.zeros(m)
        self.lu = None
        self.etas = []  # (row, w = Binv_old @ a_enter, w[row])
        self.d = np.zeros(self.ncols)
        self.iterations = 0
        self._refactor()

    # -- basis factorization -------------------------------------------------

    def _dense_col(self, j):
        s, e = self._colptr[j], self._colptr[j + 1]
        v = np.zeros(self.m)
        v[self._colidx[s:e]] = self._colval[s:e]
        return v

    def _refactor(self):
        self.etas = []
        if self.m == 0:
            self.lu = None
            return
        try:
            self.lu = splu(sparse.csc_matrix(self._acsc[:, self.basis]))
        except (RuntimeError, ValueError) as exc:
            raise NumericalFailure("singular basis during refactorization") from exc

    def _ftran(self, v):
        if self.m == 0:
            return np.zeros(0)
        x = self.lu.solve(v)
        for r, w, piv in self.etas:
            t = x[r]
            if t != 0.0:
                t /= piv
                x -= w * t
                x[r] = t
        return x

    def _btran(self, v):
        if self.m == 0:
            return np.zeros(0)
        u = np.array(v, dtype=float)
        for r, w, piv in reversed(self.etas):
            u[r] -= (w @ u - u[r]) / piv
        return self.lu.solve(u, trans="T")

    def _btran_unit(self, r):
        v = np.zeros(self.m)
        v[r] = 1.0
        return self._btran(v)

    def _push_eta(self, r, w):
        self.etas.append((r, w, w[r]))

    # -- bookkeeping -----------------------------------------------------------

    def _nonbasic_values(self):
        x = np.where(self.vstat == NB_UPPER, self.ub, self.lb)
        x[self.vstat == NB_FREE] = 0.0
        x[~np.isfinite(x)] = 0.0
        x[self.vstat == BASIC] = 0.0
        return x

    def _recompute_xb(self):
        x = self._nonbasic_values()
        self.xB = self._ftran(self.b - self.A_rows @ x)

    def _refresh_d(self, cost):
        y = self._btran(cost[self.basis])
        self.d = cost - self.At @ y

    def _rebuild(self, cost):
        self._refactor()
        self._recompute_xb()
        self._refresh_d(cost)

    def x_full(self):
        x = self._nonbasic_values()
        x[self.basis] = self.xB
        return x

    def x_struct(self):
        return self.x_full()[:self.n]

    def duals(self):
        return self._btran(self.cost[self.basis])

    def objective(self):
        return float(self.cost @ self.x_full())

    def max_infeasibility(self):
        if not self.m:
            return 0.0
        lo = self.lb[self.basis] - self.xB
        hi = self.xB - self.ub[self.basis]
        return max(float(np.max(lo)), float(np.max(hi)), 0.0)

    def snapshot(self):
        return self.basis.copy(), self.vstat.copy()

    def restore(self, snap):
        basis, vstat = snap
        self.basis = basis.copy()
        self.vstat = vstat.copy()
        self._refactor()
        self._recompute_xb()

    def set_bound(self, j, lo, hi):
        self.lb[j] = lo
        self.ub[j] = hi

    def set_rhs(self, i, val):
        self.b[i] = val

    # -- cold start ------------------------------------------------------------

    def solve_from_scratch(self):
        n, m = self.n, self.m
        self.vstat[:] = NB_LOWER
        finite_lb = np.isfinite(self.lb)
        finite_ub = np.isfinite(self.ub)
        self.vstat[~finite_lb & finite_ub] = NB_UPPER
        self.vstat[~finite_lb & ~finite_ub] = NB_FREE

        slk = np.arange(n, n + m)
        art = np.arange(n + m, n + 2 * m)
        self.lb[art] = 0.0
        self.ub[art] = 0.0
        x = self._nonbasic_values()
        resid = self.b - self.A_rows @ x
        # crash basis: a row whose slack range covers the residual starts on
        # its slack; only the rest get artificials (bounds [0, resid] signed,
        # phase-1 cost sign(resid))
        covered = (resid >= self.lb[slk] - self.feas_tol) & \
            (resid <= self.ub[slk] + self.feas_tol)
        need_art = ~covered
        self.basis = np.where(covered, slk, art)
        self.vstat[self.basis] = BASIC
        self.xB = resid.copy()
        self.lb[art[need_art]] = np.minimum(resid[need_art], 0.0)
        self.ub[art[need_art]] = np.maximum(resid[need_art], 0.0)
        self._refactor()

        if need_art.any():
            phase1 = np.zeros(self.ncols)
            phase1[art[need_art]] = np.where(resid[need_art] >= 0.0, 1.0, -1.0)
            status = self._primal(phase1, phase=1)
            if status != OPTIMAL:
                raise NumericalFailure("phase 1 did not terminate cleanly")
            if float(phase1 @ self.x_full()) > 1e-7:
                return INFEASIBLE
            self.lb[art] = 0.0
            self.ub[art] = 0.0
            nonbasic_art = self.vstat[art] != BASIC
            self.vstat[art[nonbasic_art]] = NB_LOWER
        return self._finish_primal()

    def _finish_primal(self):
        status = self._primal(self.cost, phase=2)
        if status == OPTIMAL and self.max_infeasibility() > 1e-6:
            self._refactor()
            self._recompute_xb()
            status = self._primal(self.cost, phase=2)
            if self.max_infeasibility() > 1e-6:
                raise NumericalFailure("primal simplex ended infeasible")
        return status

    # -- warm start ------------------------------------------------------------

    def warm_solve(self):
        """Re-solve after bound/rhs edits from a dual-feasible basis.

        Heavily degenerate bases can stall the dual for thousands of pivots
        while a cold start needs a few hundred, so the dual runs on a short
        leash and a stall falls back to solve_from_scratch.
        """
        self._recompute_xb()
        status = self._dual(self.cost, limit=max(200, 2 * (self.m + self.n)))
        if status is None:
            return self.solve_from_scratch()
        if status == INFEASIBLE:
            return INFEASIBLE
        return self._finish_primal()

    # -- primal iteration --------------------------------------------------------

    def _primal(self, cost, phase):
        m = self.m
        bland = False
        degen_streak = 0
        bland_threshold = 5 * (m + self.ncols)
        retried = False
        self._refresh_d(cost)
        fresh_d = True
        for _ in range(self.max_iter):
            self.iterations += 1
            if len(self.etas) >= self.refactor_every:
                self._rebuild(cost)
                fresh_d = True
            d = self.d
            movable = self.ub > self.lb
            cand = ((self.vstat == NB_LOWER) & (d < -self.cost_tol) & movable)
            cand |= ((self.vstat == NB_UPPER) & (d > self.cost_tol) & movable)
            cand |= ((self.vstat == NB_FREE) & (np.abs(d) > self.cost_tol))
            if not cand.any():
                if fresh_d:
                    return OPTIMAL
                self._refresh_d(cost)
                fresh_d = True
                continue
            if bland:
                e = int(np.flatnonzero(cand)[0])
            else:
                score = np.where(cand, np.abs(d), -1.0)
                e = int(np.argmax(score))
            if self.vstat[e] == NB_LOWER:
                direction = 1.0
            elif self.vstat[e] == NB_UPPER:
                direction = -1.0
            else:
                direction = 1.0 if d[e] < 0 else -1.0

            w = self._ftran(self._dense_col(e))
            rate = -direction * w
            blb = self.lb[self.basis]
            bub = self.ub[self.basis]
            pos = rate > self.pivot_tol
            neg = rate < -self.pivot_tol
            # Harris pass 1: minimum ratio with bounds relaxed by feas_tol
            relaxed = np.full(m, _INF)
            exact = np.full(m, _INF)
            with np.errstate(invalid="ignore"):
                relaxed[pos] = (bub[pos] - self.xB[pos] + self.feas_tol) / rate[pos]
                relaxed[neg] = (blb[neg] - self.xB[neg] - self.feas_tol) / rate[neg]
                exact[pos] = np.maximum((bub[pos] - self.xB[pos]) / rate[pos], 0.0)
                exact[neg] = np.maximum((blb[neg] - self.xB[neg]) / rate[neg], 0.0)
            theta_rel = float(np.min(relaxed)) if m else _INF
            flip_len = _INF
            if math.isfinite(self.lb[e]) and math.isfinite(self.ub[e]):
                flip_len = self.ub[e] - self.lb[e]
            if theta_rel == _INF and flip_len == _INF:
                if phase == 1:
                    if retried:
                        raise NumericalFailure("phase 1 claims unbounded")
                    retried = True
                    self._rebuild(cost)
                    fresh_d = True
                    continue
                return UNBOUNDED

            if flip_len <= theta_rel:
                self.vstat[e] = NB_UPPER if self.vstat[e] == NB_LOWER else NB_LOWER
                self.xB += rate * flip_len
                if flip_len <= 1e-10:
                    degen_streak += 1
                    if degen_streak >= bland_threshold:
                        bland = True
                else:
                    degen_streak = 0
                continue

            # Harris pass 2: among rows within the relaxed ratio take the
            # biggest pivot, so tiny denominators never set the step
            eligible = np.flatnonzero(exact <= theta_rel)
            if eligible.size == 0:
                eligible = np.array([int(np.argmin(exact))])
            if bland:
                r = int(eligible[np.argmin(self.basis[eligible])])
            else:
                r = int(eligible[np.argmax(np.abs(rate[eligible]))])
            theta = float(exact[r])
            if abs(w[r]) < self.pivot_tol:
                self._rebuild(cost)
                fresh_d = True
                continue

            if theta <= 1e-10:
                degen_streak += 1
                if degen_streak >= bland_threshold:
                    bland = True
            else:
                degen_streak = 0

            if self.vstat[e] == NB_LOWER:
                base_val = self.lb[e]
            elif self.vstat[e] == NB_UPPER:
                base_val = self.ub[e]
            else:
                base_val = 0.0
            # pivot row of the outgoing basis prices the reduced-cost update
            alpha = self.At @ self._btran_unit(r)
            leave = self.basis[r]
            self.xB += rate * theta
            self.vstat[leave] = NB_UPPER if rate[r] > 0 else NB_LOWER
            if self.vstat[leave] == NB_LOWER and not math.isfinite(self.lb[leave]):
                self.vstat[leave] = NB_UPPER if math.isfinite(self.ub[leave]) else NB_FREE
            elif self.vstat[leave] == NB_UPPER and not math.isfinite(self.ub[leave]):
                self.vstat[leave] = NB_LOWER if math.isfinite(self.lb[leave]) else NB_FREE
            if phase == 1 and leave >= self.n + self.m:
                rest = self.lb[leave] if self.vstat[leave] == NB_LOWER else self.ub[leave]
                if abs(rest) <= 1e-9:
                    # departed artificial: pin so it never re-enters
                    self.lb[leave] = 0.0
                    self.ub[leave] = 0.0
            self.basis[r] = e
            self.vstat[e] = BASIC
            self.xB[r] = base_val + direction * theta
            self._push_eta(r, w)
            self.d = self.d - (self.d[e] / w[r]) * alpha
            self.d[e] = 0.0
            fresh_d = False
        raise NumericalFailure("primal simplex iteration limit")

    # -- dual iteration ----------------------------------------------------------

    def _dual(self, cost, limit=None):
        m = self.m
        if m == 0:
            return OPTIMAL
        self._refresh_d(cost)
        for _ in range(limit if limit is not None else self.max_iter):
            self.iterations += 1
            if len(self.etas) >= self.refactor_every:
                self._rebuild(cost)
            blb = self.lb[self.basis]
            bub = self.ub[self.basis]
            lo_viol = blb - self.xB
            hi_viol = self.xB - bub
            viol = np.maximum(lo_viol, hi_viol)
            r = int(np.argmax(viol))
            if viol[r] <= self.feas_tol:
                return OPTIMAL
            sigma = 1.0 if hi_viol[r] >= lo_viol[r] else -1.0

            alpha = self.At @ self._btran_unit(r)
            movable = self.ub > self.lb
            if sigma > 0:
                c_lo = (self.vstat == NB_LOWER) & (alpha > self.pivot_tol) & movable
                c_up = (self.vstat == NB_UPPER) & (alpha < -self.pivot_tol) & movable
            else:
                c_lo = (self.vstat == NB_LOWER) & (alpha < -self.pivot_tol) & movable
                c_up = (self.vstat == NB_UPPER) & (alpha > self.pivot_tol) & movable
            c_fr = (self.vstat == NB_FREE) & (np.abs(alpha) > self.pivot_tol)
            cand = c_lo | c_up | c_fr
            if not cand.any():
                return INFEASIBLE
            idx = np.flatnonzero(cand)
            a_abs = np.abs(alpha[idx])
            d_abs = np.abs(self.d[idx])
            # Harris-style: min relaxed ratio, then biggest pivot within it
            trel = float(np.min((d_abs + 1e-7) / a_abs))
            elig = idx[d_abs / a_abs <= trel]
            e = int(elig[np.argmax(np.abs(alpha[elig]))])

            w = self._ftran(self._dense_col(e))
            if abs(w[r]) < self.pivot_tol:
                self._rebuild(cost)
                continue
            bound_r = bub[r] if sigma > 0 else blb[r]
            delta_e = (self.xB[r] - bound_r) / w[r]
            if self.vstat[e] == NB_LOWER:
                base_val = self.lb[e]
            elif self.vstat[e] == NB_UPPER:
                base_val = self.ub[e]
            else:
                base_val = 0.0
            leave = self.basis[r]
            self.xB -= delta_e * w
            self.xB[r] = base_val + delta_e
            self.vstat[leave] = NB_UPPER if sigma > 0 else NB_LOWER
            if self.vstat[leave] == NB_UPPER and not math.isfinite(self.ub[leave]):
                self.vstat[leave] = NB_LOWER
            elif self.vstat[leave] == NB_LOWER and not math.isfinite(self.lb[leave]):
                self.vstat[leave] = NB_UPPER
            self.basis[r] = e
            self.vstat[e] = BASIC
            dq = self.d[e] / alpha[e]
            self.d = self.d - dq * alpha
            self.d[e] = 0.0
            self._push_eta(r, w)
        return None  # stalled; the caller picks the recovery
