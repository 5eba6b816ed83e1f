"""Mixed-integer linear program container.

A MilpModel is a plain builder: variables with bounds, linear rows with a
sense, and a linear objective to minimize. It knows nothing about power
systems; the formulation layer writes into it and the solver reads arrays
out of it. A model under construction is confined to a single thread; once
built it is read-only and safe to share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, ModelTooLarge

CONTINUOUS = "continuous"
BINARY = "binary"

LESS_EQUAL = "<="
EQUAL = "=="
GREATER_EQUAL = ">="

_SENSES = (LESS_EQUAL, EQUAL, GREATER_EQUAL)

# Statuses reported by the solvers.
OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
GAP_LIMIT = "GapLimit"
NODE_LIMIT = "NodeLimit"


class MilpModel:
    """Minimize c'x subject to linear rows and variable bounds."""

    def __init__(self, name="model"):
        self.name = name
        self._var_names = []
        self._var_index = {}
        self._lb = []
        self._ub = []
        self._kind = []
        self._rows = []          # list of (index array, coef array)
        self._senses = []
        self._rhs = []
        self._row_names = []
        self._obj = {}           # var index -> coefficient
        self.obj_constant = 0.0

    # -- construction -----------------------------------------------------

    def add_var(self, name, lb=0.0, ub=math.inf, kind=CONTINUOUS):
        if name in self._var_index:
            raise ValueError(f"duplicate variable name {name!r}")
        if kind not in (CONTINUOUS, BINARY):
            raise ValueError(f"unknown variable kind {kind!r}")
        if kind == BINARY:
            lb = max(0.0, lb)
            ub = min(1.0, ub)
        if lb > ub:
            raise ValueError(f"variable {name!r} has empty bound range [{lb}, {ub}]")
        idx = len(self._var_names)
        self._var_index[name] = idx
        self._var_names.append(name)
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._kind.append(kind)
        return idx

    def add_constr(self, terms, sense, rhs, name=None):
        """Add one row. ``terms`` maps variable name -> coefficient."""
        if sense not in _SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        idx = []
        coef = []
        for var, c in terms.items():
            if c == 0.0:
                continue
            try:
                idx.append(self._var_index[var])
            except KeyError:
                raise KeyError(f"constraint references unknown variable {var!r}") from None
            coef.append(float(c))
        self._rows.append((np.asarray(idx, dtype=np.intp), np.asarray(coef)))
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._row_names.append(name or f"c{len(self._rows) - 1}")
        return len(self._rows) - 1

    def set_objective(self, terms, constant=0.0):
        self._obj = {}
        self.obj_constant = float(constant)
        for var, c in terms.items():
            if var not in self._var_index:
                raise KeyError(f"objective references unknown variable {var!r}")
            self._obj[self._var_index[var]] = float(c)

    def add_objective_term(self, var, coef):
        idx = self._var_index[var]
        self._obj[idx] = self._obj.get(idx, 0.0) + float(coef)

    def set_var_bounds(self, var, lb, ub):
        if lb > ub:
            raise ValueError(f"variable {var!r} bounds cross: {lb} > {ub}")
        idx = self._var_index[var]
        self._lb[idx] = float(lb)
        self._ub[idx] = float(ub)

    # -- introspection ----------------------------------------------------

    @property
    def num_vars(self):
        return len(self._var_names)

    @property
    def num_constrs(self):
        return len(self._rows)

    @property
    def var_names(self):
        return list(self._var_names)

    def var_kind(self, name):
        return self._kind[self._var_index[name]]

    def binary_indices(self):
        return [i for i, k in enumerate(self._kind) if k == BINARY]

    def has_var(self, name):
        return name in self._var_index

    def check_size(self, max_vars=5000, max_constrs=5000):
        """Enforce the engine's documented desk-scale cap."""
        if self.num_vars > max_vars or self.num_constrs > max_constrs:
            raise ModelTooLarge(
                f"{self.num_vars} variables / {self.num_constrs} constraints "
                f"exceeds the embedded engine cap ({max_vars} / {max_constrs}); "
                "plug in an external backend for larger instances"
            )

    def _vectors(self):
        n = self.num_vars
        c = np.zeros(n)
        for j, v in self._obj.items():
            c[j] = v
        senses = list(self._senses)
        b = np.asarray(self._rhs, dtype=float)
        lb = np.asarray(self._lb, dtype=float)
        ub = np.asarray(self._ub, dtype=float)
        is_int = np.asarray([k == BINARY for k in self._kind], dtype=bool)
        return c, senses, b, lb, ub, is_int

    def to_arrays(self):
        """Dense arrays for the solver: (c, A, senses, b, lb, ub, integer mask)."""
        c, senses, b, lb, ub, is_int = self._vectors()
        a = np.zeros((self.num_constrs, self.num_vars))
        for i, (idx, coef) in enumerate(self._rows):
            a[i, idx] = coef
        return c, a, senses, b, lb, ub, is_int

    def to_csc(self):
        """Same payload as to_arrays but with A as a scipy CSC matrix."""
        from scipy import sparse

        c, senses, b, lb, ub, is_int = self._vectors()
        rows = np.concatenate(
            [np.full(idx.size, i, dtype=np.intp) for i, (idx, _) in enumerate(self._rows)]
        ) if self._rows else np.zeros(0, dtype=np.intp)
        cols = np.concatenate([idx for idx, _ in self._rows]) if self._rows \
            else np.zeros(0, dtype=np.intp)
        vals = np.concatenate([coef for _, coef in self._rows]) if self._rows \
            else np.zeros(0)
        a = sparse.csc_matrix(
            (vals, (rows, cols)), shape=(self.num_constrs, self.num_vars)
        )
        return c, a, senses, b, lb, ub, is_int

    # -- serialization -----------------------------------------------------

    def write_lp(self, path):
        """Dump the model in LP text format for external solvers."""
        lines = ["\\ " + self.name, "Minimize", " obj:"]
        terms = [f" {v:+.17g} {self._var_names[j]}" for j, v in sorted(self._obj.items())]
        lines.append("   " + "".join(terms) if terms else "   0 " + self._var_names[0])
        lines.append("Subject To")
        for i, (idx, coef) in enumerate(self._rows):
            body = "".join(
                f" {c:+.17g} {self._var_names[j]}" for j, c in zip(idx.tolist(), coef.tolist())
            )
            sense = {LESS_EQUAL: "<=", EQUAL: "=", GREATER_EQUAL: ">="}[self._senses[i]]
            lines.append(f" {self._row_names[i]}:{body} {sense} {self._rhs[i]:.17g}")
        lines.append("Bounds")
        for j, name in enumerate(self._var_names):
            lo, hi = self._lb[j], self._ub[j]
            if lo == -math.inf and hi == math.inf:
                lines.append(f" {name} free")
            else:
                lo_s = "-inf" if lo == -math.inf else f"{lo:.17g}"
                hi_s = "+inf" if hi == math.inf else f"{hi:.17g}"
                lines.append(f" {lo_s} <= {name} <= {hi_s}")
        binaries = [self._var_names[j] for j in self.binary_indices()]
        if binaries:
            lines.append("Binary")
            for name in binaries:
                lines.append(f" {name}")
        lines.append("End")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


@dataclass
class MilpSolution:
    """Solver output: status plus the incumbent assignment when one exists."""

    status: str
    objective: float | None = None
    values: dict = field(default_factory=dict)
    gap: float | None = None
    nodes: int = 0
    iterations: int = 0

    @property
    def is_optimal(self):
        return self.status == OPTIMAL

    def value(self, name):
        return self.values[name]

    def array(self, names):
        if isinstance(names, str):
            raise DimensionMismatch("array() expects a sequence of names")
        return np.asarray([self.values[n] for n in names])
