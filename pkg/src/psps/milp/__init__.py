"""Embedded mixed-integer linear programming engine.

Desk-scale by design (documented cap ~5,000 variables / 5,000 constraints);
larger studies should plug an external backend behind the same interface.
"""

from .branch_bound import LpSolution, SolveLimits, solve_lp, solve_milp
from .model import (
    BINARY,
    CONTINUOUS,
    EQUAL,
    GAP_LIMIT,
    GREATER_EQUAL,
    INFEASIBLE,
    LESS_EQUAL,
    MilpModel,
    MilpSolution,
    NODE_LIMIT,
    OPTIMAL,
    UNBOUNDED,
)

__all__ = [
    "MilpModel", "MilpSolution", "LpSolution", "SolveLimits",
    "solve_lp", "solve_milp",
    "BINARY", "CONTINUOUS", "LESS_EQUAL", "EQUAL", "GREATER_EQUAL",
    "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "GAP_LIMIT", "NODE_LIMIT",
]
