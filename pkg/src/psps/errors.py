"""Exception types shared across the toolkit.

Every error raised on a user-facing path derives from PspsError so callers
(and the CLI) can map failures to exit codes without matching on strings.
"""

from __future__ import annotations


class PspsError(Exception):
    """Base class for all toolkit errors."""


class ParseError(PspsError):
    """Malformed input file. Carries the offending path and line when known."""

    def __init__(self, message, path=None, line=None):
        detail = message
        if path is not None:
            detail = f"{path}: {detail}"
        if line is not None:
            detail = f"{detail} (line {line})"
        super().__init__(detail)
        self.path = path
        self.line = line


class ValidationError(PspsError):
    """Semantic validation failed. Carries the diagnostics list."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class OutOfExtent(PspsError):
    """Coordinate falls outside the raster extent."""


class NoBin(PspsError):
    """Metric value not covered by any reliability-table bin."""


class InsufficientHistory(PspsError):
    """Not enough historical days for the requested operation."""


class ZeroTotal(PspsError):
    """A demand curve sums to zero and cannot be projected."""


class NumericalFailure(PspsError):
    """The simplex lost feasibility or conditioning beyond recovery."""


class ModelTooLarge(PspsError):
    """Instance exceeds the embedded engine's documented size cap."""


class InfeasibleModel(PspsError):
    """The optimization model admits no feasible point.

    ``detail`` names the violating budget when that is detectable.
    """

    def __init__(self, message="model is infeasible", detail=None):
        self.detail = detail
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class SolverLimit(PspsError):
    """Branch and bound stopped on a node or time cap before the gap target."""


class ConfigError(PspsError):
    """Invalid run configuration."""


class DimensionMismatch(PspsError):
    """Array arguments disagree on shape."""


class DegenerateCluster(PspsError):
    """k-means produced an empty cluster even after reseeding."""


class ZeroArea(PspsError):
    """Convex hull has zero area, so a density cannot be formed."""
