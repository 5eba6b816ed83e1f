"""Wildfire risk pipeline: rasters to per-line ignition probabilities.

Gridded risk metrics arrive as ESRI ASCII rasters (WFPI index values or
WLFP probabilities). Per-bus values average the 2x2 cell block bracketing
the bus coordinate; per-line values collect the Bresenham traversal between
the endpoint cells plus both endpoint blocks, map each cell through a
reliability table to a wildfire ignition probability, and combine them as
1 - prod(1 - p) under the independence assumption. Metrics are held
constant across the day's steps.

Bresenham runs in integer cell-index space (not geographic space), so
non-square-degree cells trace the same cells regardless of latitude.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date as date_type
from pathlib import Path

import numpy as np

from .errors import NoBin, OutOfExtent, ParseError, ValidationError

WFPI = "WFPI"
WLFP = "WLFP"

_METRIC_RANGE = {WFPI: (0.0, 150.0), WLFP: (0.0, 1e-3)}

# stands in for ln(0) on zero-risk lines; formulations must never scale it
ZERO_RISK_LOG_PI = -1e9

_sanitize_warnings = 0


def sanitize_warning_count():
    return _sanitize_warnings


def reset_sanitize_warnings():
    global _sanitize_warnings
    _sanitize_warnings = 0


@dataclass(frozen=True, eq=False)
class RiskRaster:
    metric: str
    origin: tuple        # (lat, lon) of cell (0, 0) center; row 0 is north
    cell_size: float     # degrees
    rows: int
    cols: int
    values: np.ndarray   # raw metric values, row-major from the north
    date: date_type | None = None


@dataclass(frozen=True)
class ReliabilityTable:
    metric: str
    bins: tuple  # ordered (value_lo, value_hi, mean_owip); (lo, hi] except first

    def coverage(self):
        return self.bins[0][0], self.bins[-1][1]


@dataclass(frozen=True)
class LineRisk:
    line_id: int
    pi: float                 # ignition probability, constant across steps
    log_pi: float             # ln(pi), ZERO_RISK_LOG_PI when pi == 0
    log_one_minus_pi: float   # ln(1 - pi)
    cells: tuple              # raster cells feeding the line, traversal order
    metric_value: float       # aggregated raw metric for metric-sum budgets

    @property
    def zero_risk(self):
        return self.pi == 0.0


def sanitize_metric(raw, metric):
    """Clean one raw raster value: sentinels to 0, clamp, NaN to 0."""
    global _sanitize_warnings
    lo, hi = _METRIC_RANGE[metric]
    raw = float(raw)
    if math.isnan(raw):
        _sanitize_warnings += 1
        return 0.0
    if metric == WFPI and 249.0 <= raw <= 254.0:
        return 0.0
    if raw < lo:
        _sanitize_warnings += 1
        return lo
    if raw > hi:
        _sanitize_warnings += 1
        return hi
    return raw


# -- raster geometry ---------------------------------------------------------


def _edges(raster):
    top = raster.origin[0] + raster.cell_size / 2.0
    left = raster.origin[1] - raster.cell_size / 2.0
    bottom = top - raster.rows * raster.cell_size
    right = left + raster.cols * raster.cell_size
    return top, bottom, left, right


def locate_cell(raster, lat, lon):
    """Cell index containing a coordinate; far edges belong to the last cell."""
    top, bottom, left, right = _edges(raster)
    eps = 1e-9 * raster.cell_size
    if not (bottom - eps <= lat <= top + eps):
        raise OutOfExtent(f"latitude {lat} outside raster [{bottom}, {top}]")
    if not (left - eps <= lon <= right + eps):
        raise OutOfExtent(f"longitude {lon} outside raster [{left}, {right}]")
    r = int(math.floor((top - lat) / raster.cell_size))
    c = int(math.floor((lon - left) / raster.cell_size))
    return min(max(r, 0), raster.rows - 1), min(max(c, 0), raster.cols - 1)


def bresenham(cell_a, cell_b):
    """Integer Bresenham traversal, inclusive of both cells."""
    r0, c0 = cell_a
    r1, c1 = cell_b
    dr = abs(r1 - r0)
    dc = -abs(c1 - c0)
    sr = 1 if r0 < r1 else -1
    sc = 1 if c0 < c1 else -1
    err = dr + dc
    out = []
    while True:
        out.append((r0, c0))
        if r0 == r1 and c0 == c1:
            return out
        e2 = 2 * err
        if e2 >= dc:
            err += dc
            r0 += sr
        if e2 <= dr:
            err += dr
            c0 += sc


def rasterize_line(endpoints, raster):
    """Cells crossed between two (lat, lon) endpoints, in cell-index space."""
    (lat_a, lon_a), (lat_b, lon_b) = endpoints
    return bresenham(locate_cell(raster, lat_a, lon_a),
                     locate_cell(raster, lat_b, lon_b))


def bus_block(raster, lat, lon):
    """The 2x2 cell block bracketing a coordinate, clamped at the borders."""
    top, bottom, left, right = _edges(raster)
    eps = 1e-9 * raster.cell_size
    if not (bottom - eps <= lat <= top + eps):
        raise OutOfExtent(f"latitude {lat} outside raster [{bottom}, {top}]")
    if not (left - eps <= lon <= right + eps):
        raise OutOfExtent(f"longitude {lon} outside raster [{left}, {right}]")
    fr = (raster.origin[0] - lat) / raster.cell_size
    fc = (lon - raster.origin[1]) / raster.cell_size
    r0 = int(math.floor(fr))
    c0 = int(math.floor(fc))
    cells = []
    for r in (r0, r0 + 1):
        for c in (c0, c0 + 1):
            cells.append((min(max(r, 0), raster.rows - 1),
                          min(max(c, 0), raster.cols - 1)))
    return cells


def bus_metric(bus_point, raster):
    """Mean sanitized metric over the four cells nearest the coordinate."""
    lat, lon = bus_point
    cells = bus_block(raster, lat, lon)
    vals = [sanitize_metric(raster.values[r, c], raster.metric) for r, c in cells]
    return float(np.mean(vals))


def metric_to_wip(value, table):
    """Mean observed ignition probability of the bin containing the value."""
    first_lo = table.bins[0][0]
    if value == first_lo:
        return table.bins[0][2]
    for lo, hi, owip in table.bins:
        if lo < value <= hi:
            return owip
    lo, hi = table.coverage()
    raise NoBin(f"value {value} outside table coverage ({lo}, {hi}]")


def line_ignition_probability(cell_wips):
    """1 - prod(1 - p) over the cells, independence assumed."""
    q = 1.0
    for p in cell_wips:
        q *= 1.0 - p
    return 1.0 - q


def build_line_risk(net, raster, table, aggregation="cell-mean"):
    """Per-line ignition probabilities for every line of the network.

    ``aggregation`` controls metric_value, the raw-metric summary used by
    metric-sum budgets: "cell-mean" averages the sanitized metric over the
    line's cell set; "endpoint-max" takes the larger of the two endpoint
    bus values.
    """
    if aggregation not in ("cell-mean", "endpoint-max"):
        raise ValueError(f"unknown aggregation {aggregation!r}")
    if table.metric != raster.metric:
        raise ValidationError(
            [f"reliability table metric {table.metric} does not match "
             f"raster metric {raster.metric}"])
    out = []
    for line in net.lines:
        cells = rasterize_line(line.endpoints, raster)
        seen = set(cells)
        for lat, lon in line.endpoints:
            for cell in bus_block(raster, lat, lon):
                if cell not in seen:
                    seen.add(cell)
                    cells.append(cell)
        metrics = [sanitize_metric(raster.values[r, c], raster.metric)
                   for r, c in cells]
        wips = [metric_to_wip(v, table) for v in metrics]
        pi = line_ignition_probability(wips)
        if pi >= 1.0:
            pi = 1.0 - 1e-12
        if pi == 0.0:
            log_pi = ZERO_RISK_LOG_PI
            log_q = 0.0
        else:
            log_pi = math.log(pi)
            log_q = math.log1p(-pi)
        if aggregation == "endpoint-max":
            metric_value = max(bus_metric(p, raster) for p in line.endpoints)
        else:
            metric_value = float(np.mean(metrics))
        out.append(LineRisk(line_id=line.id, pi=pi, log_pi=log_pi,
                            log_one_minus_pi=log_q, cells=tuple(cells),
                            metric_value=metric_value))
    return out


# -- file formats -------------------------------------------------------------


_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")


def load_raster(path, metric, date=None):
    """Parse an ESRI ASCII grid. Row 0 of the result is the northernmost."""
    if metric not in _METRIC_RANGE:
        raise ValueError(f"unknown metric {metric!r}")
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read raster: {exc.strerror or exc}", path)
    tokens = text.split()
    header = {}
    pos = 0
    while pos + 1 < len(tokens) and tokens[pos].lower() in (
            *_HEADER_KEYS, "nodata_value"):
        header[tokens[pos].lower()] = tokens[pos + 1]
        pos += 2
    for key in _HEADER_KEYS:
        if key not in header:
            raise ParseError(f"raster header is missing {key!r}", path)
    try:
        ncols = int(header["ncols"])
        nrows = int(header["nrows"])
        xll = float(header["xllcorner"])
        yll = float(header["yllcorner"])
        cs = float(header["cellsize"])
        nodata = float(header["nodata_value"]) if "nodata_value" in header else None
    except ValueError as exc:
        raise ParseError(f"bad raster header value: {exc}", path)
    if nrows < 1 or ncols < 1 or cs <= 0:
        raise ParseError(
            f"raster dimensions invalid (nrows={nrows}, ncols={ncols}, "
            f"cellsize={cs})", path)
    body = tokens[pos:]
    if len(body) != nrows * ncols:
        raise ParseError(
            f"raster body has {len(body)} values, expected {nrows * ncols}",
            path)
    try:
        values = np.asarray(body, dtype=float).reshape(nrows, ncols)
    except ValueError as exc:
        raise ParseError(f"non-numeric raster value: {exc}", path)
    if nodata is not None:
        values = np.where(values == nodata, np.nan, values)
    origin = (yll + (nrows - 0.5) * cs, xll + 0.5 * cs)
    if isinstance(date, str):
        date = date_type.fromisoformat(date)
    return RiskRaster(metric=metric, origin=origin, cell_size=cs,
                      rows=nrows, cols=ncols, values=values, date=date)


def save_raster(raster, path, nodata=-9999.0):
    """Write an ESRI ASCII grid that load_raster reads back equivalently."""
    top, bottom, left, _ = _edges(raster)
    lines = [
        f"ncols {raster.cols}",
        f"nrows {raster.rows}",
        f"xllcorner {left:.10g}",
        f"yllcorner {bottom:.10g}",
        f"cellsize {raster.cell_size:.10g}",
        f"NODATA_value {nodata:.10g}",
    ]
    vals = np.where(np.isnan(raster.values), nodata, raster.values)
    for row in vals:
        lines.append(" ".join(f"{v:.10g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_reliability_table(path, metric):
    """Read a reliability table CSV (value_lo, value_hi, mean_owip)."""
    if metric not in _METRIC_RANGE:
        raise ValueError(f"unknown metric {metric!r}")
    path = str(path)
    bins = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or set(reader.fieldnames) < {
                    "value_lo", "value_hi", "mean_owip"}:
                raise ParseError(
                    "reliability table needs columns value_lo, value_hi, "
                    "mean_owip", path)
            for lineno, row in enumerate(reader, start=2):
                try:
                    bins.append((float(row["value_lo"]),
                                 float(row["value_hi"]),
                                 float(row["mean_owip"])))
                except (TypeError, ValueError):
                    raise ParseError("non-numeric reliability entry", path,
                                     lineno) from None
    except OSError as exc:
        raise ParseError(f"cannot read table: {exc.strerror or exc}", path)
    if not bins:
        raise ParseError("reliability table has no bins", path)
    diags = []
    for i, (lo, hi, owip) in enumerate(bins):
        if hi <= lo:
            diags.append(f"bin {i}: empty range ({lo}, {hi}]")
        if not 0.0 <= owip <= 1.0:
            diags.append(f"bin {i}: mean_owip {owip} outside [0, 1]")
        if i and abs(bins[i - 1][1] - lo) > 1e-12:
            diags.append(f"bin {i}: starts at {lo}, previous ends at "
                         f"{bins[i - 1][1]} (gap or overlap)")
    lo_range, hi_range = _METRIC_RANGE[metric]
    if bins[0][0] > lo_range:
        diags.append(f"coverage starts at {bins[0][0]}, metric range starts "
                     f"at {lo_range}")
    if bins[-1][1] < hi_range:
        diags.append(f"coverage ends at {bins[-1][1]}, metric range ends "
                     f"at {hi_range}")
    if diags:
        raise ValidationError(diags)
    return ReliabilityTable(metric=metric, bins=tuple(bins))
