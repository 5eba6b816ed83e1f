"""Power network domain types and case file ingestion.

A case file is a UTF-8 JSON document with top-level keys ``buses``,
``lines``, ``generators``, ``demands``, ``horizon``, ``step_hours``. Units
are MW, $/MWh, $, hours; susceptance is per-unit with flows in MW (the MVA
base is absorbed into the susceptance values).

Structural problems (missing keys, wrong types, bad JSON) raise ParseError;
violations of the semantic invariants raise ValidationError listing every
diagnostic. All types are frozen after load and safe to share across
workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class Bus:
    id: int
    name: str
    latitude: float
    longitude: float


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    susceptance: float
    flow_min: float
    flow_max: float
    endpoints: tuple  # ((lat, lon), (lat, lon))


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_min: float
    p_max: float
    ramp_down: float  # signed, <= 0 by convention
    ramp_up: float
    min_up: int
    min_down: int
    marginal_cost: float
    startup_cost: float
    shutdown_cost: float
    initially_on: bool = False


@dataclass(frozen=True)
class Demand:
    id: int
    bus: int
    voll: float
    base_profile: tuple  # MW per step, length == horizon


@dataclass(frozen=True)
class PowerNetwork:
    buses: tuple
    lines: tuple
    generators: tuple
    demands: tuple
    horizon: int
    step_hours: float

    def bus_ids(self):
        return [b.id for b in self.buses]

    def bus(self, bus_id):
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(f"no bus {bus_id}")

    def line(self, line_id):
        for l in self.lines:
            if l.id == line_id:
                return l
        raise KeyError(f"no line {line_id}")


_TOP_KEYS = ("buses", "lines", "generators", "demands", "horizon", "step_hours")


def _need(record, key, where, path):
    try:
        return record[key]
    except (KeyError, TypeError):
        raise ParseError(f"{where} is missing field {key!r}", path) from None


def _num(record, key, where, path):
    v = _need(record, key, where, path)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where}: field {key!r} must be a number", path)
    return float(v)


def _intval(record, key, where, path):
    v = _need(record, key, where, path)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{where}: field {key!r} must be an integer", path)
    return v


def load_network(path) -> PowerNetwork:
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read case file: {exc.strerror or exc}", path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno)
    net = _from_doc(doc, path)
    diags = validate_network(net)
    if diags:
        raise ValidationError(diags)
    return net


def _from_doc(doc, path):
    if not isinstance(doc, dict):
        raise ParseError("case file root must be a JSON object", path)
    for key in _TOP_KEYS:
        if key not in doc:
            raise ParseError(f"case file is missing top-level key {key!r}", path)

    buses = []
    for rec in doc["buses"]:
        where = f"bus {rec.get('id', '?')}" if isinstance(rec, dict) else "bus entry"
        buses.append(Bus(
            id=_intval(rec, "id", where, path),
            name=str(_need(rec, "name", where, path)),
            latitude=_num(rec, "latitude", where, path),
            longitude=_num(rec, "longitude", where, path),
        ))

    lines = []
    for rec in doc["lines"]:
        where = f"line {rec.get('id', '?')}" if isinstance(rec, dict) else "line entry"
        eps = _need(rec, "endpoints", where, path)
        if (not isinstance(eps, list) or len(eps) != 2
                or any(not isinstance(p, list) or len(p) != 2 for p in eps)):
            raise ParseError(f"{where}: endpoints must be two [lat, lon] pairs", path)
        lines.append(Line(
            id=_intval(rec, "id", where, path),
            from_bus=_intval(rec, "from_bus", where, path),
            to_bus=_intval(rec, "to_bus", where, path),
            susceptance=_num(rec, "susceptance", where, path),
            flow_min=_num(rec, "flow_min", where, path),
            flow_max=_num(rec, "flow_max", where, path),
            endpoints=tuple((float(p[0]), float(p[1])) for p in eps),
        ))

    gens = []
    for rec in doc["generators"]:
        where = f"generator {rec.get('id', '?')}" if isinstance(rec, dict) else "generator entry"
        ini = rec.get("initially_on", False) if isinstance(rec, dict) else False
        if not isinstance(ini, bool):
            raise ParseError(f"{where}: field 'initially_on' must be a boolean", path)
        gens.append(Generator(
            id=_intval(rec, "id", where, path),
            bus=_intval(rec, "bus", where, path),
            p_min=_num(rec, "p_min", where, path),
            p_max=_num(rec, "p_max", where, path),
            ramp_down=_num(rec, "ramp_down", where, path),
            ramp_up=_num(rec, "ramp_up", where, path),
            min_up=_intval(rec, "min_up", where, path),
            min_down=_intval(rec, "min_down", where, path),
            marginal_cost=_num(rec, "marginal_cost", where, path),
            startup_cost=_num(rec, "startup_cost", where, path),
            shutdown_cost=_num(rec, "shutdown_cost", where, path),
            initially_on=ini,
        ))

    demands = []
    for rec in doc["demands"]:
        where = f"demand {rec.get('id', '?')}" if isinstance(rec, dict) else "demand entry"
        prof = _need(rec, "base_profile", where, path)
        if not isinstance(prof, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in prof):
            raise ParseError(f"{where}: base_profile must be a list of numbers", path)
        demands.append(Demand(
            id=_intval(rec, "id", where, path),
            bus=_intval(rec, "bus", where, path),
            voll=_num(rec, "voll", where, path),
            base_profile=tuple(float(v) for v in prof),
        ))

    horizon = doc["horizon"]
    if isinstance(horizon, bool) or not isinstance(horizon, int):
        raise ParseError("top-level 'horizon' must be an integer", path)
    step = doc["step_hours"]
    if isinstance(step, bool) or not isinstance(step, (int, float)):
        raise ParseError("top-level 'step_hours' must be a number", path)

    return PowerNetwork(
        buses=tuple(buses), lines=tuple(lines), generators=tuple(gens),
        demands=tuple(demands), horizon=horizon, step_hours=float(step),
    )


def validate_network(net: PowerNetwork):
    """Collect invariant violations; empty list means the network is valid."""
    diags = []
    say = diags.append

    ids = [b.id for b in net.buses]
    if sorted(ids) != list(range(1, len(ids) + 1)):
        say(f"buses: ids must be unique and contiguous 1..{len(ids)}, got {sorted(ids)}")
    known = set(ids)
    for b in net.buses:
        if abs(b.latitude) > 90.0:
            say(f"bus {b.id}: latitude {b.latitude} outside [-90, 90]")
        if abs(b.longitude) > 180.0:
            say(f"bus {b.id}: longitude {b.longitude} outside [-180, 180]")

    for l in net.lines:
        if l.from_bus == l.to_bus:
            say(f"line {l.id}: from_bus equals to_bus ({l.from_bus})")
        for end, bid in (("from_bus", l.from_bus), ("to_bus", l.to_bus)):
            if bid not in known:
                say(f"line {l.id}: unknown bus {bid} in {end}")
        if not (l.flow_min <= 0.0 <= l.flow_max):
            say(f"line {l.id}: flow bounds must satisfy flow_min <= 0 <= flow_max, "
                f"got [{l.flow_min}, {l.flow_max}]")
        if not l.susceptance > 0.0:
            say(f"line {l.id}: susceptance must be positive, got {l.susceptance}")

    max_cost = max((g.marginal_cost for g in net.generators), default=0.0)
    for g in net.generators:
        if g.bus not in known:
            say(f"generator {g.id}: unknown bus {g.bus}")
        if not (0.0 <= g.p_min <= g.p_max):
            say(f"generator {g.id}: requires 0 <= p_min <= p_max, "
                f"got p_min={g.p_min}, p_max={g.p_max}")
        if g.min_up < 1:
            say(f"generator {g.id}: min_up must be >= 1, got {g.min_up}")
        if g.min_down < 1:
            say(f"generator {g.id}: min_down must be >= 1, got {g.min_down}")
        for fieldname in ("marginal_cost", "startup_cost", "shutdown_cost"):
            v = getattr(g, fieldname)
            if v < 0.0:
                say(f"generator {g.id}: {fieldname} must be >= 0, got {v}")

    for d in net.demands:
        if d.bus not in known:
            say(f"demand {d.id}: unknown bus {d.bus}")
        if len(d.base_profile) != net.horizon:
            say(f"demand {d.id}: base_profile length {len(d.base_profile)} "
                f"!= horizon {net.horizon}")
        if any(v < 0.0 for v in d.base_profile):
            say(f"demand {d.id}: base_profile entries must be >= 0")
        if net.generators and d.voll <= max_cost:
            say(f"demand {d.id}: voll {d.voll} must exceed the highest "
                f"marginal_cost {max_cost}")

    if net.horizon < 1:
        say(f"network: horizon must be >= 1, got {net.horizon}")
    if not net.step_hours > 0.0:
        say(f"network: step_hours must be positive, got {net.step_hours}")
    if not math.isfinite(net.step_hours):
        say("network: step_hours must be finite")
    return diags


def save_network(net: PowerNetwork, path):
    """Write a case file that load_network reads back to an equal network."""
    doc = {
        "buses": [
            {"id": b.id, "name": b.name, "latitude": b.latitude,
             "longitude": b.longitude}
            for b in net.buses
        ],
        "lines": [
            {"id": l.id, "from_bus": l.from_bus, "to_bus": l.to_bus,
             "susceptance": l.susceptance, "flow_min": l.flow_min,
             "flow_max": l.flow_max,
             "endpoints": [list(p) for p in l.endpoints]}
            for l in net.lines
        ],
        "generators": [
            {"id": g.id, "bus": g.bus, "p_min": g.p_min, "p_max": g.p_max,
             "ramp_down": g.ramp_down, "ramp_up": g.ramp_up,
             "min_up": g.min_up, "min_down": g.min_down,
             "marginal_cost": g.marginal_cost, "startup_cost": g.startup_cost,
             "shutdown_cost": g.shutdown_cost, "initially_on": g.initially_on}
            for g in net.generators
        ],
        "demands": [
            {"id": d.id, "bus": d.bus, "voll": d.voll,
             "base_profile": list(d.base_profile)}
            for d in net.demands
        ],
        "horizon": net.horizon,
        "step_hours": net.step_hours,
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def coarsen_horizon(net: PowerNetwork, factor: int) -> PowerNetwork:
    """Subsample the horizon by an integer factor for cheaper sweep studies.

    Keeps every factor-th demand sample (starting at step 1), multiplies
    step_hours by the factor, rescales per-step ramp limits accordingly, and
    shortens min up/down times measured in steps (never below 1). The result
    is a coarser copy for trend studies, not an equivalent model.
    """
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return net
    new_h = len(net.demands[0].base_profile[::factor]) if net.demands else \
        math.ceil(net.horizon / factor)
    demands = tuple(
        replace(d, base_profile=d.base_profile[::factor]) for d in net.demands
    )
    gens = tuple(
        replace(
            g,
            ramp_up=g.ramp_up * factor,
            ramp_down=g.ramp_down * factor,
            min_up=max(1, -(-g.min_up // factor)),
            min_down=max(1, -(-g.min_down // factor)),
        )
        for g in net.generators
    )
    return replace(net, demands=demands, generators=gens, horizon=new_h,
                   step_hours=net.step_hours * factor)
