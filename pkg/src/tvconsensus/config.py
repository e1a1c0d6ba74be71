"""JSON run configuration.

Example::

    {
      "scenario": {"name": "odd_chain", "m": 5,
                   "rho": {"kind": "power", "exponent": 0.2},
                   "periods": 400},
      "solver": {"tolerance": 1e-10, "max_step": 0.1},
      "seed": 0
    }

A ``custom`` scenario lists its weights with 1-based agent labels::

    {"scenario": {"name": "custom", "n": 3, "x0": [0, 1, 2],
                  "weights": [{"i": 1, "j": 2, "period": 2,
                               "segments": [{"start": 0, "end": 1, "c": 1}]}]}}

``end: null`` means the segment never ends; ``form`` is ``constant``
(default), ``reciprocal`` or ``zero``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .dynamics import SolverConfig
from .scenarios import RhoSequence, ScenarioSpec
from .weights import PiecewiseWeight, ScheduledWeight, SystemDefinition, TimeSegment


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioSpec
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    analysis: dict = field(default_factory=dict)


_SCENARIO_KEYS = {"name", "m", "rho", "x0", "periods", "n", "weights", "domain_start"}
_SOLVER_KEYS = {"tolerance", "max_step", "method", "sample_stride"}
_RHO_KEYS = {"kind", "value", "exponent", "values"}


def _expect(obj, typ, where):
    if not isinstance(obj, typ):
        raise ConfigError(f"{where}: expected {getattr(typ, '__name__', typ)}, got {type(obj).__name__}")
    return obj


def _number(obj, where, integer=False):
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {obj!r}")
    if integer and int(obj) != obj:
        raise ConfigError(f"{where}: expected an integer, got {obj!r}")
    return int(obj) if integer else float(obj)


def _unknown(d, allowed, where):
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(extra)}")


def _parse_rho(d, where) -> RhoSequence:
    _expect(d, dict, where)
    _unknown(d, _RHO_KEYS, where)
    kwargs = {}
    if "kind" in d:
        kwargs["kind"] = _expect(d["kind"], str, f"{where}.kind")
    if "value" in d:
        kwargs["value"] = _number(d["value"], f"{where}.value")
    if "exponent" in d:
        kwargs["exponent"] = _number(d["exponent"], f"{where}.exponent")
    if "values" in d:
        vals = _expect(d["values"], list, f"{where}.values")
        kwargs["values"] = tuple(_number(v, f"{where}.values[{k}]") for k, v in enumerate(vals))
    try:
        return RhoSequence(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _parse_segment(d, where) -> TimeSegment:
    _expect(d, dict, where)
    _unknown(d, {"start", "end", "form", "c"}, where)
    try:
        start = _number(d["start"], f"{where}.start")
    except KeyError:
        raise ConfigError(f"{where}: missing key start") from None
    end = d.get("end")
    end = math.inf if end is None else _number(end, f"{where}.end")
    try:
        return TimeSegment(start, end, d.get("form", "constant"), _number(d.get("c", 1.0), f"{where}.c"))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _parse_custom(d, where) -> SystemDefinition:
    n = _number(d.get("n", 0), f"{where}.n", integer=True)
    start = _number(d.get("domain_start", 0.0), f"{where}.domain_start")
    weights = {}
    for k, entry in enumerate(_expect(d.get("weights", []), list, f"{where}.weights")):
        w_where = f"{where}.weights[{k}]"
        _expect(entry, dict, w_where)
        _unknown(entry, {"i", "j", "segments", "period"}, w_where)
        i = _number(entry.get("i"), f"{w_where}.i", integer=True) - 1
        j = _number(entry.get("j"), f"{w_where}.j", integer=True) - 1
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ConfigError(f"{w_where}: agents must be distinct labels in 1..{n}")
        segs = [
            _parse_segment(s, f"{w_where}.segments[{q}]")
            for q, s in enumerate(_expect(entry.get("segments", []), list, f"{w_where}.segments"))
        ]
        try:
            if entry.get("period") is not None:
                period = _number(entry["period"], f"{w_where}.period")
                if any(s.t_end > start + period or s.t_start < start for s in segs):
                    raise ConfigError(f"{w_where}: periodic segments must lie inside the first period")
                weights[(i, j)] = ScheduledWeight(
                    period,
                    lambda p, segs=segs, period=period: [
                        TimeSegment(s.t_start + p * period, s.t_end + p * period, s.form, s.c) for s in segs
                    ],
                    origin=start,
                )
            else:
                weights[(i, j)] = PiecewiseWeight(segs, domain_start=start)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{w_where}: {exc}") from None
    try:
        return SystemDefinition.from_dict(n, weights, domain_start=start, name="custom")
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_config(data: dict) -> RunConfig:
    _expect(data, dict, "config")
    _unknown(data, {"scenario", "solver", "seed", "analysis"}, "config")
    sc = _expect(data.get("scenario"), dict, "scenario")
    _unknown(sc, _SCENARIO_KEYS, "scenario")
    name = _expect(sc.get("name"), str, "scenario.name")
    kwargs = {"name": name}
    if "rho" in sc:
        kwargs["rho"] = _parse_rho(sc["rho"], "scenario.rho")
    if "m" in sc:
        kwargs["m"] = _number(sc["m"], "scenario.m", integer=True)
    if "periods" in sc:
        kwargs["periods"] = _number(sc["periods"], "scenario.periods", integer=True)
    if "x0" in sc:
        x0 = _expect(sc["x0"], list, "scenario.x0")
        kwargs["x0"] = tuple(_number(v, f"scenario.x0[{k}]") for k, v in enumerate(x0))
    if name == "custom":
        kwargs["custom"] = _parse_custom(sc, "scenario")
    try:
        scenario = ScenarioSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from None

    sv = _expect(data.get("solver", {}), dict, "solver")
    _unknown(sv, _SOLVER_KEYS, "solver")
    skw = {}
    if "tolerance" in sv:
        skw["step_tolerance"] = _number(sv["tolerance"], "solver.tolerance")
    if "max_step" in sv:
        skw["max_step"] = _number(sv["max_step"], "solver.max_step")
    if "method" in sv:
        skw["method"] = _expect(sv["method"], str, "solver.method")
    if "sample_stride" in sv:
        skw["sample_stride"] = _number(sv["sample_stride"], "solver.sample_stride", integer=True)
    try:
        solver = SolverConfig(**skw)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None

    seed = _number(data.get("seed", 0), "seed", integer=True)
    analysis = _expect(data.get("analysis", {}), dict, "analysis")
    return RunConfig(scenario=scenario, solver=solver, seed=seed, analysis=analysis)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return parse_config(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
