"""Example systems with closed-form oracles.

* ``ultimate_counterexample``: two agents coupled only on ``[k, k + 2**-(k+1))``;
  bounded symmetric weights whose total mass is finite, so no consensus.
* ``three_agent``: period-2 chain whose reciprocal weights differ by ``rho_p``.
* ``odd_chain``: the ``2m+1`` agent extension with period ``m+1``.
* ``two_agent_reciprocal``: symmetric ``1/t`` weights, started at ``t = 1``.
* ``two_agent_constant``: symmetric unit weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .weights import (
    RECIPROCAL,
    PiecewiseWeight,
    ScheduledWeight,
    SystemDefinition,
    TimeSegment,
)

SCENARIO_NAMES = (
    "ultimate_counterexample",
    "three_agent",
    "odd_chain",
    "two_agent_reciprocal",
    "two_agent_constant",
    "custom",
)


@dataclass(frozen=True)
class RhoSequence:
    """Non-decreasing sequence ``rho_p >= 1``.

    kinds: ``constant`` (``value``), ``power`` (``(1+p)**exponent``),
    ``linear`` (``max(1, p)``) and ``custom`` (``values``, last value repeated).
    """

    kind: str = "constant"
    value: float = 1.0
    exponent: float = 1.0
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "power", "linear", "custom"):
            raise ValueError(f"unknown rho kind {self.kind!r}")
        if self.kind == "constant" and self.value < 1:
            raise ValueError("constant rho must be >= 1")
        if self.kind == "power" and self.exponent < 0:
            raise ValueError("power rho needs a non-negative exponent")
        if self.kind == "custom":
            vals = tuple(float(v) for v in self.values)
            if not vals:
                raise ValueError("custom rho needs at least one value")
            if min(vals) < 1 or any(b < a for a, b in zip(vals, vals[1:])):
                raise ValueError("custom rho values must be >= 1 and non-decreasing")
            object.__setattr__(self, "values", vals)

    def __call__(self, p: int) -> float:
        if p < 0:
            raise ValueError("period index must be >= 0")
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "power":
            return float((1.0 + p) ** self.exponent)
        if self.kind == "linear":
            return float(max(1, p))
        return self.values[min(p, len(self.values) - 1)]

    def first(self, count: int) -> np.ndarray:
        return np.array([self(p) for p in range(count)])

    def label(self) -> str:
        if self.kind == "constant":
            return f"const{self.value:g}"
        if self.kind == "power":
            return f"pow{self.exponent:g}"
        return self.kind


# ---------------------------------------------------------------- builders


def _two_agent(w12, w21, **kwargs) -> SystemDefinition:
    return SystemDefinition.from_dict(2, {(0, 1): w12, (1, 0): w21}, **kwargs)


def build_ultimate_counterexample() -> SystemDefinition:
    def segs(k):
        end = k + 2.0 ** -(k + 1)
        # past k ~ 52 the segment is shorter than the float spacing at k
        return [TimeSegment(float(k), end, c=1.0)] if end > k else []

    return _two_agent(
        ScheduledWeight(1.0, segs),
        ScheduledWeight(1.0, segs),
        name="ultimate_counterexample",
        period=1.0,
    )


def oracle_ultimate_gap(k: float, gap0: float) -> float:
    """Gap at integer time ``k``; ``k = inf`` gives the floor ``exp(-2) * gap0``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return math.exp(-2.0 * (1.0 - 2.0**-k)) * gap0


def _periodic(period: float, blocks: Sequence[tuple[float, float, str]], rho: RhoSequence, origin=0.0):
    """Weight active on sub-intervals of each period; magnitude ``1`` or ``rho_p``."""

    def segs(p):
        base = origin + p * period
        out = []
        for lo, hi, mag in blocks:
            c = rho(p) if mag == "rho" else 1.0
            out.append(TimeSegment(base + lo, base + hi, c=c))
        return out

    return ScheduledWeight(period, segs, origin=origin)


def build_three_agent(rho: RhoSequence = RhoSequence()) -> SystemDefinition:
    weights = {
        (0, 1): _periodic(2.0, [(0, 1, "one")], rho),
        (1, 0): _periodic(2.0, [(0, 1, "rho")], rho),
        (1, 2): _periodic(2.0, [(1, 2, "rho")], rho),
        (2, 1): _periodic(2.0, [(1, 2, "one")], rho),
    }
    return SystemDefinition.from_dict(3, weights, name="three_agent", period=2.0, params={"rho": rho})


def oracle_lambda(rho_p: float) -> float:
    return (1.0 - math.exp(-(rho_p + 1.0))) / (1.0 + rho_p)


def oracle_three_agent_step(x: Sequence[float], rho_p: float):
    """Exact positions at ``2p+1`` and ``2p+2`` from the positions at ``2p``."""
    if rho_p < 1:
        raise ValueError("rho_p must be >= 1")
    lam = oracle_lambda(rho_p)
    x1, x2, x3 = (float(v) for v in x)
    mid = np.array([
        (1 - lam) * x1 + lam * x2,
        rho_p * lam * x1 + (1 - rho_p * lam) * x2,
        x3,
    ])
    y1, y2, y3 = mid
    end = np.array([
        y1,
        (1 - rho_p * lam) * y2 + rho_p * lam * y3,
        lam * y2 + (1 - lam) * y3,
    ])
    return mid, end


def oracle_three_agent_run(x0: Sequence[float], rho: RhoSequence, periods: int) -> np.ndarray:
    """Positions at ``t = 0, 2, ..., 2*periods`` by iterating the two-step map."""
    out = np.empty((periods + 1, 3))
    out[0] = x0
    for p in range(periods):
        _, out[p + 1] = oracle_three_agent_step(out[p], rho(p))
    return out


def build_odd_chain(m: int, rho: RhoSequence = RhoSequence()) -> SystemDefinition:
    if m < 2:
        raise ValueError("odd_chain needs m >= 2")
    n = 2 * m + 1
    period = float(m + 1)
    blocks: dict[tuple[int, int], list] = {}

    def add(i, j, lo, mag):
        blocks.setdefault((i, j), []).append((lo, lo + 1, mag))

    # 0-based: agent k of the 1-based chain is index k-1
    for s in range(m - 1):
        add(s, s + 1, s, "one")
        add(s + 1, s, s, "rho")
        add(n - 2 - s, n - 1 - s, s, "rho")
        add(n - 1 - s, n - 2 - s, s, "one")
    add(m - 1, m, m - 1, "one")
    add(m, m - 1, m - 1, "rho")
    add(m, m + 1, m, "rho")
    add(m + 1, m, m, "one")
    weights = {ij: _periodic(period, b, rho) for ij, b in blocks.items()}
    return SystemDefinition.from_dict(
        n, weights, name="odd_chain", period=period, params={"m": m, "rho": rho}
    )


def odd_chain_x0(m: int) -> np.ndarray:
    return np.concatenate((-np.ones(m), [0.0], np.ones(m)))


def build_two_agent_reciprocal(start: float = 1.0) -> SystemDefinition:
    def w():
        return PiecewiseWeight([TimeSegment(start, math.inf, RECIPROCAL, 1.0)], domain_start=start)

    return _two_agent(w(), w(), domain_start=start, name="two_agent_reciprocal")


def oracle_reciprocal_diameter(t: float, d_start: float, start: float = 1.0) -> float:
    """Exact diameter of the symmetric ``1/t`` pair: the gap obeys ``g' = -2g/t``."""
    return d_start * (start / t) ** 2


def stated_reciprocal_diameter(t: float, d_start: float, start: float = 1.0) -> float:
    """``d_start * start / t``, the decay law as stated in the acceptance criterion.

    It does not solve the dynamics (see ``oracle_reciprocal_diameter``); kept
    so the criterion can be evaluated as written.
    """
    return d_start * start / t


def build_two_agent_constant(c: float = 1.0) -> SystemDefinition:
    def w():
        return PiecewiseWeight([TimeSegment(0.0, math.inf, c=c)])

    return _two_agent(w(), w(), name="two_agent_constant", period=1.0)


# ---------------------------------------------------------------- specs


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    rho: RhoSequence = field(default_factory=RhoSequence)
    m: int = 5
    x0: tuple | None = None
    periods: int = 20
    custom: SystemDefinition | None = None

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ValueError(f"unknown scenario {self.name!r}; expected one of {SCENARIO_NAMES}")
        if self.periods < 1:
            raise ValueError("periods must be >= 1")
        if self.name == "custom" and self.custom is None:
            raise ValueError("custom scenario needs a system definition")
        if self.x0 is not None:
            object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
            if len(self.x0) != self.n:
                raise ValueError(f"x0 has {len(self.x0)} entries, scenario {self.name} has {self.n} agents")

    @property
    def n(self) -> int:
        if self.name == "odd_chain":
            return 2 * self.m + 1
        if self.name == "three_agent":
            return 3
        if self.name == "custom":
            return self.custom.n
        return 2

    def build(self) -> SystemDefinition:
        if self.name == "ultimate_counterexample":
            return build_ultimate_counterexample()
        if self.name == "three_agent":
            return build_three_agent(self.rho)
        if self.name == "odd_chain":
            return build_odd_chain(self.m, self.rho)
        if self.name == "two_agent_reciprocal":
            return build_two_agent_reciprocal()
        if self.name == "two_agent_constant":
            return build_two_agent_constant()
        return self.custom

    def initial_state(self) -> np.ndarray:
        if self.x0 is not None:
            return np.array(self.x0)
        if self.name == "odd_chain":
            return odd_chain_x0(self.m)
        if self.name == "three_agent":
            return np.array([-1.0, 0.0, 1.0])
        if self.name == "custom":
            return np.linspace(-1.0, 1.0, self.custom.n)
        return np.array([0.0, 1.0])

    def horizon(self) -> tuple[float, float]:
        """Simulation window covering ``periods`` scenario periods.

        For the ``1/t`` system one period is an e-fold of time.
        """
        sys = self.build()
        t0 = sys.domain_start
        if self.name == "two_agent_reciprocal":
            return t0, t0 * math.exp(self.periods)
        period = sys.period or 1.0
        return t0, t0 + self.periods * period
