"""Piecewise time-varying interaction weights with closed-form integrals.

A weight is a non-negative function of time built from half-open segments
``[t_start, t_end)`` on which it is either a constant ``c`` or ``c / t``.
Schedules whose segments depend on a period index are generated lazily, so a
weight can be queried arbitrarily far into the future without materializing
the whole schedule.

Agent labels are 0-based throughout the API.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import DomainError

CONSTANT = "constant"
RECIPROCAL = "reciprocal"
ZERO = "zero"
FORMS = (CONSTANT, RECIPROCAL, ZERO)


@dataclass(frozen=True)
class TimeSegment:
    t_start: float
    t_end: float
    form: str = CONSTANT
    c: float = 1.0

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown segment form {self.form!r}")
        if not self.t_start < self.t_end:
            raise ValueError(f"empty segment [{self.t_start}, {self.t_end})")
        if math.isinf(self.t_start):
            raise ValueError("segment must start at a finite time")
        if not self.c >= 0 or math.isinf(self.c):
            raise ValueError(f"segment magnitude must be finite and >= 0, got {self.c}")
        if self.form == RECIPROCAL and self.t_start <= 0:
            raise ValueError("a c/t segment must start at t > 0")

    def value(self, t: float) -> float:
        if self.form == CONSTANT:
            return self.c
        if self.form == RECIPROCAL:
            return self.c / t
        return 0.0

    def antiderivative(self, lo: float, hi: float) -> float:
        """Integral over ``[lo, hi]``, assumed to lie inside the segment."""
        if hi <= lo or self.form == ZERO or self.c == 0.0:
            return 0.0
        if self.form == CONSTANT:
            return self.c * (hi - lo)
        return self.c * math.log(hi / lo)


class WeightFunction:
    """Non-negative weight ``a_ij(t)``; zero outside all of its segments."""

    domain_start: float = 0.0

    def segments_between(self, t0: float, t1: float) -> Iterator[TimeSegment]:
        """Yield segments that intersect ``[t0, t1)``, sorted by start."""
        raise NotImplementedError

    def is_zero(self) -> bool:
        return False

    def _check_time(self, t: float) -> None:
        if t < self.domain_start:
            raise DomainError(f"t={t} precedes the domain start {self.domain_start}")

    def evaluate(self, t: float) -> float:
        self._check_time(t)
        for seg in self.segments_between(t, math.nextafter(t, math.inf)):
            if seg.t_start <= t < seg.t_end:
                return seg.value(t)
        return 0.0

    def integrate(self, t0: float, t1: float) -> float:
        self._check_time(t0)
        if t1 < t0:
            raise ValueError(f"integration bounds reversed: [{t0}, {t1}]")
        if math.isinf(t1):
            raise ValueError("integration horizon must be finite")
        total = 0.0
        for seg in self.segments_between(t0, t1):
            total += seg.antiderivative(max(seg.t_start, t0), min(seg.t_end, t1))
        return total


class PiecewiseWeight(WeightFunction):
    """Weight given by an explicit finite list of segments."""

    def __init__(self, segments: Iterable[TimeSegment] = (), domain_start: float = 0.0):
        segs = tuple(sorted(segments, key=lambda s: s.t_start))
        for a, b in zip(segs, segs[1:]):
            if b.t_start < a.t_end:
                raise ValueError(f"overlapping segments {a} and {b}")
            if math.isinf(a.t_end):
                raise ValueError("only the last segment may extend to infinity")
        if segs and segs[0].t_start < domain_start:
            raise ValueError("segment starts before the domain start")
        self.segments = segs
        self.domain_start = float(domain_start)
        self._starts = np.array([s.t_start for s in segs])
        self._ends = np.array([s.t_end for s in segs])

    def is_zero(self) -> bool:
        return all(s.form == ZERO or s.c == 0.0 for s in self.segments)

    def segments_between(self, t0, t1):
        lo = int(np.searchsorted(self._ends, t0, side="right"))
        hi = int(np.searchsorted(self._starts, t1, side="left"))
        yield from self.segments[lo:hi]

    def __repr__(self):
        return f"PiecewiseWeight({list(self.segments)!r})"


class ScheduledWeight(WeightFunction):
    """Lazily generated weight with a fixed period.

    ``period_segments(p)`` returns the segments lying inside period ``p``,
    i.e. inside ``[origin + p*period, origin + (p+1)*period)``.
    """

    def __init__(
        self,
        period: float,
        period_segments: Callable[[int], Sequence[TimeSegment]],
        origin: float = 0.0,
    ):
        if not period > 0:
            raise ValueError("period must be positive")
        self.period = float(period)
        self.origin = float(origin)
        self.domain_start = float(origin)
        self._segments = lru_cache(maxsize=4096)(lambda p: tuple(period_segments(p)))

    def period_of(self, t: float) -> int:
        return int(math.floor((t - self.origin) / self.period))

    def segments_between(self, t0, t1):
        p0 = max(self.period_of(t0), 0)
        p1 = self.period_of(t1)
        for p in range(p0, p1 + 1):
            for seg in self._segments(p):
                if seg.t_end > t0 and seg.t_start < t1:
                    yield seg


class _ZeroWeight(WeightFunction):
    def segments_between(self, t0, t1):
        return iter(())

    def is_zero(self):
        return True

    def __repr__(self):
        return "ZERO_WEIGHT"


ZERO_WEIGHT = _ZeroWeight()


@dataclass(frozen=True)
class Piece:
    """Maximal interval on which every weight keeps one closed form.

    On ``[t_start, t_end)`` the weight matrix is ``const + recip / t``.
    """

    t_start: float
    t_end: float
    const: np.ndarray
    recip: np.ndarray

    @property
    def has_reciprocal(self) -> bool:
        return bool(np.any(self.recip))

    def weights_at(self, t: float) -> np.ndarray:
        if self.has_reciprocal:
            return self.const + self.recip / t
        return self.const

    def integral(self, lo: float, hi: float) -> np.ndarray:
        """Per-entry integral of the weight matrix over ``[lo, hi]`` inside this piece."""
        out = self.const * (hi - lo)
        if self.has_reciprocal:
            out = out + self.recip * math.log(hi / lo)
        return out


@dataclass(frozen=True)
class SystemDefinition:
    """``n`` agents and the matrix of weights ``w[i][j]`` (influence of j on i).

    ``period`` and ``name`` are scenario metadata; ``period`` is the length
    of one repetition of the schedule when there is one.
    """

    n: int
    w: tuple
    domain_start: float = 0.0
    name: str = "custom"
    period: float | None = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("a system needs at least two agents")
        rows = tuple(tuple(ZERO_WEIGHT if wij is None else wij for wij in row) for row in self.w)
        if len(rows) != self.n or any(len(r) != self.n for r in rows):
            raise ValueError(f"weight table must be {self.n}x{self.n}")
        for i in range(self.n):
            if not rows[i][i].is_zero():
                raise ValueError(f"self-weight w[{i}][{i}] must be zero")
            for j in range(self.n):
                if rows[i][j].domain_start > self.domain_start and not rows[i][j].is_zero():
                    raise ValueError(f"w[{i}][{j}] starts after the system domain start")
        object.__setattr__(self, "w", rows)

    @classmethod
    def from_dict(cls, n: int, weights: dict, **kwargs) -> "SystemDefinition":
        """Build from ``{(i, j): WeightFunction}``; missing pairs are zero."""
        table = [[ZERO_WEIGHT] * n for _ in range(n)]
        for (i, j), wij in weights.items():
            table[i][j] = wij
        return cls(n=n, w=tuple(tuple(r) for r in table), **kwargs)

    def active_pairs(self):
        return [(i, j) for i in range(self.n) for j in range(self.n) if not self.w[i][j].is_zero()]

    def check_time(self, t: float) -> None:
        if t < self.domain_start:
            raise DomainError(f"t={t} precedes the domain start {self.domain_start}")

    def weight_matrix(self, t: float) -> np.ndarray:
        self.check_time(t)
        out = np.zeros((self.n, self.n))
        for i, j in self.active_pairs():
            out[i, j] = self.w[i][j].evaluate(t)
        return out

    def breakpoints(self, t0: float, t1: float) -> np.ndarray:
        """Sorted segment boundaries strictly inside ``(t0, t1)``."""
        pts = set()
        for i, j in self.active_pairs():
            for seg in self.w[i][j].segments_between(t0, t1):
                pts.add(seg.t_start)
                pts.add(seg.t_end)
        arr = np.array(sorted(p for p in pts if t0 < p < t1), dtype=float)
        return arr

    def pieces(self, t0: float, t1: float) -> list[Piece]:
        """Split ``[t0, t1)`` into pieces on which the weights keep one closed form."""
        self.check_time(t0)
        if not t1 > t0:
            return []
        edges = np.concatenate(([t0], self.breakpoints(t0, t1), [t1]))
        k = len(edges) - 1
        const = np.zeros((k, self.n, self.n))
        recip = np.zeros((k, self.n, self.n))
        for i, j in self.active_pairs():
            for seg in self.w[i][j].segments_between(t0, t1):
                if seg.form == ZERO or seg.c == 0.0:
                    continue
                a = int(np.searchsorted(edges, max(seg.t_start, t0), side="left"))
                b = int(np.searchsorted(edges, min(seg.t_end, t1), side="left"))
                target = const if seg.form == CONSTANT else recip
                target[a:b, i, j] += seg.c
        return [Piece(float(edges[q]), float(edges[q + 1]), const[q], recip[q]) for q in range(k)]


def evaluate(w: WeightFunction, t: float) -> float:
    return w.evaluate(t)


def integrate(w: WeightFunction, t0: float, t1: float) -> float:
    return w.integrate(t0, t1)


def _subset_mask(sys: SystemDefinition, S: Iterable[int]) -> np.ndarray:
    members = set(int(i) for i in S)
    if not members or len(members) >= sys.n or not members <= set(range(sys.n)):
        raise ValueError(f"cut must be a nonempty proper subset of agents 0..{sys.n - 1}, got {sorted(members)}")
    mask = np.zeros(sys.n, dtype=bool)
    mask[list(members)] = True
    return mask


def cut_weight(sys: SystemDefinition, S: Iterable[int], t: float) -> float:
    """Total weight of the influence on members of ``S`` from agents outside ``S``."""
    mask = _subset_mask(sys, S)
    return float(sys.weight_matrix(t)[np.ix_(mask, ~mask)].sum())


def cut_integral(sys: SystemDefinition, S: Iterable[int], t0: float, t1: float) -> float:
    mask = _subset_mask(sys, S)
    if t1 < t0:
        raise ValueError(f"integration bounds reversed: [{t0}, {t1}]")
    total = 0.0
    for i in np.flatnonzero(mask):
        for j in np.flatnonzero(~mask):
            total += sys.w[i][j].integrate(t0, t1)
    return total


def proper_subsets(n: int) -> Iterator[tuple[int, ...]]:
    """All nonempty proper subsets of ``range(n)``."""
    for k in range(1, n):
        yield from combinations(range(n), k)


def cut_masks(n: int) -> np.ndarray:
    """Boolean membership matrix, one row per nonempty proper subset (bit order)."""
    codes = np.arange(1, 2**n - 1, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(bool)
