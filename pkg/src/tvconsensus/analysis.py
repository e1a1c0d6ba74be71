"""Reciprocity ratios, the rescaling sequence, contraction bounds and assumption checkers.

Ratios are plain floats; ``math.inf`` marks a cut that receives influence but
gives none back. Subsets are handled as boolean membership rows, one row per
nonempty proper subset of the agents.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .dynamics import Trajectory
from .errors import CapacityError, ConnectivityHorizonError
from .weights import Piece, SystemDefinition, _subset_mask, cut_masks

ENUMERATION_LIMIT = 16
_CROSS_SLACK = 4e-15
# diameters this close to the rounding floor carry no contraction information
RESOLUTION_ULPS = 1e4


# ---------------------------------------------------------------- ratios


def ratio_from_sums(inflow: float, outflow: float) -> float:
    if outflow > 0:
        try:
            return float(inflow) / float(outflow)
        except OverflowError:
            return math.inf
    return 1.0 if inflow == 0 else math.inf


def _ratios(inflow: np.ndarray, outflow: np.ndarray) -> np.ndarray:
    out = np.ones_like(inflow)
    pos = outflow > 0
    with np.errstate(over="ignore"):  # huge / tiny saturates to inf, as intended
        np.divide(inflow, outflow, out=out, where=pos)
    out[~pos & (inflow > 0)] = math.inf
    return out


@lru_cache(maxsize=None)
def _masks(n: int, limit: int = ENUMERATION_LIMIT) -> tuple[np.ndarray, np.ndarray]:
    if n > limit:
        raise CapacityError(f"{n} agents exceed the cut enumeration limit of {limit}")
    m = cut_masks(n)
    m.setflags(write=False)
    f = m.astype(float)
    f.setflags(write=False)
    return m, f


def cut_inflows(W: np.ndarray, limit: int = ENUMERATION_LIMIT) -> np.ndarray:
    """``sum_{i in S, j not in S} W[i, j]`` for every cut ``S`` (rows of ``cut_masks``).

    ``W`` may carry leading batch axes. Because the rows are ordered by bit
    code, the complement of row ``k`` is row ``-1 - k``, so outflows are
    ``cut_inflows(W)[..., ::-1]``.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[-1]
    masks, fmask = _masks(n, limit)
    return np.einsum("ci,...ij,cj->...c", fmask, W, 1.0 - fmask, optimize=True)


def cut_ratios(W: np.ndarray, limit: int = ENUMERATION_LIMIT) -> np.ndarray:
    inflow = cut_inflows(W, limit)
    return _ratios(inflow, inflow[..., ::-1])


def ratio_r_S(sys: SystemDefinition, S: Iterable[int], t: float) -> float:
    mask = _subset_mask(sys, S)
    W = sys.weight_matrix(t)
    return ratio_from_sums(float(W[np.ix_(mask, ~mask)].sum()), float(W[np.ix_(~mask, mask)].sum()))


def max_ratio_of_weights(W: np.ndarray, limit: int = ENUMERATION_LIMIT) -> float:
    return float(np.max(cut_ratios(W, limit)))


def max_ratio_half_enumeration(W: np.ndarray) -> float:
    """Same value as :func:`max_ratio_of_weights`, enumerating only cuts without the last agent.

    Each such ``S`` contributes ``r_S`` and its complement's ratio, the
    reciprocal pair.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    best = 1.0
    for code in range(1, 2 ** (n - 1)):
        mask = ((code >> np.arange(n)) & 1).astype(bool)
        inflow = float(W[np.ix_(mask, ~mask)].sum())
        outflow = float(W[np.ix_(~mask, mask)].sum())
        best = max(best, ratio_from_sums(inflow, outflow), ratio_from_sums(outflow, inflow))
    return best


def max_ratio(sys: SystemDefinition, t: float, limit: int = ENUMERATION_LIMIT) -> float:
    if sys.n > limit:
        raise CapacityError(f"{sys.n} agents exceed the cut enumeration limit of {limit}")
    return max_ratio_of_weights(sys.weight_matrix(t), limit)


def _probe_weights(piece: Piece) -> list[np.ndarray]:
    """Weight matrices at which the ratios of a piece attain their extremes.

    Constant pieces need one probe. On pieces with ``c/t`` terms each entry is
    monotone in ``t``; both ends and the midpoint are probed, which is exact
    when every weight in the piece is of a single form.
    """
    if not piece.has_reciprocal:
        return [piece.const]
    a, b = piece.t_start, piece.t_end
    return [piece.weights_at(s) for s in (a, 0.5 * (a + b), b)]


@dataclass(frozen=True)
class RatioProfile:
    """Supremum of ``r`` on each piece of ``[t0, t1)``."""

    starts: np.ndarray
    ends: np.ndarray
    at_start: np.ndarray
    sup: np.ndarray

    def running_max(self, t: float) -> float:
        """``sup_{s <= t} r(s)``; ``t`` must be a piece boundary or inside a constant piece."""
        k = int(np.searchsorted(self.starts, t, side="right"))
        if k == 0:
            raise ValueError(f"t={t} precedes the profile")
        best = float(np.max(self.sup[: k - 1])) if k > 1 else 1.0
        last = self.at_start[k - 1] if t == self.starts[k - 1] else self.sup[k - 1]
        return max(1.0, best, float(last))


def ratio_profile(sys: SystemDefinition, t0: float, t1: float, split_at: Sequence[float] = ()) -> RatioProfile:
    _masks(sys.n)
    pieces = sys.pieces(t0, t1)
    if len(split_at):
        from .dynamics import _split_pieces

        pieces = _split_pieces(pieces, split_at)
    starts = np.array([p.t_start for p in pieces])
    ends = np.array([p.t_end for p in pieces])
    at_start = np.empty(len(pieces))
    sup = np.empty(len(pieces))
    const_idx = [k for k, p in enumerate(pieces) if not p.has_reciprocal]
    chunk = 256
    for lo in range(0, len(const_idx), chunk):
        idx = const_idx[lo : lo + chunk]
        r = cut_ratios(np.stack([pieces[k].const for k in idx])).max(axis=-1)
        at_start[idx] = r
        sup[idx] = r
    for k, p in enumerate(pieces):
        if p.has_reciprocal:
            r = [max_ratio_of_weights(W) for W in _probe_weights(p)]
            at_start[k] = r[0]
            sup[k] = max(r)
    return RatioProfile(starts, ends, at_start, sup)


def running_max_ratio(sys: SystemDefinition, t: float, probe: Sequence[float] | None = None) -> float:
    """``sup_{s in [start, t]} r(s)``, at least 1.

    Without ``probe`` the supremum is taken piece by piece (exact for the
    supported weight family); with ``probe`` it is the max over those times.
    """
    sys.check_time(t)
    if probe is not None:
        times = [s for s in probe if sys.domain_start <= s <= t]
        return max([1.0] + [max_ratio(sys, s) for s in times])
    best = max_ratio(sys, t)
    if t > sys.domain_start:
        prof = ratio_profile(sys, sys.domain_start, t)
        best = max(best, float(np.max(prof.sup)))
    return max(1.0, best)


# ---------------------------------------------------------------- rescaling


@dataclass(frozen=True)
class RescalingSequence:
    t: np.ndarray
    intermediates: tuple
    rmax_at: np.ndarray
    n: int

    @property
    def periods(self) -> int:
        return len(self.t) - 1

    @property
    def steps_per_period(self) -> int:
        return self.n // 2


def _crossing_time(piece: Piece, a: float, remaining: float, rate_c: float, rate_r: float) -> float:
    """Smallest ``t`` in the piece with ``rate_c (t-a) + rate_r ln(t/a) = remaining``."""
    b = piece.t_end
    if rate_r == 0.0:
        return min(b, a + remaining / rate_c)
    if rate_c == 0.0:
        return min(b, a * math.exp(remaining / rate_r))
    lo, hi = a, b
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rate_c * (mid - a) + rate_r * math.log(mid / a) >= remaining:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * max(1.0, abs(hi - a)):
            break
    return hi


def _next_rescaling_time(sys: SystemDefinition, s0: float, window: float, max_horizon: float) -> float:
    """Smallest ``t >= s0`` at which every cut has accumulated unit inflow since ``s0``."""
    masks, _ = _masks(sys.n)
    ncut = masks.shape[0]
    acc = np.zeros(ncut)
    cross = np.full(ncut, math.nan)
    done = np.zeros(ncut, dtype=bool)
    lo = s0
    while True:
        hi = min(lo + window, max_horizon)
        for piece in sys.pieces(lo, hi):
            a, b = piece.t_start, piece.t_end
            rc = cut_inflows(piece.const)
            rr = cut_inflows(piece.recip) if piece.has_reciprocal else np.zeros(ncut)
            inc = rc * (b - a) + (rr * math.log(b / a) if piece.has_reciprocal else 0.0)
            # a few ulp of slack; a looser one would let the finite-mass
            # counterexample (mass 1 - 2**-k) "cross" at a finite time
            hit = ~done & (acc + inc >= 1.0 - _CROSS_SLACK)
            for k in np.flatnonzero(hit):
                cross[k] = _crossing_time(piece, a, max(0.0, 1.0 - acc[k]), rc[k], rr[k])
            done |= hit
            acc = np.where(done, acc, acc + inc)
            if done.all():
                return float(np.max(cross))
        if hi >= max_horizon:
            starving = int(np.argmin(np.where(done, np.inf, acc)))
            cut = tuple(int(i) for i in np.flatnonzero(masks[starving]))
            raise ConnectivityHorizonError(
                f"cut {cut} fell short of unit influence by {1.0 - acc[starving]:.3g} "
                f"between t={s0:g} and the horizon {max_horizon:g}",
                cut=cut,
                horizon=max_horizon,
            )
        lo = hi
        window *= 2


def default_horizon(sys: SystemDefinition) -> float:
    if sys.period:
        return sys.domain_start + 1e4 * sys.period
    return max(1.0, sys.domain_start) * 1e30


def rescaling_sequence(sys: SystemDefinition, P: int, max_horizon: float | None = None) -> RescalingSequence:
    """Times ``t_0 < ... < t_P``, each period split into ``n // 2`` unit-influence steps."""
    if P < 0:
        raise ValueError("P must be >= 0")
    max_horizon = default_horizon(sys) if max_horizon is None else max_horizon
    steps = sys.n // 2
    window = sys.period or max(1.0, sys.domain_start)
    t = [float(sys.domain_start)]
    inter = []
    for _ in range(P):
        seq = [t[-1]]
        for _ in range(steps):
            seq.append(_next_rescaling_time(sys, seq[-1], window, max_horizon))
        inter.append(np.array(seq))
        t.append(seq[-1])
    t = np.array(t)
    rmax = np.ones(len(t))
    if P:
        prof = ratio_profile(sys, t[0], t[-1], split_at=t[1:-1])
        last = max(float(np.max(prof.sup)), max_ratio(sys, t[-1]))
        rmax = np.array([prof.running_max(tp) for tp in t[:-1]] + [last])
        rmax = np.maximum.accumulate(rmax)
    else:
        rmax[0] = running_max_ratio(sys, t[0])
    return RescalingSequence(t=t, intermediates=tuple(inter), rmax_at=rmax, n=sys.n)


# ---------------------------------------------------------------- bounds


def contraction_bound(n: int, rmax: float) -> float:
    """Per-period diameter factor ``1 - rmax**-h / (8 n**2)**h`` with ``h = n // 2``."""
    if math.isinf(rmax):
        return 1.0
    if not rmax >= 1.0:
        raise ValueError(f"rmax must be >= 1, got {rmax}")
    h = n // 2
    return 1.0 - rmax ** (-h) / (8.0 * n * n) ** h


def product_bound(rmax_seq: Sequence[float], n: int) -> float:
    return float(np.prod([contraction_bound(n, r) for r in rmax_seq])) if len(rmax_seq) else 1.0


def running_product_bound(rmax_seq: Sequence[float], n: int) -> np.ndarray:
    """Partial products; entry ``P`` is :func:`product_bound` of the first ``P`` values."""
    return np.cumprod([1.0] + [contraction_bound(n, r) for r in rmax_seq])


def rate_bound(t: float, resc: RescalingSequence, K: float, n: int, d0: float) -> float:
    """Diameter bound ``(1 - (8 K n**2)**-h)**P(t) * d0`` with ``P(t) = p`` on ``[t_p, t_{p+1})``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if t < resc.t[0] or t >= resc.t[-1]:
        raise ValueError(f"t={t} outside the computed rescaling range [{resc.t[0]}, {resc.t[-1]})")
    P = bisect_right(list(resc.t), t) - 1
    h = n // 2
    return (1.0 - 1.0 / (8.0 * K * n * n) ** h) ** P * d0


@dataclass(frozen=True)
class PeriodAudit:
    p: int
    t_start: float
    t_end: float
    measured: float
    bound: float
    rmax_next: float
    rmax_start: float
    resolved: bool = True

    @property
    def slack(self) -> float:
        return self.bound - self.measured

    @property
    def vacuous(self) -> bool:
        return math.isinf(self.rmax_next)


@dataclass(frozen=True)
class BoundReport:
    periods: tuple
    tolerance: float = 1e-9

    @property
    def ok(self) -> bool:
        return all(a.measured <= a.bound + self.tolerance for a in self.periods if a.resolved)

    @property
    def worst_slack(self) -> float:
        return min((a.slack for a in self.periods if a.resolved), default=math.inf)


def contraction_audit(traj: Trajectory, resc: RescalingSequence, tolerance: float = 1e-9) -> BoundReport:
    """Measured ``D(t_{p+1}) / D(t_p)`` against the bound evaluated at ``r(t_{p+1})``.

    ``rmax_start`` records ``r(t_p)``, the other indexing of the ratio sequence.
    A period whose starting diameter is below what the solver resolves
    (``RESOLUTION_ULPS`` rounding units or ``step_tolerance``, relative to the
    position magnitude) is marked unresolved and left out of the verdict.
    """
    if traj.times[0] > resc.t[0] + 1e-12 or traj.t_end < resc.t[-1] * (1 - 1e-12):
        raise ValueError("trajectory does not cover the rescaling range")
    states = [traj.at(float(tp)).x for tp in resc.t]
    diam = [float(np.ptp(x)) for x in states]
    rel = max(RESOLUTION_ULPS * np.finfo(float).eps, traj.config.step_tolerance)
    floor = [rel * float(np.max(np.abs(x))) for x in states]
    out = []
    for p in range(resc.periods):
        measured = 0.0 if diam[p] == 0 else diam[p + 1] / diam[p]
        out.append(
            PeriodAudit(
                p=p,
                t_start=float(resc.t[p]),
                t_end=float(resc.t[p + 1]),
                measured=float(measured),
                bound=contraction_bound(traj.n, float(resc.rmax_at[p + 1])),
                rmax_next=float(resc.rmax_at[p + 1]),
                rmax_start=float(resc.rmax_at[p]),
                resolved=diam[p] == 0 or diam[p] > floor[p],
            )
        )
    return BoundReport(tuple(out), tolerance)


# ---------------------------------------------------------------- assumption checkers


@dataclass(frozen=True)
class SlowDivergenceReport:
    partial_sums: np.ndarray
    alpha: float
    verdict: str


def slow_divergence_check(rmax_seq: Sequence[float], n: int, alpha_tol: float = 1e-3) -> SlowDivergenceReport:
    """Partial sums of ``r(t_p)**-(n//2)`` and a tail power-law trend label.

    The tail (second half, ``p >= 1``) of the terms is fitted as ``C p**-alpha``;
    ``alpha <= 1`` is labeled ``diverging-trend``. This is a heuristic from
    finitely many terms, never a proof.
    """
    r = np.asarray(rmax_seq, dtype=float)
    if r.size == 0 or not np.all(np.isfinite(r)):
        raise ValueError("need a non-empty sequence of finite ratios")
    terms = r ** -(n // 2)
    sums = np.cumsum(terms)
    half = max(r.size // 2, 1)
    p = np.arange(r.size)[half:]
    if p.size < 2:
        alpha = 0.0
    else:
        slope = np.polyfit(np.log(p), np.log(terms[half:]), 1)[0]
        alpha = float(-slope)
    verdict = "diverging-trend" if alpha <= 1.0 + alpha_tol else "converging-trend"
    return SlowDivergenceReport(sums, alpha, verdict)


@dataclass(frozen=True)
class CutBalanceReport:
    K_estimate: float
    witness_cut: tuple
    witness_time: float
    K_first_half: float
    K_second_half: float
    verdict: str


def _probe_points(sys: SystemDefinition, t0: float, t1: float):
    """(time, weight matrix) probes covering every piece of ``[t0, t1)``."""
    for piece in sys.pieces(t0, t1):
        if piece.has_reciprocal:
            a, b = piece.t_start, piece.t_end
            for s in (a, 0.5 * (a + b), b):
                yield s, piece.weights_at(s)
        else:
            yield piece.t_start, piece.const


def check_cut_balance(sys: SystemDefinition, horizon: float, probe: Sequence[float] | None = None) -> CutBalanceReport:
    """Estimate the cut-balance constant ``K = sup max(r_S, 1/r_S)`` up to ``horizon``.

    ``unbounded-trend`` when ``K`` is infinite or keeps growing between the
    first and second half of the horizon.
    """
    masks, _ = _masks(sys.n)
    if probe is None:
        points = list(_probe_points(sys, sys.domain_start, horizon))
    else:
        points = [(s, sys.weight_matrix(s)) for s in probe]
    mid = 0.5 * (sys.domain_start + horizon)
    best = (1.0, (), sys.domain_start)
    halves = [1.0, 1.0]
    for s, W in points:
        r = cut_ratios(W)
        k = np.maximum(r, np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0), math.inf))
        j = int(np.argmax(k))
        val = float(k[j])
        half = 0 if s < mid else 1
        halves[half] = max(halves[half], val)
        if val > best[0]:
            best = (val, tuple(int(i) for i in np.flatnonzero(masks[j])), float(s))
    K = best[0]
    growing = halves[1] > halves[0] * (1 + 1e-9)
    verdict = "unbounded-trend" if math.isinf(K) or growing else "bounded"
    return CutBalanceReport(K, best[1], best[2], halves[0], halves[1], verdict)


def _reachable(n: int, edges: Iterable[tuple[int, int]], root: int, reverse: bool = False) -> set[int]:
    adj: dict[int, list[int]] = {i: [] for i in range(n)}
    for u, v in edges:
        if reverse:
            u, v = v, u
        adj[u].append(v)
    seen = {root}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def strongly_connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    edges = list(edges)
    return len(_reachable(n, edges, 0)) == n and len(_reachable(n, edges, 0, reverse=True)) == n


def spanning_tree_root(n: int, edges: Iterable[tuple[int, int]]) -> int | None:
    """A node from which every node is reachable, or None."""
    edges = list(edges)
    for root in range(n):
        if len(_reachable(n, edges, root)) == n:
            return root
    return None


@dataclass(frozen=True)
class MoreauReport:
    edges: frozenset
    spanning_tree: bool
    root: int | None


def moreau_edge_set(sys: SystemDefinition, t: float, T: float, delta: float) -> MoreauReport:
    """Edges ``(j, i)`` whose weight ``a_ij`` integrates above ``delta`` on ``[t, t+T]``."""
    if not T > 0 or not delta > 0:
        raise ValueError("T and delta must be positive")
    edges = frozenset(
        (j, i) for i, j in sys.active_pairs() if sys.w[i][j].integrate(t, t + T) > delta
    )
    root = spanning_tree_root(sys.n, edges)
    return MoreauReport(edges, root is not None, root)


@dataclass(frozen=True)
class PersistenceReport:
    first_half: dict
    second_half: dict
    cumulative: dict
    checkpoints: np.ndarray
    candidates: frozenset
    strongly_connected: bool
    fraction: float
    label: str = "heuristic: divergence of an integral cannot be decided from finite data"


def persistent_connectivity_report(
    sys: SystemDefinition, horizon: float, checkpoints: int = 4, fraction: float = 0.25
) -> PersistenceReport:
    """Classify edges whose integral keeps growing as divergence candidates.

    An edge ``(j, i)`` is a candidate when both halves of ``[start, horizon]``
    carry positive mass and the second half carries at least ``fraction`` of
    the first.
    """
    if checkpoints < 2:
        raise ValueError("need at least two checkpoints")
    t0 = sys.domain_start
    mid = 0.5 * (t0 + horizon)
    grid = np.linspace(t0, horizon, checkpoints)
    first, second, cum = {}, {}, {}
    candidates = set()
    for i, j in sys.active_pairs():
        w = sys.w[i][j]
        m1, m2 = w.integrate(t0, mid), w.integrate(mid, horizon)
        first[(j, i)], second[(j, i)] = m1, m2
        cum[(j, i)] = np.array([w.integrate(t0, s) for s in grid])
        if m1 > 0 and m2 > 0 and m2 >= fraction * m1:
            candidates.add((j, i))
    return PersistenceReport(
        first_half=first,
        second_half=second,
        cumulative=cum,
        checkpoints=grid,
        candidates=frozenset(candidates),
        strongly_connected=strongly_connected(sys.n, candidates),
        fraction=fraction,
    )
