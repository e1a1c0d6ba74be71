"""Order-preserving view of a trajectory and executable checks of its properties.

At each sample the agents are relabeled by the lexicographic sort of
``(x_i, i)``, giving sorted positions ``y`` and permuted weights
``b_ij = a_{sigma(i) sigma(j)}``. A gap index ``l`` is the size of the lower
group: the gap ``l`` sits between ``y[l-1]`` and ``y[l]`` (0-based arrays).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import RescalingSequence, _masks, cut_inflows, running_max_ratio
from .dynamics import Trajectory


def sort_permutation(x) -> np.ndarray:
    """``sigma`` with ``sigma[k]`` the label in sorted slot ``k``; ties go to the smaller label."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("positions must be finite")
    return np.lexsort((np.arange(x.size), x))


def is_sort_permutation(x, sigma) -> bool:
    x = np.asarray(x)
    sigma = np.asarray(sigma)
    if sorted(sigma.tolist()) != list(range(x.size)):
        return False
    a, b = sigma[:-1], sigma[1:]
    return bool(np.all((x[a] < x[b]) | ((x[a] == x[b]) & (a < b))))


@dataclass(frozen=True)
class OrderedView:
    times: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    b: np.ndarray
    trajectory: Trajectory

    @property
    def n(self) -> int:
        return self.y.shape[1]

    def index_of(self, t: float) -> int:
        k = self.trajectory.index_of(t)
        if k is None:
            raise ValueError(f"t={t} is not a sample time")
        return k

    def check_invariants(self, slack: float | None = None) -> None:
        """Sortedness per sample, ``y_1`` up and ``y_n`` down, and the diameter identity."""
        d = self.trajectory.diameters()
        if slack is None:
            slack = 1e-9 * max(float(d[0]), 1e-300)
        assert np.all(np.diff(self.y, axis=1) >= 0), "y not sorted"
        assert np.all(np.diff(self.y[:, 0]) >= -slack), "y_1 decreased"
        assert np.all(np.diff(self.y[:, -1]) <= slack), "y_n increased"
        assert np.allclose(self.y[:, -1] - self.y[:, 0], d, rtol=0, atol=slack), "diameter mismatch"


def _weights_at_samples(traj: Trajectory) -> np.ndarray:
    sys = traj.system
    pieces = sys.pieces(float(traj.times[0]), float(traj.times[-1]))
    starts = np.array([p.t_start for p in pieces])
    out = np.empty((len(traj), sys.n, sys.n))
    for k, t in enumerate(traj.times):
        if t >= pieces[-1].t_end:
            out[k] = sys.weight_matrix(float(t))
            continue
        piece = pieces[int(np.searchsorted(starts, t, side="right")) - 1]
        out[k] = piece.weights_at(float(t))
    return out


def ordered_view(traj: Trajectory) -> OrderedView:
    sigma = np.lexsort((np.broadcast_to(np.arange(traj.n), traj.states.shape), traj.states), axis=-1)
    y = np.take_along_axis(traj.states, sigma, axis=1)
    W = _weights_at_samples(traj)
    rows = sigma[:, :, None]
    cols = sigma[:, None, :]
    b = W[np.arange(len(traj))[:, None, None], rows, cols]
    return OrderedView(times=traj.times, y=y, sigma=sigma, b=b, trajectory=traj)


def cut_bound_violation(b: np.ndarray, R: float) -> float:
    """Largest violation of ``(1/R) in_S <= out_S <= R in_S`` over all cuts (<= 0 when admissible).

    ``in_S = sum_{i in S, j not in S} b_ij`` and ``out_S`` is the same sum with
    ``b_ji``. Violations are relative to the largest cut sum.
    """
    inflow = cut_inflows(b)
    outflow = inflow[..., ::-1]
    scale = max(float(np.max(inflow, initial=0.0)), 1e-300)
    if math.isinf(R):
        return -math.inf
    lower = inflow / R - outflow
    upper = outflow - R * inflow
    return float(np.max(np.maximum(lower, upper))) / scale


def lyapunov_gap_check(y, b, R: float, l: int, tol: float = 1e-12) -> tuple[float, float]:
    """Both sides of the weighted-sum lower bound for the lower group of size ``l``.

    Returns ``(lhs, rhs)`` with
    ``lhs = sum_{i<l} R**-(i+1) sum_j b_ij (y_j - y_i)`` and
    ``rhs = (y_l - y_{l-1}) R**-l sum_{i>=l, j<l} b_ji`` (0-based). Callers assert
    ``lhs >= 0`` and ``lhs >= rhs``.
    """
    y = np.asarray(y, dtype=float)
    b = np.asarray(b, dtype=float)
    n = y.size
    if b.shape != (n, n) or np.any(b < 0):
        raise ValueError("b must be a non-negative n x n matrix")
    if not 1 <= l <= n - 1:
        raise ValueError(f"gap index must be in 1..{n - 1}, got {l}")
    if R < 1:
        raise ValueError("R must be >= 1")
    if np.any(np.diff(y) < 0):
        raise ValueError("y must be sorted")
    if cut_bound_violation(b, R) > tol:
        raise ValueError(f"b violates the cut ratio bound for R={R}")
    pull = (b * (y[None, :] - y[:, None])).sum(axis=1)
    w = float(R) ** -np.arange(1, l + 1)
    lhs = float(np.dot(w, pull[:l]))
    rhs = float((y[l] - y[l - 1]) * float(R) ** -l * b[:l, l:].sum())
    return lhs, rhs


@dataclass(frozen=True)
class CutBoundReport:
    rmax: float
    worst_violation: float
    worst_time: float
    samples_checked: int

    def ok(self, tol: float = 1e-12) -> bool:
        return self.worst_violation <= tol


def cut_ratio_bound_check(view: OrderedView, t: float) -> CutBoundReport:
    """Check the permuted weights against ``r(t)`` at every sample ``s <= t``."""
    sys = view.trajectory.system
    R = running_max_ratio(sys, t)
    _masks(view.n)
    idx = np.flatnonzero(view.times <= t)
    worst, worst_t = -math.inf, math.nan
    seen: dict[bytes, float] = {}
    for k in idx:
        key = view.b[k].tobytes()
        if key not in seen:
            seen[key] = cut_bound_violation(view.b[k], R)
        if seen[key] > worst:
            worst, worst_t = seen[key], float(view.times[k])
    return CutBoundReport(R, worst, worst_t, int(idx.size))


def largest_gap(y) -> int:
    """Gap index (lower group size) of the widest adjacent gap; first one on ties."""
    return int(np.argmax(np.diff(np.asarray(y)))) + 1


@dataclass(frozen=True)
class SplitWindowReport:
    windows: int
    failures: int


def check_split_constancy(view: OrderedView, width: int = 10) -> SplitWindowReport:
    """Over sliding windows of ``width`` samples, wherever some gap ``l`` stays open
    (``max y_l < min y_{l+1}``), the agent sets below and above it must not change."""
    from numpy.lib.stride_tricks import sliding_window_view

    N = len(view.times)
    width = min(width, N)
    windows = failures = 0
    for l in range(1, view.n):
        lower = np.sort(view.sigma[:, :l], axis=1)
        changed = np.any(lower[1:] != lower[:-1], axis=1).astype(int)
        c = sliding_window_view(view.y[:, l - 1], width).max(axis=1)
        C = sliding_window_view(view.y[:, l], width).min(axis=1)
        open_ = c < C
        if width > 1:
            moves = sliding_window_view(changed, width - 1).sum(axis=1)
        else:
            moves = np.zeros(N, dtype=int)
        windows += int(open_.sum())
        failures += int(np.sum(open_ & (moves > 0)))
    return SplitWindowReport(windows, failures)


@dataclass(frozen=True)
class Certificate:
    required: bool
    found: bool
    m: int | None = None
    tau_prime: float | None = None
    achieved: float | None = None
    bound: float | None = None


def movement_certificate(
    view: OrderedView,
    p: int,
    l: int,
    resc: RescalingSequence,
    q: int = 0,
    tau: float | None = None,
) -> Certificate:
    """Search samples for a rank ``m <= l`` and time ``tau'`` in ``[t_p, t_p^{q+1}]`` with

    ``y_m(tau') - y_m(tau) >= R**(m - l - 1) / (4n) * (y_{l+1}(tau) - y_l(tau))``,
    ``R = r(t_{p+1})``, ``tau = t_p`` unless given (then in ``[t_p, t_p^q]``).
    ``m`` is the 1-based rank.
    """
    if not 0 <= p < resc.periods:
        raise ValueError(f"period {p} outside the computed rescaling range 0..{resc.periods - 1}")
    steps = resc.intermediates[p]
    if not 0 <= q < len(steps) - 1:
        raise ValueError(f"step {q} outside 0..{len(steps) - 2}")
    n = view.n
    if not 1 <= l <= n - 1:
        raise ValueError(f"gap index must be in 1..{n - 1}")
    t_lo, t_hi = float(steps[0]), float(steps[q + 1])
    tau = t_lo if tau is None else tau
    if not t_lo <= tau <= steps[q]:
        raise ValueError("tau must lie in [t_p, t_p^q]")
    k_tau = view.index_of(tau)
    y_tau = view.y[k_tau]
    gap = y_tau[l] - y_tau[l - 1]
    if not gap > 0:
        return Certificate(required=False, found=False)
    R = float(resc.rmax_at[p + 1])
    if math.isinf(R):
        raise ValueError("r(t_{p+1}) is infinite; the bound is vacuous")
    window = np.flatnonzero((view.times >= t_lo) & (view.times <= t_hi * (1 + 1e-15)))
    for k in window:
        for m in range(1, l + 1):
            need = R ** (m - l - 1) / (4 * n) * gap
            moved = view.y[k, m - 1] - y_tau[m - 1]
            if moved >= need:
                return Certificate(True, True, m, float(view.times[k]), float(moved), float(need))
    return Certificate(required=True, found=False)
