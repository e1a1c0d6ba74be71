"""Integration of the consensus dynamics ``x' = A(t) x``.

``A(t)`` has the weights ``a_ij(t)`` off the diagonal and minus the row sums
on the diagonal. The right-hand side jumps at segment boundaries, so every
breakpoint is a step boundary and the solution is assembled piece by piece.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import NumericalFailure
from .expm import expm
from .weights import Piece, SystemDefinition

EXACT = "exact_exponential"
RUNGE_KUTTA = "runge_kutta"


@dataclass(frozen=True)
class SolverConfig:
    method: str = EXACT
    step_tolerance: float = 1e-10
    max_step: float = 0.1
    sample_stride: int = 1

    def __post_init__(self):
        if self.method not in (EXACT, RUNGE_KUTTA):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.step_tolerance > 0:
            raise ValueError("step_tolerance must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")


@dataclass(frozen=True)
class State:
    t: float
    x: np.ndarray


def laplacian_generator(W: np.ndarray) -> np.ndarray:
    A = np.array(W, dtype=float, copy=True)
    np.fill_diagonal(A, 0.0)
    A[np.diag_indices_from(A)] = -A.sum(axis=1)
    return A


def generator_matrix(sys: SystemDefinition, t: float) -> np.ndarray:
    return laplacian_generator(sys.weight_matrix(t))


def diameter(state) -> float:
    x = state.x if isinstance(state, State) else np.asarray(state)
    return float(np.max(x) - np.min(x))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    breakpoints: np.ndarray
    system: SystemDefinition
    config: SolverConfig = field(default_factory=SolverConfig)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k) -> State:
        return State(float(self.times[k]), self.states[k])

    @property
    def samples(self) -> list[State]:
        return [self[k] for k in range(len(self))]

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def diameters(self) -> np.ndarray:
        return self.states.max(axis=1) - self.states.min(axis=1)

    def index_of(self, t: float) -> int | None:
        k = int(np.searchsorted(self.times, t))
        for cand in (k - 1, k):
            if 0 <= cand < len(self.times) and abs(self.times[cand] - t) <= 1e-12 * max(1.0, abs(t)):
                return cand
        return None

    def at(self, t: float) -> State:
        """State at an arbitrary time in range, re-integrating from the previous sample."""
        if not self.times[0] <= t <= self.times[-1] * (1 + 1e-15) + 1e-15:
            raise ValueError(f"t={t} outside trajectory span [{self.times[0]}, {self.times[-1]}]")
        k = self.index_of(t)
        if k is not None:
            return self[k]
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        sub = simulate(self.system, self.states[k], float(self.times[k]), t, self.config)
        return sub[-1]

    def check_invariants(self, slack: float | None = None) -> None:
        """Raise AssertionError unless max is non-increasing and min non-decreasing."""
        if slack is None:
            slack = 1e-9 * max(float(self.diameters()[0]), 1e-300)
        assert np.all(np.diff(self.times) > 0), "sample times not strictly increasing"
        hi = self.states.max(axis=1)
        lo = self.states.min(axis=1)
        assert np.all(np.diff(hi) <= slack), "max position increased"
        assert np.all(np.diff(lo) >= -slack), "min position decreased"


def _dopri_tableau():
    c = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
    a = [
        [],
        [1 / 5],
        [3 / 40, 9 / 40],
        [44 / 45, -56 / 15, 32 / 9],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
        [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
    ]
    b5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
    b4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
    return c, a, b5, b4


_C, _A, _B5, _B4 = _dopri_tableau()


def _check_finite(x: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(x)):
        raise NumericalFailure(f"non-finite state at t={t}")


def _rk_piece(piece: Piece, x: np.ndarray, a: float, b: float, cfg: SolverConfig, scale: float):
    """Dormand-Prince 5(4) over ``[a, b]``; yields (t, x) after each accepted step."""
    const_gen = laplacian_generator(piece.const)
    recip_gen = laplacian_generator(piece.recip) if piece.has_reciprocal else None

    def f(t, y):
        if recip_gen is None:
            return const_gen @ y
        return const_gen @ y + (recip_gen @ y) / t

    tol = cfg.step_tolerance
    atol = tol * scale
    t = a
    stiff = np.abs(const_gen).max() + (np.abs(recip_gen).max() / a if recip_gen is not None else 0.0)
    h = min(cfg.max_step, b - a, 0.1 / stiff if stiff > 0 else b - a)
    k = np.empty((7, x.size))
    k[0] = f(t, x)
    while t < b:
        h = min(h, b - t)
        last = (t + h >= b) or (b - (t + h) <= 1e-14 * max(1.0, abs(b)))
        if last:
            h = b - t
        for s in range(1, 7):
            k[s] = f(t + _C[s] * h, x + h * (np.dot(_A[s], k[:s])))
        x5 = x + h * (_B5 @ k)
        x4 = x + h * (_B4 @ k)
        err_scale = atol + tol * np.maximum(np.abs(x), np.abs(x5))
        err = float(np.max(np.abs(x5 - x4) / err_scale))
        if not math.isfinite(err):
            raise NumericalFailure(f"non-finite error estimate at t={t}")
        if err <= 1.0:
            t = b if last else t + h
            x = x5
            _check_finite(x, t)
            k[0] = k[6]  # first-same-as-last
            yield t, x
        factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        h = min(cfg.max_step, h * factor)
        if h < 1e-14 * max(1.0, abs(t)):
            raise NumericalFailure(f"step size underflow at t={t}")


def _exact_piece(piece: Piece, x: np.ndarray, a: float, b: float, cfg: SolverConfig):
    gen = laplacian_generator(piece.const)
    steps = max(1, math.ceil((b - a) / cfg.max_step - 1e-9))
    h = (b - a) / steps
    moving = bool(np.any(gen))
    E = expm(gen * h, cfg.step_tolerance) if moving else None
    for q in range(1, steps + 1):
        if moving:
            x = E @ x
            _check_finite(x, a + q * h)
        yield (b if q == steps else a + q * h), x


def simulate(
    sys: SystemDefinition,
    x0: Sequence[float],
    t0: float,
    t1: float,
    cfg: SolverConfig | None = None,
    extra_times: Sequence[float] = (),
) -> Trajectory:
    """Integrate from ``(t0, x0)`` to ``t1``.

    Samples are recorded at every breakpoint and at every internal step
    (decimated by ``cfg.sample_stride``); ``extra_times`` are forced to be
    step boundaries and samples as well.
    """
    cfg = cfg or SolverConfig()
    x = np.array(x0, dtype=float)
    if x.shape != (sys.n,):
        raise ValueError(f"initial state must have length {sys.n}, got shape {x.shape}")
    _check_finite(x, t0)
    if not t1 > t0:
        raise ValueError(f"need t0 < t1, got [{t0}, {t1}]")
    pieces = _split_pieces(sys.pieces(t0, t1), extra_times)
    scale = max(float(np.max(np.abs(x))), float(np.ptp(x)), 1e-300)

    times = [float(t0)]
    states = [x.copy()]
    breaks = []
    # overflow is reported as NumericalFailure by the finiteness checks
    with np.errstate(over="ignore", invalid="ignore"):
        for piece in pieces:
            a, b = piece.t_start, piece.t_end
            if a > t0:
                breaks.append(a)
            if cfg.method == EXACT and not piece.has_reciprocal:
                stepper = _exact_piece(piece, x, a, b, cfg)
            else:
                stepper = _rk_piece(piece, x, a, b, cfg, scale)
            count = 0
            for t, x in stepper:
                count += 1
                if t == b or count % cfg.sample_stride == 0:
                    if t > times[-1]:
                        times.append(t)
                        states.append(x.copy())
                    else:
                        states[-1] = x.copy()
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        breakpoints=np.array(breaks),
        system=sys,
        config=cfg,
    )


def _split_pieces(pieces: list[Piece], extra_times: Sequence[float]) -> list[Piece]:
    extra = sorted(set(float(t) for t in extra_times))
    if not extra:
        return pieces
    out = []
    for piece in pieces:
        cuts = [t for t in extra if piece.t_start < t < piece.t_end]
        edges = [piece.t_start, *cuts, piece.t_end]
        for lo, hi in zip(edges, edges[1:]):
            out.append(replace(piece, t_start=lo, t_end=hi))
    return out


@dataclass(frozen=True)
class ConsensusResult:
    reached: bool
    time: float | None
    final_diameter: float


def detect_consensus(traj: Trajectory, tol: float) -> ConsensusResult:
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    diam = traj.diameters()
    hit = np.flatnonzero(diam <= tol)
    if hit.size:
        return ConsensusResult(True, float(traj.times[hit[0]]), float(diam[-1]))
    return ConsensusResult(False, None, float(diam[-1]))
