import math

import numpy as np
import pytest
from hypothesis import strategies as st

from tvconsensus.weights import PiecewiseWeight, SystemDefinition, TimeSegment

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def record_criterion():
    """Record one acceptance line; the summary is printed at the end of the run."""

    def record(name: str, ok: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((name, bool(ok), detail))
        print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@st.composite
def piecewise_systems(draw, max_n=4, max_segments=3, horizon=4.0):
    """Random systems of constant segments on ``[0, horizon)``."""
    n = draw(st.integers(2, max_n))
    weights = {}
    for i in range(n):
        for j in range(n):
            if i == j or not draw(st.booleans()):
                continue
            k = draw(st.integers(1, max_segments))
            cuts = sorted(set(draw(st.lists(st.floats(0.01, horizon - 0.01), min_size=k, max_size=k))))
            edges = [0.0, *cuts, horizon]
            segs = [
                TimeSegment(lo, hi, c=draw(st.floats(0.0, 3.0)))
                for lo, hi in zip(edges, edges[1:])
                if hi > lo
            ]
            weights[(i, j)] = PiecewiseWeight(segs)
    return SystemDefinition.from_dict(n, weights)


def symmetric_constant(n: int, c: float = 1.0) -> SystemDefinition:
    w = {(i, j): PiecewiseWeight([TimeSegment(0.0, math.inf, c=c)]) for i in range(n) for j in range(n) if i != j}
    return SystemDefinition.from_dict(n, w, name="symmetric", period=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
