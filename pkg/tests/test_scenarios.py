import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvconsensus.dynamics import simulate
from tvconsensus.scenarios import (
    SCENARIO_NAMES,
    RhoSequence,
    ScenarioSpec,
    build_odd_chain,
    build_ultimate_counterexample,
    odd_chain_x0,
    oracle_lambda,
    oracle_three_agent_run,
    oracle_three_agent_step,
    oracle_ultimate_gap,
)


def test_rho_kinds():
    assert RhoSequence().first(3).tolist() == [1, 1, 1]
    assert RhoSequence("linear").first(4).tolist() == [1, 1, 2, 3]
    assert RhoSequence("power", exponent=2).first(3).tolist() == [1, 4, 9]
    assert RhoSequence("custom", values=(1, 2)).first(4).tolist() == [1, 2, 2, 2]
    for bad in ({"kind": "constant", "value": 0.5}, {"kind": "custom", "values": (2, 1)}, {"kind": "x"}):
        with pytest.raises(ValueError):
            RhoSequence(**bad)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["constant", "linear", "power"]), st.floats(0, 3), st.integers(0, 500))
def test_rho_at_least_one_and_non_decreasing(kind, e, p):
    rho = RhoSequence(kind, exponent=e)
    assert 1 <= rho(p) <= rho(p + 1)


def test_counterexample_segments():
    w = build_ultimate_counterexample().w[0][1]
    segs = list(w.segments_between(0.0, 4.0))
    assert (segs[0].t_start, segs[0].t_end, segs[0].c) == (0.0, 0.5, 1.0)
    assert (segs[3].t_start, segs[3].t_end) == (3.0, 3.0625)
    assert w.evaluate(3.5) == 0.0


def test_gap_oracle():
    assert oracle_ultimate_gap(0, 2.0) == 2.0
    assert oracle_ultimate_gap(1, 1.0) == pytest.approx(math.exp(-1))
    assert oracle_ultimate_gap(math.inf, 1.0) == pytest.approx(0.135335, abs=1e-6)


def test_lambda_value():
    assert oracle_lambda(1.0) == pytest.approx((1 - math.exp(-2)) / 2)
    assert oracle_lambda(1.0) == pytest.approx(0.4323324, abs=1e-7)


def test_step_fixed_point():
    mid, end = oracle_three_agent_step([0.3] * 3, 5.0)
    assert np.allclose(mid, 0.3) and np.allclose(end, 0.3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(1, 100))
def test_step_lower_bound(x, rho_p):
    x = sorted(x)
    _, end = oracle_three_agent_step(x, rho_p)
    lam = oracle_lambda(rho_p)
    assert end[2] - end[0] >= (1 - 2 * lam) * (x[2] - x[0]) - 1e-12


def test_oracle_run_matches_simulation():
    rho = RhoSequence("power", exponent=1.0)
    spec = ScenarioSpec("three_agent", rho=rho, periods=10)
    traj = simulate(spec.build(), spec.initial_state(), *spec.horizon())
    ref = oracle_three_agent_run(spec.initial_state(), rho, 10)
    got = np.array([traj.at(2.0 * p).x for p in range(11)])
    assert np.allclose(got, ref, rtol=1e-9, atol=1e-12)


def test_odd_chain_shape():
    sys = build_odd_chain(5)
    assert sys.n == 11 and sys.period == 6.0
    assert np.ptp(odd_chain_x0(5)) == 2.0
    with pytest.raises(ValueError):
        build_odd_chain(1)


def test_odd_chain_blocks_are_chains():
    # each sub-interval couples exactly two neighbours on each side
    sys = build_odd_chain(3, RhoSequence("constant", value=2.0))
    for s in range(4):
        W = sys.weight_matrix(s + 0.5)
        pairs = {tuple(sorted(ij)) for ij in zip(*np.nonzero(W))}
        assert all(abs(i - j) == 1 for i, j in pairs)


@pytest.mark.parametrize("name", [n for n in SCENARIO_NAMES if n != "custom"])
def test_every_scenario_simulates(name):
    spec = ScenarioSpec(name, periods=3)
    traj = simulate(spec.build(), spec.initial_state(), *spec.horizon())
    traj.check_invariants()
    assert traj.n == spec.n


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec("nope")
    with pytest.raises(ValueError):
        ScenarioSpec("three_agent", x0=(1.0, 2.0))
    with pytest.raises(ValueError):
        ScenarioSpec("three_agent", periods=0)
    with pytest.raises(ValueError):
        ScenarioSpec("custom")
