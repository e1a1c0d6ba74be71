import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvconsensus.analysis import rescaling_sequence
from tvconsensus.dynamics import simulate
from tvconsensus.ordering import (
    check_split_constancy,
    cut_bound_violation,
    cut_ratio_bound_check,
    is_sort_permutation,
    largest_gap,
    lyapunov_gap_check,
    movement_certificate,
    ordered_view,
    sort_permutation,
)
from tvconsensus.scenarios import RhoSequence, ScenarioSpec, build_three_agent, build_two_agent_constant

from .conftest import piecewise_systems


def test_sort_permutation_examples():
    assert sort_permutation([3, 1, 2]).tolist() == [1, 2, 0]
    assert sort_permutation([1, 1]).tolist() == [0, 1]
    assert sort_permutation([0, 1, 5]).tolist() == [0, 1, 2]
    with pytest.raises(ValueError):
        sort_permutation([0.0, np.nan])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=1, max_size=8))
def test_sort_permutation_is_the_tie_broken_sort(x):
    sigma = sort_permutation(x)
    assert is_sort_permutation(np.array(x), sigma)
    assert sigma.tolist() == sorted(range(len(x)), key=lambda i: (x[i], i))


def test_view_of_consensus_is_static():
    traj = simulate(build_three_agent(), [0.5] * 3, 0.0, 4.0)
    view = ordered_view(traj)
    assert np.all(view.sigma == np.arange(3))
    assert np.allclose(view.y, 0.5)


def test_pair_never_swaps():
    traj = simulate(build_two_agent_constant(), [1.0, 0.0], 0.0, 3.0)
    view = ordered_view(traj)
    assert np.all(view.sigma == [1, 0])


@settings(max_examples=20, deadline=None)
@given(piecewise_systems(), st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_view_invariants(sys, x0):
    x0 = np.array(x0[: sys.n])
    traj = simulate(sys, x0, 0.0, 4.0)
    view = ordered_view(traj)
    view.check_invariants(slack=1e-9 * max(1.0, float(np.ptp(x0))))
    for k in range(len(traj)):
        W = sys.weight_matrix(float(traj.times[k]))
        s = view.sigma[k]
        assert np.array_equal(view.b[k], W[np.ix_(s, s)])


def test_lyapunov_examples():
    b = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert lyapunov_gap_check([0.0, 1.0], b, 1.0, 1) == (1.0, 1.0)
    lhs, rhs = lyapunov_gap_check([2.0, 2.0, 2.0], np.ones((3, 3)) - np.eye(3), 3.0, 2)
    assert lhs == 0.0 and rhs == 0.0


def test_lyapunov_preconditions():
    b = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ValueError):
        lyapunov_gap_check([1.0, 0.0], b, 1.0, 1)
    with pytest.raises(ValueError):
        lyapunov_gap_check([0.0, 1.0], b, 1.0, 2)
    with pytest.raises(ValueError):
        lyapunov_gap_check([0.0, 1.0], np.array([[0.0, 1.0], [3.0, 0.0]]), 2.0, 1)


def test_cut_bound_violation_signs():
    b = np.array([[0.0, 1.0], [2.0, 0.0]])
    assert cut_bound_violation(b, 2.0) <= 0
    assert cut_bound_violation(b, 1.5) > 0
    assert cut_bound_violation(np.zeros((3, 3)), 1.0) <= 0


def test_cut_ratio_bound_on_three_agent():
    rho = RhoSequence("power", exponent=1.0)
    spec = ScenarioSpec("three_agent", rho=rho, periods=6)
    traj = simulate(spec.build(), spec.initial_state(), *spec.horizon())
    view = ordered_view(traj)
    for p in range(1, 6):
        report = cut_ratio_bound_check(view, 2.0 * p)
        assert report.ok()
        assert report.rmax == pytest.approx(rho(p))


def test_split_constancy_on_chain():
    spec = ScenarioSpec("odd_chain", periods=3)
    view = ordered_view(simulate(spec.build(), spec.initial_state(), *spec.horizon()))
    rep = check_split_constancy(view)
    assert rep.windows > 0 and rep.failures == 0


def test_largest_gap():
    assert largest_gap([0.0, 0.1, 2.0, 2.5]) == 2
    assert largest_gap([0.0, 1.0, 2.0]) == 1


@pytest.mark.parametrize("spec", [ScenarioSpec("three_agent"), ScenarioSpec("odd_chain", m=5)])
def test_certificate_found(spec):
    sys = spec.build()
    resc = rescaling_sequence(sys, 1)
    traj = simulate(sys, spec.initial_state(), resc.t[0], resc.t[-1], extra_times=np.concatenate(resc.intermediates))
    view = ordered_view(traj)
    l = largest_gap(view.y[0])
    cert = movement_certificate(view, 0, l, resc)
    assert cert.required and cert.found
    assert cert.achieved >= cert.bound


def test_certificate_not_required_for_closed_gap():
    sys = build_three_agent()
    resc = rescaling_sequence(sys, 1)
    view = ordered_view(simulate(sys, [0.0, 0.0, 1.0], 0.0, resc.t[-1]))
    assert movement_certificate(view, 0, 1, resc).required is False
