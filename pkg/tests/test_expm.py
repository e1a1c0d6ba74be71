import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tvconsensus.dynamics import laplacian_generator
from tvconsensus.expm import expm


def test_zero_and_diagonal():
    assert np.array_equal(expm(np.zeros((3, 3))), np.eye(3))
    D = np.diag([-1.0, 0.5, 2.0])
    assert np.allclose(expm(D), np.diag(np.exp([-1.0, 0.5, 2.0])), rtol=1e-13)


def test_two_agent_closed_form():
    t = 0.7
    E = expm(t * np.array([[-1.0, 1.0], [1.0, -1.0]]))
    e = np.exp(-2 * t)
    assert np.allclose(E, 0.5 * np.array([[1 + e, 1 - e], [1 - e, 1 + e]]), atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(arrays(float, (4, 4), elements=st.floats(0, 5)), st.floats(0.01, 20))
def test_matches_scipy_on_generators(W, h):
    A = laplacian_generator(W) * h
    E = expm(A)
    ref = scipy.linalg.expm(A)
    assert np.allclose(E, ref, rtol=1e-10, atol=1e-12)
    # stochastic: non-negative with unit row sums
    assert np.all(E >= -1e-12)
    assert np.allclose(E.sum(axis=1), 1.0, atol=1e-10)


def test_rejects_non_square():
    with pytest.raises(ValueError):
        expm(np.zeros((2, 3)))
