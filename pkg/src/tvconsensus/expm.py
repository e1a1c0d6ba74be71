"""Matrix exponential by scaling and squaring with a truncated Taylor series."""
from __future__ import annotations

import math

import numpy as np

_EPS = np.finfo(float).eps


def expm(A: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Return ``exp(A)`` to roughly ``tol`` relative accuracy in the 1-norm.

    ``A`` is scaled by ``2**-s`` until its norm is at most 1/2, the Taylor
    series is summed until the next term is below ``tol / 2**s`` (the squaring
    phase amplifies the local error by about ``2**s``), then the result is
    squared ``s`` times.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"expm needs a square matrix, got shape {A.shape}")
    eye = np.eye(n)
    norm = np.abs(A).sum(axis=0).max() if n else 0.0
    if norm == 0.0:
        return eye
    if not math.isfinite(norm):
        raise ValueError("matrix has non-finite entries")
    s = max(0, math.ceil(math.log2(norm / 0.5)))
    X = A / 2.0**s
    local_tol = max(tol / 2.0**s, _EPS)
    result = eye.copy()
    term = eye
    for k in range(1, 60):
        term = term @ X / k
        result += term
        if np.abs(term).sum(axis=0).max() <= local_tol * np.abs(result).sum(axis=0).max():
            break
    for _ in range(s):
        result = result @ result
    return result
