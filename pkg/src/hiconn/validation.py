"""Validation helpers for raw adjacency matrices."""

from __future__ import annotations

import numpy as np

from .errors import GraphValidationError

SYMMETRY_TOL = 1e-9
DIAGONAL_TOL = 1e-9


def check_square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise GraphValidationError(f"adjacency must be square, got shape {a.shape}")
    return a


def check_finite(a: np.ndarray) -> None:
    bad = ~np.isfinite(a)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise GraphValidationError(f"non-finite entry {a[i, j]!r} at cell ({i}, {j})")


def check_nonnegative(a: np.ndarray) -> None:
    neg = a < 0
    if neg.any():
        i, j = np.argwhere(neg)[0]
        raise GraphValidationError(f"negative weight {a[i, j]!r} at cell ({i}, {j})")


def check_symmetric(a: np.ndarray, tol: float = SYMMETRY_TOL) -> None:
    dev = np.abs(a - a.T).max() if a.size else 0.0
    if dev > tol:
        raise GraphValidationError(f"adjacency asymmetric: max |A - A^T| = {dev:g} exceeds {tol:g}")


def zeroed_diagonal(a: np.ndarray, tol: float = DIAGONAL_TOL) -> np.ndarray:
    """Return a copy with the diagonal forced to zero; reject large diagonals."""
    d = np.abs(np.diag(a))
    if d.size and d.max() >= tol:
        i = int(np.argmax(d))
        raise GraphValidationError(f"nonzero diagonal entry {a[i, i]!r} at node {i}")
    out = a.copy()
    np.fill_diagonal(out, 0.0)
    return out
