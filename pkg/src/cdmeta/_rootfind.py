"""Vectorized bracketing root finders for monotone functions.

The solvers operate elementwise: each element carries its own bracket and
target while sharing one vectorized callable.  Bisection is used throughout
because every inverted function in this package is strictly monotone and
cheap to evaluate on whole arrays.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NumericError


def bisect_increasing(
    f: Callable[[np.ndarray], np.ndarray],
    lo,
    hi,
    *,
    residual_tol: float = 1e-10,
    max_iter: int = 120,
) -> np.ndarray:
    """Solve f(x) = 0 elementwise for an increasing f with f(lo) <= 0 <= f(hi).

    Iterates until either every residual is below ``residual_tol`` or the
    bracket has collapsed to adjacent floats.  ``max_iter = 120`` exhausts
    double precision for any practical bracket width.
    """
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    lo = lo.astype(float).copy()
    hi = hi.astype(float).copy()
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        r = f(mid)
        below = r < 0.0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        new_mid = 0.5 * (lo + hi)
        # The residual was measured at mid, so mid is the point to return;
        # new_mid == mid detects a bracket collapsed to adjacent floats.
        if np.all((np.abs(r) <= residual_tol) | (new_mid == mid)):
            return mid
        mid = new_mid
    return mid


def expand_upward(
    f: Callable[[np.ndarray], np.ndarray],
    start,
    *,
    max_doublings: int = 200,
    what: str = "bracket",
) -> np.ndarray:
    """Double ``start`` elementwise until f becomes nonnegative everywhere."""
    hi = np.array(start, dtype=float, copy=True)
    for _ in range(max_doublings):
        short = f(hi) < 0.0
        if not np.any(short):
            return hi
        hi = np.where(short, 2.0 * hi, hi)
    raise NumericError(
        f"could not expand {what} within {max_doublings} doublings"
    )
