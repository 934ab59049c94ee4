"""P-value functions and their Edgington combination at fixed heterogeneity.

A one-sided p-value function evaluated across candidate average effects is a
confidence distribution for the effect.  Combining the study-level functions
by summing them and mapping the sum through the Irwin-Hall CDF gives a
combined p-value function that is again a confidence distribution when the
study pivots are independent uniforms under their own nulls.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Union

import numpy as np
from scipy.special import ndtr, ndtri

from ._rootfind import bisect_increasing
from .errors import InputError, NumericError
from .model import (
    ConfidenceInterval,
    EstimationResult,
    MetaAnalysis,
    Method,
    Study,
    ci_skewness,
)

__all__ = [
    "PValueFunctionSide",
    "wald_p",
    "study_p_greater",
    "irwin_hall_cdf",
    "irwin_hall_pdf",
    "irwin_hall_ppf",
    "combined_p",
    "edgington_p",
    "invert_conditional_cd",
    "confidence_curve",
    "edgington_result",
]

# Above this k the exact alternating sum is abandoned for the central limit
# approximation; the crossover keeps both branches well inside their accurate
# ranges.
NORMAL_APPROX_MIN_K = 12


class PValueFunctionSide(str, Enum):
    GREATER = "greater"
    LESS = "less"
    TWO_SIDED = "two-sided"


def wald_p(
    mu,
    estimate: float,
    se: float,
    side: PValueFunctionSide = PValueFunctionSide.GREATER,
):
    """Normal-model p-value function of a single estimate.

    ``greater`` is Phi((mu - estimate) / se): increasing in mu, 0.5 at the
    estimate, and interpretable as the CDF of a confidence distribution.
    ``two-sided`` folds the two one-sided versions, peaking at 1.
    """
    if se <= 0.0 or not math.isfinite(se):
        raise InputError(f"se must be finite and > 0, got {se!r}")
    z = (np.asarray(mu, dtype=float) - estimate) / se
    if side == PValueFunctionSide.GREATER:
        out = ndtr(z)
    elif side == PValueFunctionSide.LESS:
        out = ndtr(-z)
    elif side == PValueFunctionSide.TWO_SIDED:
        out = 2.0 * ndtr(-np.abs(z))
    else:
        raise InputError(f"unknown side {side!r}")
    return float(out) if np.isscalar(mu) else out


def study_p_greater(mu, study: Study, tau2: float):
    """One-sided p-value function of one study under the random-effects model.

    The study pivot uses the marginal standard deviation
    sqrt(tau2 + se**2), so the same function serves both the fixed-tau2
    conditional analysis and any heterogeneity value being profiled.
    """
    if tau2 < 0.0:
        raise InputError(f"tau2 must be >= 0, got {tau2!r}")
    scale = math.sqrt(tau2 + study.variance)
    z = (np.asarray(mu, dtype=float) - study.estimate) / scale
    out = ndtr(z)
    return float(out) if np.isscalar(mu) else out


def _ih_alternating_sum(s: np.ndarray, k: int, power: int) -> np.ndarray:
    """Kahan-compensated sum of (-1)^j C(k,j) (s-j)_+^power over j = 0..k."""
    total = np.zeros_like(s)
    comp = np.zeros_like(s)
    for j in range(k + 1):
        u = np.clip(s - j, 0.0, None)
        term = ((-1.0) ** j) * math.comb(k, j) * u**power
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def irwin_hall_cdf(s, k: int):
    """CDF of the sum of k independent standard uniform variables.

    For k < 12 the exact piecewise polynomial is evaluated through the
    alternating binomial sum (compensated summation keeps the cancellation
    benign); from k = 12 on the normal approximation with matched mean k/2
    and variance k/12 is used, where the exact sum would start cancelling
    catastrophically.  Values are clamped to [0, 1].
    """
    if k < 1:
        raise InputError(f"k must be >= 1, got {k!r}")
    arr = np.asarray(s, dtype=float)
    if k >= NORMAL_APPROX_MIN_K:
        out = ndtr(math.sqrt(12.0 * k) * (arr / k - 0.5))
    else:
        out = _ih_alternating_sum(arr, k, k) / math.factorial(k)
        out = np.clip(out, 0.0, 1.0)
    return float(out) if np.isscalar(s) else out


def irwin_hall_pdf(s, k: int):
    """Density matching :func:`irwin_hall_cdf`, including its k >= 12 branch."""
    if k < 1:
        raise InputError(f"k must be >= 1, got {k!r}")
    arr = np.asarray(s, dtype=float)
    if k >= NORMAL_APPROX_MIN_K:
        scale = math.sqrt(12.0 * k) / k
        z = scale * (arr - 0.5 * k)
        out = scale * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    else:
        out = _ih_alternating_sum(arr, k, k - 1) / math.factorial(k - 1)
        out = np.clip(out, 0.0, None)
        out = np.where((arr <= 0.0) | (arr >= k), 0.0, out)
    return float(out) if np.isscalar(s) else out


def irwin_hall_ppf(u, k: int):
    """Quantile function matching :func:`irwin_hall_cdf`."""
    if k < 1:
        raise InputError(f"k must be >= 1, got {k!r}")
    arr = np.asarray(u, dtype=float)
    if np.any((arr <= 0.0) | (arr >= 1.0)):
        raise InputError("quantile levels must lie strictly inside (0, 1)")
    if k >= NORMAL_APPROX_MIN_K:
        out = 0.5 * k + ndtri(arr) * math.sqrt(k / 12.0)
    else:
        target = arr
        out = bisect_increasing(
            lambda x: irwin_hall_cdf(x, k) - target,
            np.zeros_like(target),
            np.full_like(target, float(k)),
            residual_tol=1e-13,
        )
    return float(out) if np.isscalar(u) else out


def combined_p(mu, estimates, variances, tau2) -> np.ndarray:
    """Edgington combined one-sided p-value function on raw arrays.

    Sums the study p-value functions at ``mu`` and maps the sum through the
    Irwin-Hall CDF for the number of studies.  ``mu`` may have any shape; the
    study axis is appended and summed out.  Works for a single study too,
    where it reduces to that study's p-value function.
    """
    est = np.asarray(estimates, dtype=float)
    scale = np.sqrt(np.asarray(variances, dtype=float) + tau2)
    z = (np.asarray(mu, dtype=float)[..., None] - est) / scale
    s = ndtr(z).sum(axis=-1)
    return irwin_hall_cdf(s, est.shape[-1])


def edgington_p(mu, ma: MetaAnalysis, tau2: float):
    """Combined p-value function of the average effect at fixed tau2."""
    if tau2 < 0.0:
        raise InputError(f"tau2 must be >= 0, got {tau2!r}")
    out = combined_p(mu, ma.estimates, ma.variances, tau2)
    return float(out) if np.isscalar(mu) else out


def _bracket(ma: MetaAnalysis, tau2) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    scale_max = np.sqrt(np.max(ma.variances) + np.asarray(tau2, dtype=float))
    lo = ma.estimates.min() - 10.0 * scale_max
    hi = ma.estimates.max() + 10.0 * scale_max
    return lo, hi, scale_max


def invert_conditional_cd(
    target,
    ma: MetaAnalysis,
    tau2: float,
    *,
    tol: float = 1e-8,
    max_doublings: int = 60,
):
    """Invert the combined p-value function: find mu with p(mu) = target.

    The root is unique because the combined function is strictly increasing.
    The initial bracket spans the estimates plus ten marginal standard
    deviations on either side and is widened by doubling when a target sits
    in an extreme tail.  ``tol`` applies on the CDF scale.
    """
    t = np.asarray(target, dtype=float)
    if np.any((t <= 0.0) | (t >= 1.0)):
        raise InputError("target must lie strictly inside (0, 1)")
    lo, hi, _ = _bracket(ma, tau2)
    lo = np.full(t.shape, lo)
    hi = np.full(t.shape, hi)

    def p(x):
        return edgington_p(x, ma, tau2)

    width = hi - lo
    for _ in range(max_doublings + 1):
        bad_lo = p(lo) > t
        bad_hi = p(hi) < t
        if not (np.any(bad_lo) or np.any(bad_hi)):
            break
        lo = np.where(bad_lo, lo - width, lo)
        hi = np.where(bad_hi, hi + width, hi)
        width = 2.0 * width
    else:
        raise NumericError("could not bracket the requested CDF level")

    out = bisect_increasing(lambda x: p(x) - t, lo, hi, residual_tol=tol)
    return float(out) if np.isscalar(target) else out


def confidence_curve(cdf_value):
    """Fold a CDF value into the confidence-curve scale |1 - 2 C|."""
    c = np.asarray(cdf_value, dtype=float)
    if np.any((c < 0.0) | (c > 1.0)):
        raise InputError("cdf_value must lie in [0, 1]")
    out = np.abs(1.0 - 2.0 * c)
    return float(out) if np.isscalar(cdf_value) else out


def edgington_result(ma: MetaAnalysis, tau2: float, level: float = 0.95) -> EstimationResult:
    """Median estimate and equi-tailed interval from the combined function.

    This is the plug-in analysis: heterogeneity is fixed at ``tau2`` rather
    than integrated out.
    """
    if not 0.0 < level < 1.0:
        raise InputError(f"level must be in (0, 1), got {level!r}")
    alpha = 1.0 - level
    median, lower, upper = invert_conditional_cd(
        np.array([0.5, alpha / 2.0, 1.0 - alpha / 2.0]), ma, tau2
    )
    ci = ConfidenceInterval(lower, upper, level)
    c0 = edgington_p(0.0, ma, tau2)
    return EstimationResult(
        method=Method.EDGINGTON,
        estimate=float(median),
        ci=ci,
        skewness=ci_skewness(ci, float(median)),
        p_value_at_zero=2.0 * min(c0, 1.0 - c0),
        tau2_used=tau2,
    )
