"""Inverse-variance and small-sample adjusted normal-theory estimators."""

from __future__ import annotations

import numpy as np
from scipy.stats import norm, t as student_t

from .errors import InputError
from .heterogeneity import _warn_if_two_studies, generalized_q, ivw_mean
from .model import ConfidenceInterval, EstimationResult, MetaAnalysis, Method

__all__ = ["ivw_result", "hksj_result"]


def _check_tau2(tau2: float) -> float:
    tau2 = float(tau2)
    if not np.isfinite(tau2) or tau2 < 0.0:
        raise InputError(f"tau2 must be finite and >= 0, got {tau2!r}")
    return tau2


def _check_level(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise InputError(f"level must be in (0, 1), got {level!r}")
    return float(level)


def ivw_result(ma: MetaAnalysis, tau2: float, level: float = 0.95) -> EstimationResult:
    """Weighted mean with normal-quantile interval at the given tau2.

    The standard error is (sum of weights)^(-1/2) with weights
    1 / (variance_i + tau2); the plug-in tau2 is treated as known.
    """
    tau2 = _check_tau2(tau2)
    level = _check_level(level)
    w = 1.0 / (ma.variances + tau2)
    mean = ivw_mean(tau2, ma)
    se = float(np.sqrt(1.0 / w.sum()))
    z = norm.ppf(1.0 - (1.0 - level) / 2.0)
    ci = ConfidenceInterval(mean - z * se, mean + z * se, level)
    p = 2.0 * norm.sf(abs(mean) / se)
    return EstimationResult(
        method=Method.IVW,
        estimate=mean,
        ci=ci,
        skewness=0.0,
        p_value_at_zero=float(p),
        tau2_used=tau2,
    )


def hksj_result(ma: MetaAnalysis, tau2: float, level: float = 0.95) -> EstimationResult:
    """Weighted mean with a variance-rescaled t interval at the given tau2.

    The squared standard error is multiplied by Q(tau2) / (k - 1), where Q is
    the generalized heterogeneity statistic at the same tau2, and quantiles
    come from the t distribution with k - 1 degrees of freedom.  With two
    studies the t quantile is large and the rescaling is noisy.
    """
    tau2 = _check_tau2(tau2)
    level = _check_level(level)
    _warn_if_two_studies(ma)
    k = ma.k
    w = 1.0 / (ma.variances + tau2)
    mean = ivw_mean(tau2, ma)
    q = generalized_q(tau2, ma)
    scale2 = q / (k - 1) / w.sum()
    se = float(np.sqrt(scale2))
    if se == 0.0:
        # All estimates identical: the rescaled variance collapses to zero
        # and the interval degenerates to the point estimate.
        ci = ConfidenceInterval(mean, mean, level)
        p = 0.0 if mean != 0.0 else 1.0
    else:
        tq = student_t.ppf(1.0 - (1.0 - level) / 2.0, k - 1)
        ci = ConfidenceInterval(mean - tq * se, mean + tq * se, level)
        p = 2.0 * student_t.sf(abs(mean) / se, k - 1)
    return EstimationResult(
        method=Method.HKSJ,
        estimate=mean,
        ci=ci,
        skewness=0.0,
        p_value_at_zero=float(p),
        tau2_used=tau2,
    )
