"""Between-study variance: point estimators and its confidence distribution.

Everything here is built on the generalized heterogeneity statistic
Q(tau2) = sum of 1/(se_i**2 + tau2) * (estimate_i - ivw_mean(tau2))**2,
which is chi-square with k - 1 degrees of freedom when tau2 is the true
value and strictly decreasing in tau2.  Inverting it at chi-square quantiles
gives interval estimates; treating the chi-square variate as the pivot gives
a full confidence distribution with a point mass at zero.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.stats import chi2

from ._rootfind import bisect_increasing, expand_upward
from .errors import ConvergenceError, InputError, LowInformationWarning
from .model import ConfidenceInterval, MetaAnalysis

__all__ = [
    "generalized_q",
    "ivw_mean",
    "dq_dtau2",
    "heterogeneity_test_pvalue",
    "tau2_confidence_density",
    "tau2_cd",
    "tau2_cd_quantile",
    "tau2_atom",
    "sample_tau2",
    "paule_mandel",
    "reml_tau2",
    "q_profile_ci",
    "higgins_i2",
    "display_upper_bound",
    "Tau2Summary",
    "tau2_cd_summary",
    "Tau2ConfidenceDistribution",
]


def _warn_if_two_studies(ma: MetaAnalysis) -> None:
    if ma.k == 2:
        warnings.warn(
            "only one degree of freedom for heterogeneity: results are "
            "extremely imprecise",
            LowInformationWarning,
            stacklevel=3,
        )


def _q_raw(tau2: np.ndarray, estimates: np.ndarray, variances: np.ndarray) -> np.ndarray:
    w = 1.0 / (variances + tau2[..., None])
    mu = (w * estimates).sum(axis=-1) / w.sum(axis=-1)
    r = estimates - mu[..., None]
    return (w * r * r).sum(axis=-1)


def _validate_tau2(tau2) -> np.ndarray:
    arr = np.asarray(tau2, dtype=float)
    if np.any(arr < 0.0) or not np.all(np.isfinite(arr)):
        raise InputError("tau2 must be finite and >= 0")
    return arr


def generalized_q(tau2, ma: MetaAnalysis):
    """Generalized heterogeneity statistic; Cochran's Q at tau2 = 0."""
    arr = _validate_tau2(tau2)
    out = _q_raw(arr, ma.estimates, ma.variances)
    return float(out) if np.isscalar(tau2) else out


def ivw_mean(tau2, ma: MetaAnalysis):
    """Inverse-variance weighted average with weights 1/(se**2 + tau2)."""
    arr = _validate_tau2(tau2)
    w = 1.0 / (ma.variances + arr[..., None])
    out = (w * ma.estimates).sum(axis=-1) / w.sum(axis=-1)
    return float(out) if np.isscalar(tau2) else out


def dq_dtau2(tau2, ma: MetaAnalysis):
    """Analytic derivative of the generalized Q statistic in tau2.

    Product rule over the weights and the weighted mean: with
    w_i = 1/(se_i**2 + tau2), dw_i = -w_i**2, A = sum(w * theta),
    B = sum(w), the mean derivative is (B A' - A B') / B**2 and

        dQ = sum(dw_i * r_i**2 - 2 w_i r_i * dmu).

    The statistic is nonincreasing, so the result is always <= 0.
    """
    arr = _validate_tau2(tau2)
    theta = ma.estimates
    w = 1.0 / (ma.variances + arr[..., None])
    dw = -w * w
    b = w.sum(axis=-1)
    a = (w * theta).sum(axis=-1)
    db = dw.sum(axis=-1)
    da = (dw * theta).sum(axis=-1)
    mu = a / b
    dmu = (b * da - a * db) / (b * b)
    r = theta - mu[..., None]
    out = (dw * r * r - 2.0 * w * r * dmu[..., None]).sum(axis=-1)
    out = np.minimum(out, 0.0)
    return float(out) if np.isscalar(tau2) else out


def heterogeneity_test_pvalue(ma: MetaAnalysis) -> float:
    """P-value of the chi-square test of tau2 = 0 based on Q(0)."""
    _warn_if_two_studies(ma)
    return float(chi2.sf(generalized_q(0.0, ma), ma.k - 1))


def tau2_atom(ma: MetaAnalysis) -> float:
    """Point mass at tau2 = 0 of the heterogeneity confidence distribution.

    Equals the heterogeneity-test p-value: the share of chi-square pivot
    values exceeding Q(0), for which no positive tau2 solves the pivot
    equation.
    """
    return float(chi2.sf(generalized_q(0.0, ma), ma.k - 1))


def tau2_confidence_density(tau2, ma: MetaAnalysis):
    """Confidence density of tau2 on (0, inf) by change of variables.

    f_chi2(Q(tau2); k - 1) * |dQ/dtau2|.  The distribution additionally
    carries the atom at zero returned by :func:`tau2_atom`; the density alone
    integrates to 1 - atom.
    """
    _warn_if_two_studies(ma)
    arr = _validate_tau2(tau2)
    q = _q_raw(arr, ma.estimates, ma.variances)
    out = chi2.pdf(q, ma.k - 1) * np.abs(dq_dtau2(arr, ma))
    return float(out) if np.isscalar(tau2) else out


def tau2_cd(tau2, ma: MetaAnalysis):
    """CDF of the tau2 confidence distribution (atom at zero included)."""
    arr = _validate_tau2(tau2)
    out = chi2.sf(_q_raw(arr, ma.estimates, ma.variances), ma.k - 1)
    return float(out) if np.isscalar(tau2) else out


def _invert_q(ma: MetaAnalysis, q_values, *, residual_tol: float = 1e-12) -> np.ndarray:
    """Solve Q(t) = q elementwise; values at or above Q(0) map to t = 0."""
    theta = ma.estimates
    v = ma.variances
    q = np.atleast_1d(np.asarray(q_values, dtype=float))
    out = np.zeros(q.shape)
    q0 = float(_q_raw(np.asarray(0.0), theta, v))
    active = q < q0
    if active.any():
        qa = q[active]
        start = np.full(qa.shape, 4.0 * float(v.max()))
        hi = expand_upward(
            lambda t: qa - _q_raw(t, theta, v),
            start,
            max_doublings=200,
            what="tau2 search interval",
        )
        # qa - Q(t) is increasing in t, crossing zero at the root.
        roots = bisect_increasing(
            lambda t: qa - _q_raw(t, theta, v),
            np.zeros(qa.shape),
            hi,
            residual_tol=residual_tol,
            max_iter=140,
        )
        out[active] = roots
    return out


def tau2_cd_quantile(ma: MetaAnalysis, p):
    """Quantile of the tau2 confidence distribution (0 within the atom)."""
    arr = np.asarray(p, dtype=float)
    if np.any((arr <= 0.0) | (arr >= 1.0)):
        raise InputError("p must lie strictly inside (0, 1)")
    out = _invert_q(ma, chi2.isf(arr, ma.k - 1)).reshape(arr.shape)
    return float(out) if np.isscalar(p) else out


def sample_tau2(ma: MetaAnalysis, rng, size: Optional[int] = None):
    """Draw from the tau2 confidence distribution by pivot inversion.

    Each chi-square draw W is mapped to the tau2 solving Q(tau2) = W; draws
    with W >= Q(0) land in the atom at zero.
    """
    _warn_if_two_studies(ma)
    rng = np.random.default_rng(rng)
    w = rng.chisquare(ma.k - 1, size=size)
    out = _invert_q(ma, w)
    return float(out[0]) if size is None else out.reshape(np.shape(w))


def paule_mandel(ma: MetaAnalysis) -> float:
    """Moment estimator: the tau2 at which Q(tau2) equals its mean k - 1."""
    _warn_if_two_studies(ma)
    return float(_invert_q(ma, float(ma.k - 1))[0])


def reml_tau2(ma: MetaAnalysis, *, max_iter: int = 100, tol: float = 1e-10) -> float:
    """Restricted maximum likelihood estimate of tau2.

    Fixed-point iteration on the REML score equation starting from the
    truncated DerSimonian-Laird value, declared converged when successive
    iterates differ by at most tol * (1 + tau2).
    """
    _warn_if_two_studies(ma)
    theta = ma.estimates
    v = ma.variances
    w0 = 1.0 / v
    q0 = float(_q_raw(np.asarray(0.0), theta, v))
    c = float(w0.sum() - (w0 * w0).sum() / w0.sum())
    t = max(0.0, (q0 - (ma.k - 1)) / c)
    for _ in range(max_iter):
        w = 1.0 / (v + t)
        mu = float((w * theta).sum() / w.sum())
        r = theta - mu
        w2 = w * w
        t_new = float((w2 * (r * r - v)).sum() / w2.sum() + 1.0 / w.sum())
        t_new = max(0.0, t_new)
        if abs(t_new - t) <= tol * (1.0 + t_new):
            return t_new
        t = t_new
    raise ConvergenceError(
        f"REML iteration did not converge within {max_iter} steps"
    )


def q_profile_ci(ma: MetaAnalysis, level: float = 0.95) -> ConfidenceInterval:
    """Equi-tailed tau2 interval by inverting Q at chi-square quantiles.

    Both limits truncate at zero, so homogeneous-looking data yield [0, 0]
    or [0, upper] intervals.
    """
    if not 0.0 < level < 1.0:
        raise InputError(f"level must be in (0, 1), got {level!r}")
    _warn_if_two_studies(ma)
    alpha = 1.0 - level
    limits = _invert_q(
        ma, chi2.isf(np.array([alpha / 2.0, 1.0 - alpha / 2.0]), ma.k - 1)
    )
    return ConfidenceInterval(float(limits[0]), float(limits[1]), level)


def higgins_i2(ma: MetaAnalysis) -> float:
    """Share of total variability attributed to heterogeneity, in [0, 1)."""
    q0 = generalized_q(0.0, ma)
    if q0 <= 0.0:
        return 0.0
    return max(0.0, 1.0 - (ma.k - 1) / q0)


def display_upper_bound(ma: MetaAnalysis, coverage: float = 0.95) -> float:
    """Smallest round grid limit covering the requested share of the tau2 CD.

    Walks the 1-2-5 decade ladder and returns the first value T with
    CD(T) >= coverage.  Used to pick plotting and summary grids that end on
    a round number instead of a data-dependent ragged edge.
    """
    if not 0.0 < coverage < 1.0:
        raise InputError("coverage must be in (0, 1)")
    for exponent in range(-8, 10):
        for mantissa in (1.0, 2.0, 5.0):
            t = mantissa * 10.0**exponent
            if tau2_cd(t, ma) >= coverage:
                return t
    raise InputError("no finite display bound found")


@dataclass(frozen=True)
class Tau2Summary:
    """Quantile summary of the tau2 confidence density over a finite grid."""

    median: float
    ci: ConfidenceInterval
    upper_bound: float
    atom: float
    level: float


def tau2_cd_summary(
    ma: MetaAnalysis,
    level: float = 0.95,
    upper: Optional[float] = None,
    grid_size: int = 4097,
) -> Tau2Summary:
    """Summarize the continuous part of the tau2 confidence distribution.

    The density is evaluated on a uniform grid over [0, upper] (with
    ``upper`` defaulting to the round display bound), integrated by the
    trapezoid rule and renormalized, and the median and equi-tailed interval
    are read from the resulting CDF.  This mirrors how the density is
    summarized when plotted over a finite range: the atom at zero and the
    tail beyond the grid are not part of the normalized mass.  For the exact
    quantiles of the full distribution use :func:`tau2_cd_quantile`.
    """
    if not 0.0 < level < 1.0:
        raise InputError(f"level must be in (0, 1), got {level!r}")
    if grid_size < 16:
        raise InputError("grid_size too small for a stable summary")
    atom = tau2_atom(ma)
    if upper is None:
        upper = display_upper_bound(ma, coverage=level)
    if upper <= 0.0:
        raise InputError("upper must be > 0")
    grid = np.linspace(0.0, float(upper), grid_size)
    dens = tau2_confidence_density(grid, ma)
    steps = 0.5 * (dens[1:] + dens[:-1]) * np.diff(grid)
    cdf = np.concatenate([[0.0], np.cumsum(steps)])
    total = cdf[-1]
    if total <= 1e-12:
        # Essentially all mass sits in the atom at zero (homogeneous data);
        # whatever remains on the grid is float dust, not a distribution.
        ci = ConfidenceInterval(0.0, 0.0, level)
        return Tau2Summary(0.0, ci, float(upper), atom, level)
    cdf = cdf / total
    alpha = 1.0 - level
    keep = np.concatenate([[True], np.diff(cdf) > 0.0])
    lower_q, median, upper_q = np.interp(
        [alpha / 2.0, 0.5, 1.0 - alpha / 2.0], cdf[keep], grid[keep]
    )
    return Tau2Summary(
        float(median),
        ConfidenceInterval(float(lower_q), float(upper_q), level),
        float(upper),
        atom,
        level,
    )


class Tau2ConfidenceDistribution:
    """Object view over the tau2 confidence distribution of one dataset."""

    def __init__(self, ma: MetaAnalysis):
        self.ma = ma
        self.df = ma.k - 1

    def cdf(self, tau2):
        return tau2_cd(tau2, self.ma)

    def pdf(self, tau2):
        return tau2_confidence_density(tau2, self.ma)

    def quantile(self, p):
        return tau2_cd_quantile(self.ma, p)

    def sample(self, rng, size: Optional[int] = None):
        return sample_tau2(self.ma, rng, size)

    @property
    def atom(self) -> float:
        return tau2_atom(self.ma)
