"""Simulation engine for method comparison under a known truth.

Data-generating mechanism, per iteration: squared standard errors are drawn
first, the heterogeneity variance is fixed by the target I^2, true study
effects are drawn around the true mean, and observed estimates are drawn
around the true effects with variance 2/n_i while the analyst sees the
independently drawn squared standard errors.  That last mismatch mimics
estimated rather than known standard errors and is kept deliberately.

Reproducibility contract: one seed stream per iteration, split from the
scenario seed, so results are bit-identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import skewnorm

from .classical import hksj_result, ivw_result
from .errors import ConvergenceError, InputError, NumericError
from .heterogeneity import paule_mandel, reml_tau2
from .marginal import cd_edgington_gaq, cd_edgington_mc, gaq_result, mc_result
from .model import (
    EstimationResult,
    MetaAnalysis,
    Method,
    fisher_weighted_skewness,
    weighted_skewness,
)
from .pvalfun import edgington_result

__all__ = [
    "EffectDistribution",
    "SimScenario",
    "MethodPerformance",
    "SimResult",
    "SKEW_ALPHA",
    "DEFAULT_METHODS",
    "draw_se2",
    "tau2_from_i2",
    "draw_true_effects",
    "draw_estimates",
    "run_scenario",
    "cohen_kappa",
    "coverage_mcse",
]

SKEW_ALPHA = -4.0

EDGINGTON_FAMILY = frozenset(
    {Method.EDGINGTON, Method.CD_EDGINGTON_MC, Method.CD_EDGINGTON_GAQ}
)

DEFAULT_METHODS = (
    Method.IVW,
    Method.HKSJ,
    Method.EDGINGTON,
    Method.CD_EDGINGTON_MC,
)


class EffectDistribution(str, Enum):
    NORMAL = "normal"
    SKEW_NORMAL = "skew-normal"


@dataclass(frozen=True)
class SimScenario:
    """One cell of the factorial design.

    The first ``k_large`` studies get ``n_large`` observations, the rest
    ``n_small``.  ``b`` is the per-iteration Monte Carlo budget of the
    marginal estimator, kept below the production default so a cell runs at
    desk scale; raise it for final tables.
    """

    k: int
    i2: float
    k_large: int = 0
    effect_dist: EffectDistribution = EffectDistribution.NORMAL
    mu_true: float = -0.3
    n_small: int = 50
    n_large: int = 500
    n_sim: int = 1000
    b: int = 10_000
    seed: Union[int, Sequence[int], None] = None

    def __post_init__(self):
        if self.k < 3:
            raise InputError(f"k must be >= 3, got {self.k!r}")
        if not 0.0 <= self.i2 < 1.0:
            raise InputError(f"i2 must be in [0, 1), got {self.i2!r}")
        if not 0 <= self.k_large <= self.k:
            raise InputError("k_large must be between 0 and k")
        if min(self.n_small, self.n_large) < 2:
            raise InputError("study sizes must be >= 2")
        if self.n_sim < 1 or self.b < 1:
            raise InputError("n_sim and b must be >= 1")
        object.__setattr__(self, "effect_dist", EffectDistribution(self.effect_dist))

    @property
    def study_sizes(self) -> np.ndarray:
        return np.array(
            [self.n_large] * self.k_large + [self.n_small] * (self.k - self.k_large)
        )


def draw_se2(n_i, rng: np.random.Generator, size=None):
    """Draw squared standard errors, chi-square over 2(n-1) df scaled to 2/n.

    The mean is exactly 2/n_i, the sampling variance an analyst would face
    with n_i observations of within-study variance 2.
    """
    n = np.asarray(n_i)
    if np.any(n < 2):
        raise InputError("study sizes must be >= 2")
    draws = rng.chisquare(2 * (n - 1), size=size)
    return draws / ((n - 1) * n)


def tau2_from_i2(scenario: SimScenario) -> float:
    """Heterogeneity variance hitting the scenario's target I^2."""
    mean_var = float(np.mean(2.0 / scenario.study_sizes))
    return mean_var * scenario.i2 / (1.0 - scenario.i2)


def draw_true_effects(
    scenario: SimScenario, tau2: float, rng: np.random.Generator
) -> np.ndarray:
    """Draw true study effects with mean mu_true and variance tau2.

    The skew-normal variant is moment matched: location and scale are chosen
    so the first two moments equal those of the normal variant, leaving
    shape (alpha = -4) as the only difference.
    """
    if tau2 < 0.0:
        raise InputError("tau2 must be >= 0")
    k = scenario.k
    mu = scenario.mu_true
    if tau2 == 0.0:
        return np.full(k, mu)
    if scenario.effect_dist is EffectDistribution.NORMAL:
        return rng.normal(mu, np.sqrt(tau2), size=k)
    alpha = SKEW_ALPHA
    delta = alpha / np.sqrt(1.0 + alpha * alpha)
    omega = np.sqrt(tau2 / (1.0 - 2.0 * delta * delta / np.pi))
    xi = mu - omega * delta * np.sqrt(2.0 / np.pi)
    return skewnorm.rvs(alpha, loc=xi, scale=omega, size=k, random_state=rng)


def draw_estimates(
    theta: np.ndarray,
    scenario: SimScenario,
    rng: np.random.Generator,
    se2: Optional[np.ndarray] = None,
) -> MetaAnalysis:
    """Draw observed estimates around the true effects.

    Estimates use the true sampling variance 2/n_i; the reported standard
    errors are the square roots of the separately drawn se2, so the analyst
    works with estimated, not known, standard errors.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (scenario.k,):
        raise InputError("theta must have one entry per study")
    sizes = scenario.study_sizes
    if se2 is None:
        se2 = draw_se2(sizes, rng)
    estimates = rng.normal(theta, np.sqrt(2.0 / sizes))
    return MetaAnalysis.from_arrays(estimates, np.sqrt(se2))


def _method_result(
    method: Method,
    ma: MetaAnalysis,
    tau2_hat: float,
    scenario: SimScenario,
    mc_seed,
    level: float,
) -> EstimationResult:
    if method is Method.IVW:
        return ivw_result(ma, tau2_hat, level)
    if method is Method.HKSJ:
        return hksj_result(ma, tau2_hat, level)
    if method is Method.EDGINGTON:
        return edgington_result(ma, tau2_hat, level)
    if method is Method.CD_EDGINGTON_MC:
        return mc_result(cd_edgington_mc(ma, b=scenario.b, seed=mc_seed), level)
    if method is Method.CD_EDGINGTON_GAQ:
        return gaq_result(cd_edgington_gaq(ma), level)
    raise InputError(f"unsupported method {method!r}")


def _run_iteration(scenario, methods, level, child_ss):
    data_ss, mc_ss = child_ss.spawn(2)
    rng = np.random.Generator(np.random.PCG64(data_ss))

    se2 = draw_se2(scenario.study_sizes, rng)
    tau2 = tau2_from_i2(scenario)
    theta = draw_true_effects(scenario, tau2, rng)
    ma = draw_estimates(theta, scenario, rng, se2=se2)

    reml_failed = 0
    try:
        tau2_hat = reml_tau2(ma)
    except ConvergenceError:
        tau2_hat = paule_mandel(ma)
        reml_failed = 1

    rows = {}
    failures = {}
    for method in methods:
        try:
            res = _method_result(method, ma, tau2_hat, scenario, mc_ss, level)
            rows[method] = (res.estimate, res.ci.lower, res.ci.upper, res.skewness)
            failures[method] = 0
        except NumericError:
            rows[method] = (np.nan, np.nan, np.nan, np.nan)
            failures[method] = 1

    gamma_est = fisher_weighted_skewness(ma)
    if np.ptp(theta) > 0.0:
        gamma_true = weighted_skewness(theta)
    else:
        gamma_true = np.nan
    return rows, failures, reml_failed, gamma_est, gamma_true


def cohen_kappa(signs_a, signs_b) -> float:
    """Chance-corrected agreement between two categorical label arrays."""
    a = np.asarray(signs_a)
    b = np.asarray(signs_b)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise InputError("sign arrays must be equal-length 1-d with >= 2 entries")
    p_o = float(np.mean(a == b))
    labels = np.union1d(a, b)
    p_e = float(
        sum(np.mean(a == lab) * np.mean(b == lab) for lab in labels)
    )
    if p_e >= 1.0:
        raise InputError("kappa undefined: both label sets are constant")
    return (p_o - p_e) / (1.0 - p_e)


def coverage_mcse(p: float, n_sim: int) -> float:
    """Monte Carlo standard error of a coverage proportion."""
    if not 0.0 <= p <= 1.0 or n_sim < 1:
        raise InputError("need p in [0, 1] and n_sim >= 1")
    return float(np.sqrt(p * (1.0 - p) / n_sim))


@dataclass(frozen=True)
class MethodPerformance:
    coverage: float
    coverage_mcse: float
    mean_width: float
    width_mcse: float
    bias: float
    bias_mcse: float
    mse: float
    mse_mcse: float
    skew_corr_est: float
    skew_kappa_est: float
    skew_corr_true: float
    skew_kappa_true: float
    n_failed: int

    def as_dict(self) -> dict:
        return {
            "coverage": (self.coverage, self.coverage_mcse),
            "mean_width": (self.mean_width, self.width_mcse),
            "bias": (self.bias, self.bias_mcse),
            "mse": (self.mse, self.mse_mcse),
            "skew_corr_est": (self.skew_corr_est, np.nan),
            "skew_kappa_est": (self.skew_kappa_est, np.nan),
            "skew_corr_true": (self.skew_corr_true, np.nan),
            "skew_kappa_true": (self.skew_kappa_true, np.nan),
        }


@dataclass(frozen=True)
class SimResult:
    scenario: SimScenario
    methods: tuple
    rows: dict          # method -> (n_sim, 4) array: estimate, lower, upper, skew
    gamma_est: np.ndarray
    gamma_true: np.ndarray
    performance: dict   # method -> MethodPerformance
    reml_failures: int

    @property
    def n_sim(self) -> int:
        return self.scenario.n_sim


def _safe_corr(x: np.ndarray, y: np.ndarray) -> float:
    ok = np.isfinite(x) & np.isfinite(y)
    if ok.sum() < 2:
        return np.nan
    x, y = x[ok], y[ok]
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return np.nan
    return float(np.corrcoef(x, y)[0, 1])


def _safe_kappa(x: np.ndarray, y: np.ndarray) -> float:
    ok = np.isfinite(x) & np.isfinite(y)
    if ok.sum() < 2:
        return np.nan
    try:
        return cohen_kappa(np.sign(x[ok]), np.sign(y[ok]))
    except InputError:
        return np.nan


def _summarize(
    method: Method,
    rows: np.ndarray,
    gamma_est: np.ndarray,
    gamma_true: np.ndarray,
    mu_true: float,
    n_failed: int,
) -> MethodPerformance:
    est, lower, upper, skew = rows.T
    ok = np.isfinite(est)
    n = int(ok.sum())
    if n == 0:
        nan = np.nan
        return MethodPerformance(*([nan] * 12), n_failed=n_failed)
    est, lower, upper, skew_ok = est[ok], lower[ok], upper[ok], skew[ok]
    covered = (lower <= mu_true) & (mu_true <= upper)
    coverage = float(covered.mean())
    width = upper - lower
    err = est - mu_true
    sq = err * err

    def mcse(x):
        return float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else np.nan

    if method in EDGINGTON_FAMILY:
        corr_est = _safe_corr(skew_ok, gamma_est[ok])
        kappa_est = _safe_kappa(skew_ok, gamma_est[ok])
        corr_true = _safe_corr(skew_ok, gamma_true[ok])
        kappa_true = _safe_kappa(skew_ok, gamma_true[ok])
    else:
        corr_est = kappa_est = corr_true = kappa_true = np.nan
    return MethodPerformance(
        coverage=coverage,
        coverage_mcse=coverage_mcse(coverage, n),
        mean_width=float(width.mean()),
        width_mcse=mcse(width),
        bias=float(err.mean()),
        bias_mcse=mcse(err),
        mse=float(sq.mean()),
        mse_mcse=mcse(sq),
        skew_corr_est=corr_est,
        skew_kappa_est=kappa_est,
        skew_corr_true=corr_true,
        skew_kappa_true=kappa_true,
        n_failed=n_failed,
    )


def run_scenario(
    scenario: SimScenario,
    methods: Sequence[Method] = DEFAULT_METHODS,
    *,
    level: float = 0.95,
    workers: int = 1,
) -> SimResult:
    """Run one scenario cell and aggregate per-method performance.

    Iterations are independent; each gets its own child seed stream, so the
    aggregate is identical whether run serially or across processes.
    """
    try:
        methods = tuple(Method(m) for m in methods)
    except ValueError:
        raise InputError(f"unknown method in {methods!r}") from None
    if len(set(methods)) != len(methods):
        raise InputError("duplicate methods")
    root = np.random.SeedSequence(scenario.seed)
    children = root.spawn(scenario.n_sim)

    if workers == 1:
        outs = [_run_iteration(scenario, methods, level, ss) for ss in children]
    else:
        chunk = max(1, scenario.n_sim // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(
                pool.map(
                    _run_iteration,
                    [scenario] * scenario.n_sim,
                    [methods] * scenario.n_sim,
                    [level] * scenario.n_sim,
                    children,
                    chunksize=chunk,
                )
            )

    rows = {
        m: np.array([out[0][m] for out in outs], dtype=float) for m in methods
    }
    failures = {m: sum(out[1][m] for out in outs) for m in methods}
    reml_failures = sum(out[2] for out in outs)
    gamma_est = np.array([out[3] for out in outs], dtype=float)
    gamma_true = np.array([out[4] for out in outs], dtype=float)

    performance = {
        m: _summarize(
            m, rows[m], gamma_est, gamma_true, scenario.mu_true, failures[m]
        )
        for m in methods
    }
    return SimResult(
        scenario=scenario,
        methods=methods,
        rows=rows,
        gamma_est=gamma_est,
        gamma_true=gamma_true,
        performance=performance,
        reml_failures=reml_failures,
    )
