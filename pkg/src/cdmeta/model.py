"""Core value types for random-effects meta-analysis.

The working model: study-specific true effects are normal around an average
effect with between-study variance tau2, and each observed estimate is normal
around its study effect with known within-study variance se**2.  Marginally
an estimate is then normal with variance tau2 + se**2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np

from .errors import InputError

__all__ = [
    "Study",
    "MetaAnalysis",
    "ConfidenceInterval",
    "Method",
    "EstimationResult",
    "ci_skewness",
    "weighted_skewness",
    "fisher_weighted_skewness",
]


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InputError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class Study:
    """One study: an effect estimate with its standard error.

    The effect scale is opaque to the library; transformed effects (log odds
    ratios, mean differences, ...) must be supplied already transformed.
    """

    estimate: float
    se: float
    label: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "estimate", _check_finite("estimate", self.estimate))
        object.__setattr__(self, "se", _check_finite("se", self.se))
        if self.se <= 0.0:
            raise InputError(f"se must be > 0, got {self.se!r}")

    @property
    def variance(self) -> float:
        return self.se * self.se


@dataclass(frozen=True)
class MetaAnalysis:
    """An ordered collection of at least two studies."""

    studies: tuple

    def __post_init__(self):
        studies = tuple(self.studies)
        if len(studies) < 2:
            raise InputError(
                f"a meta-analysis needs at least 2 studies, got {len(studies)}"
            )
        if not all(isinstance(s, Study) for s in studies):
            raise InputError("studies must be Study instances")
        object.__setattr__(self, "studies", studies)

    @classmethod
    def from_arrays(
        cls,
        estimates: Sequence[float],
        standard_errors: Sequence[float],
        labels: Optional[Sequence[str]] = None,
    ) -> "MetaAnalysis":
        if len(estimates) != len(standard_errors):
            raise InputError("estimates and standard errors differ in length")
        labels = labels if labels is not None else [None] * len(estimates)
        return cls(tuple(Study(e, s, l) for e, s, l in zip(estimates, standard_errors, labels)))

    @property
    def k(self) -> int:
        return len(self.studies)

    @cached_property
    def estimates(self) -> np.ndarray:
        return np.array([s.estimate for s in self.studies])

    @cached_property
    def standard_errors(self) -> np.ndarray:
        return np.array([s.se for s in self.studies])

    @cached_property
    def variances(self) -> np.ndarray:
        return self.standard_errors**2


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float

    def __post_init__(self):
        object.__setattr__(self, "lower", _check_finite("lower", self.lower))
        object.__setattr__(self, "upper", _check_finite("upper", self.upper))
        object.__setattr__(self, "level", float(self.level))
        if not 0.0 < self.level < 1.0:
            raise InputError(f"level must be in (0, 1), got {self.level!r}")
        if self.lower > self.upper:
            raise InputError(
                f"lower limit {self.lower!r} exceeds upper limit {self.upper!r}"
            )

    @property
    def width(self) -> float:
        return self.upper - self.lower


class Method(str, Enum):
    """Estimation methods whose results share one report format."""

    IVW = "ivw"
    HKSJ = "hksj"
    EDGINGTON = "edgington"
    CD_EDGINGTON_MC = "cd-edgington-mc"
    CD_EDGINGTON_GAQ = "cd-edgington-gaq"


# tau2_used for methods that integrate heterogeneity out instead of plugging
# in a point estimate.
MARGINALIZED = "marginalized"


@dataclass(frozen=True)
class EstimationResult:
    """Average-effect inference produced by one method."""

    method: Method
    estimate: float
    ci: ConfidenceInterval
    skewness: float
    p_value_at_zero: float
    tau2_used: Union[float, str]

    def __post_init__(self):
        if not (isinstance(self.tau2_used, str) and self.tau2_used == MARGINALIZED):
            value = _check_finite("tau2_used", self.tau2_used)
            if value < 0.0:
                raise InputError(f"tau2_used must be >= 0, got {value!r}")
            object.__setattr__(self, "tau2_used", value)


def ci_skewness(ci: ConfidenceInterval, center: float) -> float:
    """Normalized asymmetry of an interval around its point estimate.

    (upper + lower - 2 * center) / (upper - lower): zero for symmetric
    intervals, bounded by [-1, 1] whenever center lies inside the interval,
    sign flips when the effect scale is negated.
    """
    center = _check_finite("center", center)
    width = ci.upper - ci.lower
    if width <= 0.0:
        raise InputError("zero-width interval has undefined skewness")
    if not ci.lower <= center <= ci.upper:
        raise InputError(
            f"center {center!r} lies outside [{ci.lower!r}, {ci.upper!r}]"
        )
    return (ci.upper + ci.lower - 2.0 * center) / width


def weighted_skewness(values: Sequence[float], weights: Optional[Sequence[float]] = None) -> float:
    """Weighted Fisher skewness coefficient.

    With unit weights this is the ordinary Fisher coefficient
    sum(r**3) * sqrt(n) / sum(r**2)**1.5 with residuals r around the plain
    mean; general weights recenter on the weighted mean and weight each
    moment, with sqrt(sum(w)) replacing sqrt(n).
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InputError("need a 1-d array of at least 2 values")
    if weights is None:
        w = np.ones_like(x)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != x.shape:
            raise InputError("weights must match values in shape")
        if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
            raise InputError("weights must be finite and > 0")
    if not np.all(np.isfinite(x)):
        raise InputError("values must be finite")
    center = float(w @ x) / float(w.sum())
    r = x - center
    m2 = float(w @ (r * r))
    if m2 <= 0.0:
        raise InputError("skewness undefined: zero weighted variance")
    m3 = float(w @ (r * r * r))
    return m3 * math.sqrt(float(w.sum())) / m2**1.5


def fisher_weighted_skewness(ma: MetaAnalysis) -> float:
    """Skewness of the study estimates, inverse-variance weighted.

    Weights 1/se**2 center the coefficient on the fixed-effect average, so a
    handful of precise outlying studies dominates the sign, matching how they
    dominate the pooled estimate.
    """
    return weighted_skewness(ma.estimates, 1.0 / ma.variances)
