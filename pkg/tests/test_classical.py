import math

import numpy as np
import pytest
from scipy.stats import norm, t as student_t

from cdmeta import (
    InputError,
    MetaAnalysis,
    Method,
    generalized_q,
    hksj_result,
    ivw_result,
    reml_tau2,
)


def ivw_by_hand(estimates, variances, tau2):
    weights = [1.0 / (v + tau2) for v in variances]
    mean = sum(w * e for w, e in zip(weights, estimates)) / sum(weights)
    se = math.sqrt(1.0 / sum(weights))
    return mean, se


class TestIvw:
    def test_matches_hand_computation(self):
        estimates, ses = [0.5, -0.2, 0.1], [0.3, 0.4, 0.5]
        ma = MetaAnalysis.from_arrays(estimates, ses)
        mean, se = ivw_by_hand(estimates, [s**2 for s in ses], 0.2)
        res = ivw_result(ma, 0.2)
        z = norm.ppf(0.975)
        assert res.estimate == pytest.approx(mean, rel=1e-12)
        assert res.ci.lower == pytest.approx(mean - z * se, rel=1e-12)
        assert res.ci.upper == pytest.approx(mean + z * se, rel=1e-12)
        assert res.p_value_at_zero == pytest.approx(
            2.0 * norm.sf(abs(mean) / se), rel=1e-12
        )

    def test_serenoa_row(self, serenoa_ma):
        res = ivw_result(serenoa_ma, reml_tau2(serenoa_ma))
        assert res.method is Method.IVW
        assert res.estimate == pytest.approx(-0.90, abs=0.01)
        assert res.ci.lower == pytest.approx(-1.70, abs=0.01)
        assert res.ci.upper == pytest.approx(-0.10, abs=0.01)
        assert res.p_value_at_zero == pytest.approx(0.027, abs=0.002)

    def test_interval_is_symmetric_with_zero_skewness(self, serenoa_ma):
        res = ivw_result(serenoa_ma, 0.4)
        assert res.skewness == 0.0
        assert res.ci.upper - res.estimate == pytest.approx(
            res.estimate - res.ci.lower, abs=1e-12
        )

    def test_level_changes_width_only(self, serenoa_ma):
        wide = ivw_result(serenoa_ma, 0.85, level=0.99)
        narrow = ivw_result(serenoa_ma, 0.85, level=0.80)
        assert wide.estimate == narrow.estimate
        assert wide.ci.width > narrow.ci.width

    def test_rejects_bad_inputs(self, serenoa_ma):
        with pytest.raises(InputError):
            ivw_result(serenoa_ma, -0.1)
        with pytest.raises(InputError):
            ivw_result(serenoa_ma, 0.1, level=1.0)


class TestHksj:
    def test_matches_direct_formula(self, serenoa_ma):
        tau2 = 0.85
        res = hksj_result(serenoa_ma, tau2)
        k = serenoa_ma.k
        w = 1.0 / (serenoa_ma.variances + tau2)
        mean = float(w @ serenoa_ma.estimates / w.sum())
        se = math.sqrt(generalized_q(tau2, serenoa_ma) / (k - 1) / w.sum())
        tq = student_t.ppf(0.975, k - 1)
        assert res.estimate == pytest.approx(mean, rel=1e-12)
        assert res.ci.lower == pytest.approx(mean - tq * se, rel=1e-12)
        assert res.ci.upper == pytest.approx(mean + tq * se, rel=1e-12)
        assert res.p_value_at_zero == pytest.approx(
            2.0 * student_t.sf(abs(mean) / se, k - 1), rel=1e-12
        )

    def test_serenoa_row(self, serenoa_ma):
        res = hksj_result(serenoa_ma, reml_tau2(serenoa_ma))
        assert res.method is Method.HKSJ
        assert res.estimate == pytest.approx(-0.90, abs=0.01)
        assert res.ci.lower == pytest.approx(-1.78, abs=0.01)
        assert res.ci.upper == pytest.approx(-0.02, abs=0.01)
        assert res.p_value_at_zero == pytest.approx(0.046, abs=0.002)

    def test_same_center_as_ivw(self, serenoa_ma):
        assert hksj_result(serenoa_ma, 0.6).estimate == pytest.approx(
            ivw_result(serenoa_ma, 0.6).estimate, abs=1e-14
        )

    def test_skewness_is_zero(self, serenoa_ma):
        assert hksj_result(serenoa_ma, 0.85).skewness == 0.0

    def test_degenerate_for_identical_estimates(self):
        ma = MetaAnalysis.from_arrays([0.4, 0.4, 0.4], [0.3, 0.5, 0.4])
        res = hksj_result(ma, 0.0)
        assert res.ci.lower == res.ci.upper == res.estimate == pytest.approx(0.4)
        assert res.p_value_at_zero == 0.0

    def test_degenerate_at_zero_mean(self):
        ma = MetaAnalysis.from_arrays([0.0, 0.0, 0.0], [0.3, 0.5, 0.4])
        res = hksj_result(ma, 0.0)
        assert res.p_value_at_zero == 1.0

    def test_rejects_bad_inputs(self, serenoa_ma):
        with pytest.raises(InputError):
            hksj_result(serenoa_ma, float("nan"))
        with pytest.raises(InputError):
            hksj_result(serenoa_ma, 0.1, level=0.0)
