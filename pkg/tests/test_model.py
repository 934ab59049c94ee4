import math

import numpy as np
import pytest

from cdmeta import (
    ConfidenceInterval,
    InputError,
    MetaAnalysis,
    Study,
    ci_skewness,
    fisher_weighted_skewness,
    weighted_skewness,
)


class TestStudy:
    def test_stores_estimate_and_se(self):
        s = Study(-0.23, 0.59, label="first")
        assert s.estimate == -0.23
        assert s.se == 0.59
        assert s.variance == pytest.approx(0.59**2)

    @pytest.mark.parametrize("se", [0.0, -1.0, math.nan, math.inf])
    def test_rejects_bad_se(self, se):
        with pytest.raises(InputError):
            Study(0.1, se)

    @pytest.mark.parametrize("estimate", [math.nan, math.inf, -math.inf])
    def test_rejects_nonfinite_estimate(self, estimate):
        with pytest.raises(InputError):
            Study(estimate, 1.0)


class TestMetaAnalysis:
    def test_needs_two_studies(self):
        with pytest.raises(InputError):
            MetaAnalysis((Study(0.0, 1.0),))

    def test_array_views_match_studies(self):
        ma = MetaAnalysis.from_arrays([0.1, -0.4, 2.0], [1.0, 0.5, 0.25])
        assert ma.k == 3
        np.testing.assert_allclose(ma.estimates, [0.1, -0.4, 2.0])
        np.testing.assert_allclose(ma.variances, [1.0, 0.25, 0.0625])

    def test_from_arrays_rejects_length_mismatch(self):
        with pytest.raises(InputError):
            MetaAnalysis.from_arrays([0.1, 0.2], [1.0])


class TestConfidenceInterval:
    def test_width(self):
        ci = ConfidenceInterval(-1.0, 3.0, 0.95)
        assert ci.width == 4.0

    def test_rejects_inverted_limits(self):
        with pytest.raises(InputError):
            ConfidenceInterval(1.0, -1.0, 0.95)

    @pytest.mark.parametrize("level", [0.0, 1.0, -0.1, 2.0])
    def test_rejects_bad_level(self, level):
        with pytest.raises(InputError):
            ConfidenceInterval(-1.0, 1.0, level)


class TestCiSkewness:
    def test_symmetric_interval_is_zero(self):
        assert ci_skewness(ConfidenceInterval(-1.0, 1.0, 0.95), 0.0) == 0.0

    def test_formula_value(self):
        # (0 + 4 - 2 * 1) / (4 - 0) = 0.5
        assert ci_skewness(ConfidenceInterval(0.0, 4.0, 0.95), 1.0) == pytest.approx(0.5)

    def test_bounded_by_one(self):
        # center at an endpoint gives the extreme value
        assert ci_skewness(ConfidenceInterval(0.0, 4.0, 0.95), 0.0) == pytest.approx(1.0)
        assert ci_skewness(ConfidenceInterval(0.0, 4.0, 0.95), 4.0) == pytest.approx(-1.0)

    def test_affine_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            lo, mid, hi = np.sort(rng.normal(size=3))
            if hi - lo < 1e-9:
                continue
            base = ci_skewness(ConfidenceInterval(lo, hi, 0.9), mid)
            a, b = rng.normal(), rng.uniform(0.1, 5.0)
            moved = ci_skewness(
                ConfidenceInterval(a + b * lo, a + b * hi, 0.9), a + b * mid
            )
            assert moved == pytest.approx(base, abs=1e-10)

    def test_zero_width_rejected(self):
        with pytest.raises(InputError):
            ci_skewness(ConfidenceInterval(1.0, 1.0, 0.95), 1.0)

    def test_center_outside_rejected(self):
        with pytest.raises(InputError):
            ci_skewness(ConfidenceInterval(0.0, 1.0, 0.95), 2.0)


class TestWeightedSkewness:
    def test_zero_zero_three(self):
        # mean 1, residuals (-1, -1, 2): m2 = 6, m3 = 6,
        # gamma = 6 * sqrt(3) / 6**1.5 = 1 / sqrt(2)
        assert weighted_skewness([0.0, 0.0, 3.0]) == pytest.approx(
            1.0 / math.sqrt(2.0), abs=1e-12
        )

    def test_symmetric_values_give_zero(self):
        assert weighted_skewness([-1.0, 0.0, 1.0]) == pytest.approx(0.0, abs=1e-12)

    def test_negation_flips_sign(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=9)
        w = rng.uniform(0.5, 3.0, size=9)
        assert weighted_skewness(-x, w) == pytest.approx(
            -weighted_skewness(x, w), abs=1e-10
        )

    def test_unit_weights_match_plain_fisher(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=20)
        r = x - x.mean()
        expected = r @ r**2 * math.sqrt(20) / (r @ r) ** 1.5
        assert weighted_skewness(x) == pytest.approx(expected, abs=1e-12)

    def test_constant_values_rejected(self):
        with pytest.raises(InputError):
            weighted_skewness([1.0, 1.0, 1.0])

    def test_bad_weights_rejected(self):
        with pytest.raises(InputError):
            weighted_skewness([0.0, 1.0], [1.0, -1.0])


class TestFisherWeightedSkewness:
    def test_serenoa_value(self, serenoa_ma):
        # The published -0.874 comes from unrounded source data; the table
        # itself carries two decimals, which moves gamma to -0.8753.
        assert fisher_weighted_skewness(serenoa_ma) == pytest.approx(-0.874, abs=2e-3)

    def test_equal_se_symmetric_triple(self):
        ma = MetaAnalysis.from_arrays([-1.0, 0.0, 1.0], [0.5, 0.5, 0.5])
        assert fisher_weighted_skewness(ma) == pytest.approx(0.0, abs=1e-12)

    def test_matches_direct_formula(self):
        ma = MetaAnalysis.from_arrays([0.4, -0.8, 0.1, 1.2], [0.2, 0.4, 0.3, 0.6])
        w = 1.0 / ma.variances
        center = w @ ma.estimates / w.sum()
        r = ma.estimates - center
        expected = (w @ r**3) * math.sqrt(w.sum()) / (w @ r**2) ** 1.5
        assert fisher_weighted_skewness(ma) == pytest.approx(expected, abs=1e-12)
