import warnings

import numpy as np
import pytest
from numpy.random import SeedSequence

from cdmeta import (
    ConfidenceDistributionSamples,
    InputError,
    MARGINALIZED,
    MarginalCDGaq,
    MetaAnalysis,
    Method,
    MonteCarloSizeWarning,
    cd_edgington_gaq,
    cd_edgington_mc,
    ci_skewness,
    edgington_p,
    equi_tailed_ci,
    gaq_result,
    marginal_p_value,
    mc_result,
    point_estimate,
)

from conftest import random_meta_analysis


@pytest.fixture(scope="module")
def serenoa_mc(serenoa_ma):
    return cd_edgington_mc(serenoa_ma, b=100_000, seed=42)


@pytest.fixture(scope="module")
def serenoa_gaq(serenoa_ma):
    return cd_edgington_gaq(serenoa_ma)


class TestMonteCarlo:
    def test_frozen_regression_values(self, serenoa_ma, serenoa_mc):
        # Pinned from a reference run of this implementation; detects any
        # silent change to the sampling path, not just gross errors.
        assert point_estimate(serenoa_mc) == pytest.approx(
            -0.8306063154379024, abs=1e-9
        )
        ci = equi_tailed_ci(serenoa_mc)
        assert ci.lower == pytest.approx(-1.7569329554801016, abs=1e-9)
        assert ci.upper == pytest.approx(-0.017836787517284906, abs=1e-9)
        assert marginal_p_value(serenoa_mc, 0.0) == pytest.approx(0.0455, abs=1e-12)

    def test_serenoa_target_row(self, serenoa_mc):
        est = point_estimate(serenoa_mc)
        ci = equi_tailed_ci(serenoa_mc)
        assert est == pytest.approx(-0.83, abs=0.02)
        assert ci.lower == pytest.approx(-1.77, abs=0.02)
        assert ci.upper == pytest.approx(-0.01, abs=0.02)
        assert marginal_p_value(serenoa_mc, 0.0) == pytest.approx(0.047, abs=0.006)

    def test_probability_below_zero(self, serenoa_mc):
        below = marginal_p_value(serenoa_mc, 0.0, two_sided=False)
        assert below == pytest.approx(0.98, abs=0.01)
        assert below == pytest.approx(0.97725, abs=1e-12)

    def test_same_seed_is_bitwise_reproducible(self, serenoa_ma):
        a = cd_edgington_mc(serenoa_ma, b=2_000 * 10, seed=7)
        b = cd_edgington_mc(serenoa_ma, b=20_000, seed=7)
        assert np.array_equal(a.mu_draws, b.mu_draws)
        assert np.array_equal(a.tau2_draws, b.tau2_draws)

    def test_accepts_seed_sequence(self, serenoa_ma):
        a = cd_edgington_mc(serenoa_ma, b=10_000, seed=SeedSequence(31))
        b = cd_edgington_mc(serenoa_ma, b=10_000, seed=31)
        assert np.array_equal(a.mu_draws, b.mu_draws)

    def test_seed_info_records_the_run(self, serenoa_mc):
        info = serenoa_mc.seed_info
        assert info["entropy"] == 42
        assert info["bit_generator"] == "PCG64"
        assert info["b"] == 100_000

    def test_small_b_warns(self, serenoa_ma):
        with pytest.warns(MonteCarloSizeWarning):
            cd_edgington_mc(serenoa_ma, b=2_000, seed=1)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            cd_edgington_mc(serenoa_ma, b=10_000, seed=1)

    def test_draws_satisfy_conditional_cd_equation(self, serenoa_ma, serenoa_mc):
        # Each draw solves sum of one-sided p-values = an Irwin-Hall quantile,
        # so pushing mu back through the conditional CD must recover a value
        # consistent with the solver's residual tolerance.
        mu = serenoa_mc.mu_draws[:2000]
        tau2 = serenoa_mc.tau2_draws[:2000]
        u = np.array(
            [edgington_p(m, serenoa_ma, t) for m, t in zip(mu, tau2)]
        )
        ss = SeedSequence(42)
        rng = np.random.default_rng(ss)
        rng.chisquare(serenoa_ma.k - 1, size=100_000)
        expected = rng.random(size=100_000)[:2000]
        assert np.max(np.abs(u - expected)) < 1e-7

    def test_location_equivariance(self, serenoa_ma):
        shift = 3.7
        shifted = MetaAnalysis.from_arrays(
            serenoa_ma.estimates + shift, serenoa_ma.standard_errors
        )
        a = cd_edgington_mc(serenoa_ma, b=20_000, seed=9)
        b = cd_edgington_mc(shifted, b=20_000, seed=9)
        assert np.max(np.abs(b.mu_draws - a.mu_draws - shift)) < 1e-8
        # tau2 is location invariant up to float dust in the residuals
        assert np.allclose(b.tau2_draws, a.tau2_draws, atol=1e-6)

    def test_rejects_bad_inputs(self, serenoa_ma):
        with pytest.raises(InputError):
            cd_edgington_mc(MetaAnalysis.from_arrays([0.1, 0.4], [0.2, 0.3]))
        with pytest.raises(InputError):
            cd_edgington_mc(serenoa_ma, b=0)


class TestGaussHermiteFreeQuadrature:
    def test_cdf_is_a_distribution(self, serenoa_gaq):
        cdf = serenoa_gaq.cdf
        assert np.all(np.diff(cdf) >= 0.0)
        assert np.all((cdf >= 0.0) & (cdf <= 1.0))
        assert cdf[0] < 1e-4
        assert cdf[-1] > 1.0 - 1e-4

    def test_serenoa_target_row(self, serenoa_gaq):
        est = point_estimate(serenoa_gaq)
        ci = equi_tailed_ci(serenoa_gaq)
        assert est == pytest.approx(-0.83, abs=0.01)
        assert ci.lower == pytest.approx(-1.76, abs=0.01)
        assert ci.upper == pytest.approx(-0.02, abs=0.01)

    def test_matches_monte_carlo_when_k_is_large(self):
        rng = np.random.default_rng(314)
        k = 20
        ma = MetaAnalysis.from_arrays(
            rng.normal(0.2, 0.5, size=k), np.exp(rng.normal(-1.2, 0.4, size=k))
        )
        gaq = cd_edgington_gaq(ma)
        mc = cd_edgington_mc(ma, b=100_000, seed=99)
        ci_g, ci_m = equi_tailed_ci(gaq), equi_tailed_ci(mc)
        assert point_estimate(gaq) == pytest.approx(point_estimate(mc), abs=0.005)
        assert ci_g.lower == pytest.approx(ci_m.lower, abs=0.005)
        assert ci_g.upper == pytest.approx(ci_m.upper, abs=0.005)

    def test_homogeneous_data_collapses_to_conditional(self):
        # With identical estimates all heterogeneity mass sits in the atom at
        # zero, so the marginal CD equals the conditional CD at tau2 = 0.
        ma = MetaAnalysis.from_arrays([0.5, 0.5, 0.5], [0.2, 0.3, 0.25])
        gaq = cd_edgington_gaq(ma)
        mid = np.searchsorted(gaq.cdf, 0.5)
        grid_median = gaq.grid[mid]
        assert edgington_p(grid_median, ma, 0.0) == pytest.approx(0.5, abs=0.01)
        assert point_estimate(gaq) == pytest.approx(0.5, abs=0.01)

    def test_atom_floor_widens_small_tight_datasets(self):
        # Three nearly identical precise studies: the heterogeneity atom is
        # close to one, so the floor drives the interval.  Width must grow
        # monotonically with the floor scale while the center stays put.
        ma = MetaAnalysis.from_arrays([0.12, 0.10, 0.14], [0.1, 0.12, 0.11])
        widths, points = [], []
        for scale in (0.0, 2.6, 5.2):
            cd = cd_edgington_gaq(ma, atom_floor_scale=scale)
            ci = equi_tailed_ci(cd)
            widths.append(ci.upper - ci.lower)
            points.append(point_estimate(cd))
        assert widths[0] < widths[1] < widths[2]
        assert max(points) - min(points) < 0.005

    def test_atom_floor_negligible_when_atom_is_small(self, serenoa_ma):
        # Serenoa's atom is ~0.002, so the floored and unfloored mixtures
        # agree to well within interval tolerance.
        ci0 = equi_tailed_ci(cd_edgington_gaq(serenoa_ma, atom_floor_scale=0.0))
        ci1 = equi_tailed_ci(cd_edgington_gaq(serenoa_ma))
        assert ci1.lower == pytest.approx(ci0.lower, abs=0.005)
        assert ci1.upper == pytest.approx(ci0.upper, abs=0.005)

    def test_level_validation(self, serenoa_gaq):
        with pytest.raises(InputError):
            equi_tailed_ci(serenoa_gaq, level=1.5)

    def test_rejects_bad_inputs(self, serenoa_ma):
        with pytest.raises(InputError):
            cd_edgington_gaq(MetaAnalysis.from_arrays([0.1, 0.4], [0.2, 0.3]))
        with pytest.raises(InputError):
            cd_edgington_gaq(serenoa_ma, tol=0.0)
        with pytest.raises(InputError):
            cd_edgington_gaq(serenoa_ma, grid_size=8)
        with pytest.raises(InputError):
            cd_edgington_gaq(serenoa_ma, atom_floor_scale=-0.5)


class TestSharedInterface:
    def test_two_sided_p_folds_the_cdf(self, serenoa_mc, serenoa_gaq):
        for cd in (serenoa_mc, serenoa_gaq):
            c = marginal_p_value(cd, -0.4, two_sided=False)
            folded = marginal_p_value(cd, -0.4)
            assert folded == pytest.approx(2.0 * min(c, 1.0 - c), abs=1e-12)

    def test_result_wrappers(self, serenoa_ma, serenoa_mc, serenoa_gaq):
        res_mc = mc_result(serenoa_mc)
        res_gaq = gaq_result(serenoa_gaq)
        assert res_mc.method is Method.CD_EDGINGTON_MC
        assert res_gaq.method is Method.CD_EDGINGTON_GAQ
        for res, cd in ((res_mc, serenoa_mc), (res_gaq, serenoa_gaq)):
            assert res.tau2_used is MARGINALIZED
            assert res.estimate == point_estimate(cd)
            assert res.skewness == pytest.approx(
                ci_skewness(res.ci, res.estimate), abs=1e-12
            )

    def test_interval_skewness_is_negative_for_serenoa(self, serenoa_mc):
        res = mc_result(serenoa_mc)
        assert res.skewness == pytest.approx(-0.06, abs=0.02)

    def test_point_estimates_agree_between_routes(self, serenoa_mc, serenoa_gaq):
        assert point_estimate(serenoa_mc) == pytest.approx(
            point_estimate(serenoa_gaq), abs=0.005
        )

    def test_agreement_on_random_datasets(self):
        rng = np.random.default_rng(2718)
        for _ in range(3):
            ma = random_meta_analysis(rng, k=int(rng.integers(6, 12)))
            gaq = cd_edgington_gaq(ma)
            mc = cd_edgington_mc(ma, b=40_000, seed=int(rng.integers(2**31)))
            assert point_estimate(gaq) == pytest.approx(
                point_estimate(mc), abs=0.01
            )


class TestContainers:
    def test_samples_validation(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MonteCarloSizeWarning)
            with pytest.raises(InputError):
                ConfidenceDistributionSamples(
                    np.array([0.1, np.nan]), np.array([0.0, 0.1]), {}
                )
            with pytest.raises(InputError):
                ConfidenceDistributionSamples(
                    np.array([0.1, 0.2]), np.array([-0.5, 0.1]), {}
                )
            with pytest.raises(InputError):
                ConfidenceDistributionSamples(
                    np.array([0.1, 0.2]), np.array([0.1]), {}
                )

    def test_samples_b_property(self, serenoa_mc):
        assert serenoa_mc.b == 100_000

    def test_gaq_container_validation(self):
        with pytest.raises(InputError):
            MarginalCDGaq(np.array([0.0, 1.0]), np.array([0.2]), (0.0, 1.0))
        with pytest.raises(InputError):
            MarginalCDGaq(np.array([0.0]), np.array([0.2]), (0.0, 1.0))
