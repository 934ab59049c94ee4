"""Meta-analysis by combined p-value functions.

Random-effects meta-analysis where inference about the average effect comes
from a confidence distribution: one-sided study p-value functions are
combined through the Irwin-Hall distribution, and uncertainty about the
heterogeneity variance is carried through by marginalizing the conditional
distribution over the heterogeneity confidence distribution, either by
Monte Carlo sampling or by deterministic quadrature.  Classical
inverse-variance and t-based intervals are included as comparators, along
with a simulation harness for method comparison under a known truth.
"""

__version__ = "0.1.0"

from .classical import hksj_result, ivw_result
from .errors import (
    CdmetaError,
    ConvergenceError,
    InputError,
    LowInformationWarning,
    MonteCarloSizeWarning,
    NumericError,
)
from .heterogeneity import (
    Tau2ConfidenceDistribution,
    Tau2Summary,
    display_upper_bound,
    dq_dtau2,
    generalized_q,
    heterogeneity_test_pvalue,
    higgins_i2,
    ivw_mean,
    paule_mandel,
    q_profile_ci,
    reml_tau2,
    sample_tau2,
    tau2_atom,
    tau2_cd,
    tau2_cd_quantile,
    tau2_cd_summary,
    tau2_confidence_density,
)
from .io import (
    AnalysisOptions,
    AnalysisReport,
    analyze,
    parse_sim_config,
    parse_studies,
    report_to_csv,
    report_to_json,
    serialize_studies,
    sim_results_to_csv,
    tau2_report,
)
from .marginal import (
    ConfidenceDistributionSamples,
    MarginalCDGaq,
    cd_edgington_gaq,
    cd_edgington_mc,
    equi_tailed_ci,
    gaq_result,
    marginal_p_value,
    mc_result,
    point_estimate,
)
from .model import (
    MARGINALIZED,
    ConfidenceInterval,
    EstimationResult,
    MetaAnalysis,
    Method,
    Study,
    ci_skewness,
    fisher_weighted_skewness,
    weighted_skewness,
)
from .pvalfun import (
    PValueFunctionSide,
    combined_p,
    confidence_curve,
    edgington_p,
    edgington_result,
    invert_conditional_cd,
    irwin_hall_cdf,
    irwin_hall_pdf,
    irwin_hall_ppf,
    wald_p,
)
from .simharness import (
    DEFAULT_METHODS,
    EffectDistribution,
    MethodPerformance,
    SimResult,
    SimScenario,
    cohen_kappa,
    coverage_mcse,
    draw_estimates,
    draw_se2,
    draw_true_effects,
    run_scenario,
    tau2_from_i2,
)

__all__ = [
    "__version__",
    # model
    "Study", "MetaAnalysis", "ConfidenceInterval", "EstimationResult",
    "Method", "MARGINALIZED", "ci_skewness", "weighted_skewness",
    "fisher_weighted_skewness",
    # errors
    "CdmetaError", "InputError", "NumericError", "ConvergenceError",
    "LowInformationWarning", "MonteCarloSizeWarning",
    # p-value functions
    "PValueFunctionSide", "wald_p", "combined_p", "edgington_p",
    "irwin_hall_cdf", "irwin_hall_pdf", "irwin_hall_ppf",
    "invert_conditional_cd", "confidence_curve", "edgington_result",
    # heterogeneity
    "generalized_q", "ivw_mean", "dq_dtau2", "heterogeneity_test_pvalue", "tau2_atom",
    "tau2_cd", "tau2_confidence_density", "tau2_cd_quantile", "sample_tau2",
    "paule_mandel", "reml_tau2", "q_profile_ci", "higgins_i2",
    "display_upper_bound", "tau2_cd_summary", "Tau2Summary",
    "Tau2ConfidenceDistribution",
    # marginal
    "ConfidenceDistributionSamples", "MarginalCDGaq", "cd_edgington_mc",
    "cd_edgington_gaq", "point_estimate", "equi_tailed_ci",
    "marginal_p_value", "mc_result", "gaq_result",
    # classical
    "ivw_result", "hksj_result",
    # simulation harness
    "DEFAULT_METHODS",
    "EffectDistribution", "SimScenario", "SimResult", "MethodPerformance",
    "draw_se2", "tau2_from_i2", "draw_true_effects", "draw_estimates",
    "run_scenario", "cohen_kappa", "coverage_mcse",
    # io
    "parse_studies", "serialize_studies", "AnalysisOptions", "AnalysisReport",
    "analyze", "tau2_report", "report_to_json", "report_to_csv",
    "parse_sim_config", "sim_results_to_csv",
]


def __getattr__(name):
    # Lazy dataset loaders keep import light and avoid a circular import at
    # package load (datasets -> io -> model).
    if name in ("serenoa", "covid"):
        from . import datasets

        return getattr(datasets, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
