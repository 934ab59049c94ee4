"""CSV ingestion, analysis orchestration, and report serialization.

The JSON report is the machine interface: floats round-trip exactly, the
seed and Monte Carlo budget are echoed so every number is reproducible, and
the schema carries a version field.  The CSV rendering is for reading at a
desk: six significant digits, one value per row.
"""

from __future__ import annotations

import csv
import io as _io
import itertools
import json
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm, t as student_t

from . import heterogeneity as het
from .classical import hksj_result, ivw_result
from .errors import ConvergenceError, InputError, LowInformationWarning, NumericError
from .marginal import cd_edgington_gaq, cd_edgington_mc, gaq_result, mc_result
from .model import EstimationResult, MetaAnalysis, Method, Study
from .pvalfun import (
    PValueFunctionSide,
    combined_p,
    edgington_result,
    wald_p,
)
from .simharness import (
    DEFAULT_METHODS,
    EffectDistribution,
    SimResult,
    SimScenario,
)

__all__ = [
    "SCHEMA_VERSION",
    "ALL_METHODS",
    "parse_studies",
    "serialize_studies",
    "AnalysisOptions",
    "AnalysisReport",
    "analyze",
    "tau2_report",
    "report_to_json",
    "report_to_csv",
    "parse_sim_config",
    "sim_results_to_csv",
]

SCHEMA_VERSION = 1

ALL_METHODS = (
    Method.IVW,
    Method.HKSJ,
    Method.EDGINGTON,
    Method.CD_EDGINGTON_MC,
    Method.CD_EDGINGTON_GAQ,
)

REQUIRED_COLUMNS = ("study", "estimate", "se")


def parse_studies(csv_text: str) -> MetaAnalysis:
    """Parse a study table with columns study, estimate, se (any order)."""
    reader = csv.reader(_io.StringIO(csv_text))
    try:
        header = next(reader)
    except StopIteration:
        raise InputError("empty input: expected a header row 'study,estimate,se'")
    names = [h.strip().lower() for h in header]
    positions = {}
    for col in REQUIRED_COLUMNS:
        if col not in names:
            raise InputError(f"missing required column '{col}' in header {header!r}")
        positions[col] = names.index(col)

    studies = []
    for row_number, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(names):
            raise InputError(f"row {row_number}: expected {len(names)} fields, got {len(row)}")
        label = row[positions["study"]].strip()
        values = {}
        for col in ("estimate", "se"):
            cell = row[positions[col]].strip()
            try:
                values[col] = float(cell)
            except ValueError:
                raise InputError(
                    f"row {row_number}, column '{col}': not a number: {cell!r}"
                ) from None
        if not np.isfinite(values["estimate"]):
            raise InputError(f"row {row_number}, column 'estimate': must be finite")
        if not (np.isfinite(values["se"]) and values["se"] > 0.0):
            raise InputError(f"row {row_number}, column 'se': must be > 0")
        studies.append(Study(values["estimate"], values["se"], label=label or None))
    if len(studies) < 2:
        raise InputError(f"need at least 2 studies, got {len(studies)}")
    return MetaAnalysis(tuple(studies))


def serialize_studies(ma: MetaAnalysis) -> str:
    """Inverse of parse_studies: exact float round-trip."""
    out = _io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(REQUIRED_COLUMNS)
    for i, s in enumerate(ma.studies):
        writer.writerow([s.label or f"study {i + 1}", repr(s.estimate), repr(s.se)])
    return out.getvalue()


@dataclass(frozen=True)
class AnalysisOptions:
    level: float = 0.95
    b: int = 100_000
    methods: Sequence[Method] = ALL_METHODS
    seed: Optional[int] = None
    curves: bool = False
    curve_grid: int = 201
    prob_below: Optional[float] = None
    gaq_tol: float = 1e-6

    def __post_init__(self):
        try:
            object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))
        except ValueError:
            raise InputError(f"unknown method in {self.methods!r}") from None
        if not 0.0 < self.level < 1.0:
            raise InputError(f"level must be in (0, 1), got {self.level!r}")
        if self.b < 1:
            raise InputError("b must be >= 1")
        if self.curve_grid < 2:
            raise InputError("curve_grid must be >= 2")


@dataclass(frozen=True)
class AnalysisReport:
    schema_version: int
    input: dict
    options: dict
    tau2: dict
    methods: list
    curves: Optional[dict] = None
    prob_below: Optional[dict] = None


def _result_to_dict(res: EstimationResult) -> dict:
    return {
        "method": res.method.value,
        "status": "ok",
        "estimate": res.estimate,
        "ci_lower": res.ci.lower,
        "ci_upper": res.ci.upper,
        "level": res.ci.level,
        "skewness": res.skewness,
        "p_value_at_zero": res.p_value_at_zero,
        "tau2_used": res.tau2_used,
    }


def _tau2_block(ma: MetaAnalysis, level: float) -> tuple:
    """Heterogeneity summary block; returns (dict, tau2_hat, estimator_name)."""
    estimator = "reml"
    try:
        tau2_hat = het.reml_tau2(ma)
    except ConvergenceError:
        tau2_hat = het.paule_mandel(ma)
        estimator = "paule-mandel (reml fallback)"
    qp = het.q_profile_ci(ma, level)
    summary = het.tau2_cd_summary(ma, level)
    block = {
        "reml": None if estimator != "reml" else tau2_hat,
        "paule_mandel": het.paule_mandel(ma),
        "plugin_estimate": tau2_hat,
        "plugin_estimator": estimator,
        "q_profile_ci": [qp.lower, qp.upper],
        "i2": het.higgins_i2(ma),
        "q_at_zero": het.generalized_q(0.0, ma),
        "heterogeneity_p": het.heterogeneity_test_pvalue(ma),
        "cd_atom_at_zero": summary.atom,
        "cd_median": summary.median,
        "cd_ci": [summary.ci.lower, summary.ci.upper],
        "cd_display_upper": summary.upper_bound,
        "level": level,
    }
    return block, tau2_hat, estimator


def _method_cdf(method, res, ma, tau2_hat, cd_obj, grid):
    """One-sided CDF of each method's implied confidence distribution."""
    if method is Method.IVW:
        z = norm.ppf(1.0 - (1.0 - res.ci.level) / 2.0)
        se = res.ci.width / (2.0 * z)
        return norm.cdf((grid - res.estimate) / se)
    if method is Method.HKSJ:
        tq = student_t.ppf(1.0 - (1.0 - res.ci.level) / 2.0, ma.k - 1)
        se = res.ci.width / (2.0 * tq)
        if se == 0.0:
            return (grid >= res.estimate).astype(float)
        return student_t.cdf((grid - res.estimate) / se, ma.k - 1)
    if method is Method.EDGINGTON:
        return combined_p(grid, ma.estimates, ma.variances, tau2_hat)
    if method is Method.CD_EDGINGTON_MC:
        sorted_draws = np.sort(cd_obj.mu_draws)
        return np.searchsorted(sorted_draws, grid, side="right") / sorted_draws.size
    if method is Method.CD_EDGINGTON_GAQ:
        return np.interp(grid, cd_obj.grid, cd_obj.cdf)
    raise InputError(f"unsupported method {method!r}")


def analyze(ma: MetaAnalysis, options: AnalysisOptions = AnalysisOptions()) -> AnalysisReport:
    """Run the requested estimators and assemble a serializable report.

    A numeric failure in one method marks that method failed in the report
    and does not abort the others.
    """
    seed = options.seed
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**63))
    tau2_block, tau2_hat, _ = _tau2_block(ma, options.level)

    if Method.CD_EDGINGTON_GAQ in options.methods and ma.k <= 5:
        warnings.warn(
            "quadrature marginalization can be wide with 5 or fewer studies; "
            "the Monte Carlo route is recommended there",
            LowInformationWarning,
            stacklevel=2,
        )

    results = {}
    entries = []
    cd_objects = {}
    for method in options.methods:
        try:
            if method is Method.IVW:
                res = ivw_result(ma, tau2_hat, options.level)
            elif method is Method.HKSJ:
                res = hksj_result(ma, tau2_hat, options.level)
            elif method is Method.EDGINGTON:
                res = edgington_result(ma, tau2_hat, options.level)
            elif method is Method.CD_EDGINGTON_MC:
                cd = cd_edgington_mc(ma, b=options.b, seed=seed)
                cd_objects[method] = cd
                res = mc_result(cd, options.level)
            elif method is Method.CD_EDGINGTON_GAQ:
                cd = cd_edgington_gaq(ma, tol=options.gaq_tol)
                cd_objects[method] = cd
                res = gaq_result(cd, options.level)
            else:
                raise InputError(f"unsupported method {method!r}")
        except (NumericError, InputError) as exc:
            entries.append(
                {"method": method.value, "status": "failed", "error": str(exc)}
            )
            continue
        results[method] = res
        entries.append(_result_to_dict(res))

    report_curves = None
    if options.curves:
        report_curves = _curves_block(ma, options, results, tau2_hat, cd_objects)

    prob_block = None
    if options.prob_below is not None:
        x = float(options.prob_below)
        grid = np.array([x])
        prob_block = {"at": x, "methods": {}}
        for method, res in results.items():
            c = float(
                _method_cdf(method, res, ma, tau2_hat, cd_objects.get(method), grid)[0]
            )
            prob_block["methods"][method.value] = c

    return AnalysisReport(
        schema_version=SCHEMA_VERSION,
        input={
            "k": ma.k,
            "studies": [
                {"study": s.label or f"study {i + 1}", "estimate": s.estimate, "se": s.se}
                for i, s in enumerate(ma.studies)
            ],
        },
        options={
            "level": options.level,
            "b": options.b,
            "seed": seed,
            "methods": [m.value for m in options.methods],
            "gaq_tol": options.gaq_tol,
        },
        tau2=tau2_block,
        methods=entries,
        curves=report_curves,
        prob_below=prob_block,
    )


def _curves_block(ma, options, results, tau2_hat, cd_objects) -> dict:
    """Two-sided p-value grids per method and per study (drapery data)."""
    spans = [ma.estimates - 4.5 * ma.standard_errors, ma.estimates + 4.5 * ma.standard_errors]
    lo = float(np.min(spans[0]))
    hi = float(np.max(spans[1]))
    for res in results.values():
        lo = min(lo, res.ci.lower)
        hi = max(hi, res.ci.upper)
    base = np.linspace(lo, hi, options.curve_grid)
    medians = []
    for method, res in results.items():
        cd_obj = cd_objects.get(method)
        if method is Method.CD_EDGINGTON_MC:
            medians.append(float(np.quantile(cd_obj.mu_draws, 0.5)))
        else:
            medians.append(res.estimate)
    grid = np.unique(np.concatenate([base, np.asarray(medians, dtype=float)]))

    methods_block = {}
    for method, res in results.items():
        cdf = _method_cdf(method, res, ma, tau2_hat, cd_objects.get(method), grid)
        cdf = np.clip(cdf, 0.0, 1.0)
        methods_block[method.value] = {
            "cdf": cdf.tolist(),
            "p_two_sided": (2.0 * np.minimum(cdf, 1.0 - cdf)).tolist(),
            "confidence_curve": np.abs(1.0 - 2.0 * cdf).tolist(),
        }
    studies_block = {}
    for i, s in enumerate(ma.studies):
        p = wald_p(grid, s.estimate, s.se, PValueFunctionSide.TWO_SIDED)
        studies_block[s.label or f"study {i + 1}"] = {"p_two_sided": p.tolist()}
    return {"mu_grid": grid.tolist(), "methods": methods_block, "studies": studies_block}


def tau2_report(
    ma: MetaAnalysis,
    level: float = 0.95,
    grid_size: int = 201,
    upper: Optional[float] = None,
) -> dict:
    """Heterogeneity confidence distribution on a display grid."""
    if grid_size < 2:
        raise InputError("grid_size must be >= 2")
    block, _, _ = _tau2_block(ma, level)
    if upper is None:
        upper = block["cd_display_upper"]
    upper = float(upper)
    if not upper > 0.0:
        raise InputError("upper must be > 0")
    grid = np.linspace(0.0, upper, grid_size)
    density = het.tau2_confidence_density(grid, ma)
    cdf = het.tau2_cd(grid, ma)
    return {
        "schema_version": SCHEMA_VERSION,
        "summary": block,
        "grid": grid.tolist(),
        "density": density.tolist(),
        "cdf": cdf.tolist(),
    }


def report_to_json(report) -> str:
    """Exact-round-trip JSON (floats use shortest exact representation)."""
    if isinstance(report, AnalysisReport):
        payload = {
            "schema_version": report.schema_version,
            "input": report.input,
            "options": report.options,
            "tau2": report.tau2,
            "methods": report.methods,
        }
        if report.curves is not None:
            payload["curves"] = report.curves
        if report.prob_below is not None:
            payload["prob_below"] = report.prob_below
    else:
        payload = report
    return json.dumps(payload, indent=2, allow_nan=True) + "\n"


def _sig6(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def report_to_csv(report: AnalysisReport) -> str:
    """Flat summary table at six significant digits."""
    out = _io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["section", "item", "field", "value"])
    for key, value in report.tau2.items():
        if isinstance(value, (list, tuple)):
            for suffix, v in zip(("lower", "upper"), value):
                writer.writerow(["tau2", key, suffix, _sig6(v)])
        else:
            writer.writerow(["tau2", key, "", _sig6(value)])
    for entry in report.methods:
        name = entry["method"]
        for field_name, value in entry.items():
            if field_name == "method":
                continue
            writer.writerow(["method", name, field_name, _sig6(value)])
    if report.prob_below is not None:
        for name, value in report.prob_below["methods"].items():
            writer.writerow(
                ["prob_below", name, _sig6(report.prob_below["at"]), _sig6(value)]
            )
    return out.getvalue()


# -- simulation configs ------------------------------------------------------

_LIST_KEYS = {"k", "i2", "k_large", "effect_dist"}
_SCALAR_KEYS = {"mu_true", "n_small", "n_large", "n_sim", "b", "seed", "level"}
_INT_KEYS = {"k", "k_large", "n_small", "n_large", "n_sim", "b", "seed"}


def parse_sim_config(text: str) -> tuple:
    """Parse a key=value scenario-grid config.

    List-valued keys (k, i2, k_large, effect_dist) take comma-separated
    values and expand to their cross product; each cell gets a distinct
    deterministic seed stream derived from the base seed and cell index.
    Returns (scenarios, options) where options carries methods and level.
    """
    raw = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise InputError(f"config line {line_number}: expected key = value")
        key, _, value = stripped.partition("=")
        key = key.strip().lower()
        if key not in _LIST_KEYS | _SCALAR_KEYS | {"methods"}:
            raise InputError(f"config line {line_number}: unknown key {key!r}")
        raw[key] = value.strip()

    def convert(key, token):
        token = token.strip()
        if key == "effect_dist":
            try:
                return EffectDistribution(token.lower())
            except ValueError:
                raise InputError(f"unknown effect_dist {token!r}") from None
        try:
            return int(token) if key in _INT_KEYS else float(token)
        except ValueError:
            raise InputError(f"config key {key!r}: not a number: {token!r}") from None

    grids = {}
    for key in _LIST_KEYS:
        if key in raw:
            grids[key] = [convert(key, tok) for tok in raw[key].split(",")]
    if "k" not in grids or "i2" not in grids:
        raise InputError("config must set at least k and i2")
    grids.setdefault("k_large", [0])
    grids.setdefault("effect_dist", [EffectDistribution.NORMAL])

    scalars = {}
    for key in _SCALAR_KEYS - {"seed", "level"}:
        if key in raw:
            scalars[key] = convert(key, raw[key])
    base_seed = convert("seed", raw["seed"]) if "seed" in raw else 0
    level = float(raw["level"]) if "level" in raw else 0.95

    methods = DEFAULT_METHODS
    if "methods" in raw:
        try:
            methods = tuple(Method(tok.strip()) for tok in raw["methods"].split(","))
        except ValueError:
            raise InputError(
                f"config key 'methods': unknown method in {raw['methods']!r}"
            ) from None

    scenarios = []
    cells = itertools.product(
        grids["k"], grids["i2"], grids["k_large"], grids["effect_dist"]
    )
    for index, (k, i2, k_large, dist) in enumerate(cells):
        scenarios.append(
            SimScenario(
                k=k,
                i2=i2,
                k_large=k_large,
                effect_dist=dist,
                seed=(base_seed, index),
                **scalars,
            )
        )
    return scenarios, {"methods": methods, "level": level}


def sim_results_to_csv(results: Sequence[SimResult]) -> str:
    """One row per scenario x method x measure, with its MCSE when defined."""
    out = _io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        [
            "k", "i2", "k_large", "effect_dist", "n_sim", "b",
            "method", "measure", "value", "mcse",
        ]
    )
    for result in results:
        sc = result.scenario
        prefix = [sc.k, sc.i2, sc.k_large, sc.effect_dist.value, sc.n_sim, sc.b]
        for method in result.methods:
            perf = result.performance[method]
            for measure, (value, mcse) in perf.as_dict().items():
                writer.writerow(
                    prefix
                    + [
                        method.value,
                        measure,
                        _sig6(float(value)),
                        "" if np.isnan(mcse) else _sig6(float(mcse)),
                    ]
                )
            writer.writerow(prefix + [method.value, "n_failed", perf.n_failed, ""])
        writer.writerow(prefix + ["", "reml_failures", result.reml_failures, ""])
    return out.getvalue()
