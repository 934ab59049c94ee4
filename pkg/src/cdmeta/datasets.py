"""Bundled example datasets.

Both are log odds ratio meta-analyses used throughout the documentation:
nine placebo-controlled trials of saw palmetto extract for urinary symptoms
(moderate heterogeneity), and seven dexamethasone trials in ventilated
COVID-19 patients (mild heterogeneity, log odds ratios reconstructed from
the published odds ratios and 95% confidence intervals).
"""

from __future__ import annotations

from importlib.resources import files

from .io import parse_studies
from .model import MetaAnalysis

__all__ = ["serenoa", "covid"]


def _load(name: str) -> MetaAnalysis:
    text = files("cdmeta").joinpath("data", name).read_text(encoding="utf-8")
    return parse_studies(text)


def serenoa() -> MetaAnalysis:
    """Nine saw palmetto trials, log odds ratio scale."""
    return _load("serenoa.csv")


def covid() -> MetaAnalysis:
    """Seven dexamethasone COVID-19 trials, log odds ratio scale."""
    return _load("covid.csv")
