import numpy as np
import pytest

from cdmeta import MetaAnalysis, covid, serenoa


@pytest.fixture(scope="session")
def serenoa_ma() -> MetaAnalysis:
    return serenoa()


@pytest.fixture(scope="session")
def covid_ma() -> MetaAnalysis:
    return covid()


def random_meta_analysis(rng: np.random.Generator, k=None) -> MetaAnalysis:
    """A random dataset with mixed precisions, for property tests."""
    if k is None:
        k = int(rng.integers(3, 13))
    estimates = rng.normal(0.0, 1.5, size=k)
    ses = np.exp(rng.normal(-1.0, 0.6, size=k))
    return MetaAnalysis.from_arrays(estimates, ses)
