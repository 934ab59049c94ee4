"""Exception and warning types shared across the package."""


class CdmetaError(Exception):
    """Base class for every package-specific error."""


class InputError(CdmetaError, ValueError):
    """Invalid or degenerate input: malformed CSV, se <= 0, bad level, ..."""


class NumericError(CdmetaError, RuntimeError):
    """A numerical procedure failed: bracket expansion, quadrature, ..."""


class ConvergenceError(NumericError):
    """An iterative estimator ran out of iterations before converging."""


class LowInformationWarning(UserWarning):
    """Inference rests on very few degrees of freedom (k = 2)."""


class MonteCarloSizeWarning(UserWarning):
    """A Monte Carlo sample is small for the requested inferential use."""
