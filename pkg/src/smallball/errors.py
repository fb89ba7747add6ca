"""Exception taxonomy shared across the package.

Two top-level families map onto the CLI exit codes: bad inputs exit with
code 2, numerical failures with code 1.
"""


class SmallBallError(Exception):
    """Base class for all package errors."""


class InputError(SmallBallError):
    """Invalid parameters, domains, or serialized inputs (CLI exit 2)."""


class NumericalError(SmallBallError):
    """A computation failed to converge or was numerically refused (CLI exit 1)."""


class SpectrumError(InputError):
    """Invalid spectral model."""


class WeightError(InputError):
    """Invalid weight function or weight/domain mismatch."""


class OperatorError(InputError):
    """Invalid operator assembly request."""


class DivergenceError(NumericalError):
    """A series or integral was flagged divergent."""


class NonConvergenceError(NumericalError):
    """An iterative routine did not converge; diagnostics attached."""
