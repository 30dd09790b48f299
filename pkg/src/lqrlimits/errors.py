"""Exception hierarchy for lqrlimits.

Everything raised on purpose derives from :class:`LqrLimitsError`, so callers
(and the CLI) can distinguish domain failures from bugs.
"""


class LqrLimitsError(Exception):
    """Base class for all errors raised by this package."""


class NumericalFailureError(LqrLimitsError):
    """A numerical routine failed (eigensolver, singular linear solve,
    Riccati iteration not meeting its residual tolerance)."""


class InstabilityError(LqrLimitsError):
    """A spectral-radius-below-one precondition was violated."""


class DegenerateInputError(LqrLimitsError):
    """Input is degenerate for the requested quantity (zero matrix where a
    nonzero one is required, empty perturbation basis, rho = 0 where a
    rho^-k factor appears)."""


class PerturbationTooLargeError(LqrLimitsError):
    """A finite-difference step left the stabilizable set; retry with a
    smaller step."""


class BallTooLargeError(LqrLimitsError):
    """A sampled point of the parameter ball is not stabilizable under the
    exploration feedback, so the ball extrema cannot be evaluated."""


class ExcitationDeficientError(LqrLimitsError):
    """The regressor Gram matrix is singular; the experiment did not excite
    the system enough to identify it."""

    def __init__(self, message, smallest_singular_value=None):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


class DivergenceError(LqrLimitsError):
    """A simulated trajectory overflowed to non-finite values."""


class AllTrialsFailedError(LqrLimitsError):
    """Every Monte Carlo trial failed to produce a stabilizing design."""


class ConfigError(LqrLimitsError):
    """An experiment configuration file is malformed; the message names the
    offending field."""
