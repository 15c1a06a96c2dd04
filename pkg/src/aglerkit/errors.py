"""Exception hierarchy shared by all aglerkit modules."""


class AglerError(Exception):
    """Base class for aglerkit errors."""


class InvalidInputError(AglerError, ValueError):
    """Malformed or out-of-domain input."""


class NotPositiveKernelError(AglerError):
    """A Gram matrix that was required to be PSD is not.

    The failing :class:`~aglerkit.linalg.PsdReport` is kept on ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotIsometricError(AglerError):
    """Domain and range vector families have different Gram matrices."""


class TestAxiomError(AglerError):
    """A test function reached norm >= 1 at a node."""

    __test__ = False  # keep pytest from collecting this


class SamplingFailure(AglerError):
    """A rejection sampler ran out of attempts."""


class NormalizationError(AglerError):
    """Boundary value at 1 is not numerically unitary."""


class UndecidedError(AglerError):
    """Iterative solver hit its cap before it could classify the problem.

    ``trace`` holds the residual history.
    """

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class InconsistentDecompositionError(AglerError):
    """A decomposition does not reproduce its target kernel."""


class NumericalFailure(AglerError):
    """A linear solve was too ill-conditioned to trust."""


class UnsupportedError(AglerError):
    """Operation is not defined for the given family."""
