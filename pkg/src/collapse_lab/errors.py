"""Exception hierarchy shared across the package.

The CLI maps :class:`InvalidParameterError` to exit status 2 and
:class:`NumericalError` to exit status 3.
"""


class CollapseLabError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(CollapseLabError, ValueError):
    """Input parameters violate a precondition."""


class NumericalError(CollapseLabError, ArithmeticError):
    """A numerical procedure failed or cannot deliver a finite answer."""


class GammaPoleError(NumericalError):
    """Gamma function evaluated at a nonpositive integer."""


class ZeroBaseError(InvalidParameterError):
    """Complex power requested for a zero base."""


class SeriesNonConvergence(NumericalError):
    """Power series hit ``max_terms`` before reaching tolerance.

    ``partial`` holds the partial sum, ``error_estimate`` the size of the
    last term added.
    """

    def __init__(self, message, partial=None, error_estimate=None):
        super().__init__(message)
        self.partial = partial
        self.error_estimate = error_estimate


class CollapseConditionError(InvalidParameterError):
    """Parameters do not allow a fall to the centre."""

    def __init__(self, message, margin=None):
        super().__init__(message)
        self.margin = margin


class OrbitDomainError(InvalidParameterError):
    """Time lies outside the existence interval of a classical branch."""


class ParticleTrapped(OrbitDomainError):
    """The branch has already ended: the particle sits at the centre."""


class BranchNotStarted(OrbitDomainError):
    """The branch has not begun yet at the requested time."""


class BranchError(InvalidParameterError):
    """Branch choice incompatible with the request (e.g. mu' = -3/4)."""


class DivergenceError(NumericalError):
    """A requested integral does not converge.

    ``exponent`` is the power of xi governing the divergent end,
    ``end`` is ``"origin"`` or ``"infinity"``.
    """

    def __init__(self, message, exponent=None, end=None):
        super().__init__(message)
        self.exponent = exponent
        self.end = end


class InstabilityError(NumericalError):
    """Time stepper detected non-physical norm growth."""
