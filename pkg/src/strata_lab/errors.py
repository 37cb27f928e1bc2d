"""Exception hierarchy shared by every module."""

from __future__ import annotations


class StrataLabError(Exception):
    """Base class for all library errors."""


class InvalidParameter(StrataLabError, ValueError):
    """A numeric argument is outside its documented range."""


class InvalidMatrix(InvalidParameter):
    """A matrix is not in SL(2,R) within tolerance."""


class DisconnectedSurface(StrataLabError):
    """Gluing data does not produce a connected surface."""


class MalformedSurface(StrataLabError):
    """Polygons or gluings violate a structural invariant."""


class NumericalDegeneracy(StrataLabError):
    """A geometric routine lost control of its tolerances."""


class BudgetExceeded(StrataLabError):
    """A search exhausted its configured budget.

    Attributes
    ----------
    partial : object
        Whatever was computed before the budget ran out (flagged incomplete).
    """

    def __init__(self, message: str, partial: object = None):
        super().__init__(message)
        self.partial = partial


class NoSingularity(StrataLabError):
    """The surface has no marked points or cone points."""


class NonPeriodicDirection(StrataLabError):
    """A separatrix failed to close up within the trace budget."""


class ClassificationError(StrataLabError):
    """An SL(2,R) element has the wrong conjugacy type for the request."""


class ChartError(StrataLabError):
    """A period chart could not be built (rank deficiency)."""


class ChartMismatch(StrataLabError):
    """A saddle connection does not resolve in the given chart."""


class ExpDomainError(StrataLabError):
    """The exponential map left the domain where triangles stay positive."""


class DegenerateForm(StrataLabError):
    """The symplectic form restricted to the standard plane vanishes."""


class PreconditionUnmet(StrataLabError):
    """A theorem-level precondition (threshold in t, D, ...) does not hold."""
