"""Exception hierarchy shared by all solver modules."""


class FokasError(Exception):
    """Base class for every error raised by this package."""


class InvalidSpec(FokasError, ValueError):
    """Problem parameters or boundary-condition kind are inconsistent."""


class DegenerateDenominator(FokasError):
    """A Robin coefficient equals 2*D0/K0, so the (sigma, rho) reduction is undefined."""


class ComplexEta(FokasError):
    """The exact root-count discriminant is complex; the count is ambiguous."""


class CountMismatch(FokasError):
    """The numerical root count disagrees with the classification table."""


class PoleOnContour(FokasError):
    """A root of the determinant lies too close to the integration contour."""


class ZeroTimeUnbounded(FokasError):
    """No Gaussian damping available at t = 0 to truncate the contour."""


class NotConverged(FokasError):
    """Quadrature refinement changed the result by more than the tolerance."""


class SingularSystem(FokasError, ArithmeticError):
    """The collocation matrix is numerically singular."""
