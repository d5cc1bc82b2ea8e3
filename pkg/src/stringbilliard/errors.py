"""Exception types shared by the billiard modules."""


class BilliardError(Exception):
    """Base class for every error raised by this package."""


class DomainError(BilliardError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class GrazingError(BilliardError):
    """A ray meets the boundary tangentially; reflection is undefined."""


class GeometryIntegrityError(BilliardError):
    """A ray failed to hit the boundary, i.e. the state left the table."""


class SearchFailure(BilliardError):
    """A periodic-orbit search did not converge to an acceptable orbit."""


class IntegrityError(BilliardError):
    """A computed object violates an invariant it must satisfy (e.g. det M = 1)."""
