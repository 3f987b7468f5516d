"""Exception types shared across the package."""


class DomainError(ValueError):
    """A value lies outside the domain where a function is defined."""


class UnsupportedPotentialError(ValueError):
    """The requested operation has no form for this potential."""


class ConvergenceError(RuntimeError):
    """A nonlinear iteration failed to reach its tolerance."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class SingularSystemError(RuntimeError):
    """A linear system is numerically singular."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class MeshTanglingError(RuntimeError):
    """Moved mesh nodes are no longer strictly ordered."""


class RegionError(ValueError):
    """A point was evaluated in a region that does not contain it."""


class DegenerateGeometryError(ValueError):
    """Interface configuration for which a closed-form coefficient is undefined."""
