"""Exception types shared across the toolkit."""


class ParameterError(ValueError):
    """Out-of-range model parameter (dimension, index, angle, coefficient)."""


class NotOnBoundaryError(ValueError):
    """A point expected on the boundary misses it by more than the tolerance."""


class ClusteringError(RuntimeError):
    """Eigenvalues cannot be grouped into well separated clusters."""


class CriticalStartError(ValueError):
    """A flow was started at (or too near) a critical point of f."""


class BracketError(RuntimeError):
    """No sign change of the boundary residual inside the search bracket."""


class SingularFamilyError(ArithmeticError):
    """The curvature family denominator vanishes on the requested interval."""


class SolverError(RuntimeError):
    """A numerical solver reached an inconsistent state."""
