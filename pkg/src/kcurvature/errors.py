"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operands live in spaces of different dimension."""


class DegeneratePlaneError(ValueError):
    """Two vectors do not span a plane."""


class NotConstantCurvatureError(ValueError):
    """A constant sectional K-curvature was required but not found."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to meet its stopping criterion.

    Attributes
    ----------
    best_residual : float or None
        Smallest residual seen before giving up.
    last_good : float or None
        Last accepted continuation parameter, for path tracking.
    """

    def __init__(self, message, best_residual=None, last_good=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.last_good = last_good
