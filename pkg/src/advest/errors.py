"""Exception types."""


class UnsupportedDegreeError(ValueError):
    """Polynomial degree below the minimum a scheme allows."""


class SolverError(RuntimeError):
    """A linear system could not be solved to the required accuracy."""


class OrthogonalityError(ValueError):
    """The residual is not orthogonal to the hat functions.

    ``residuals`` maps vertex index to the offending value.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or {}
