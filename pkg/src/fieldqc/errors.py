"""Exception hierarchy.

Each class carries the process exit code the command line maps it to.
"""


class FieldQCError(Exception):
    exit_code = 5


class InputError(FieldQCError, ValueError):
    """Invalid parameters or a violated precondition."""

    exit_code = 2


class ResolutionError(InputError):
    """Grid too coarse for the requested nuclear regularization width."""


class DomainError(InputError):
    """Evaluation point outside the domain of a field or kernel."""


class ConvergenceError(FieldQCError):
    """An iterative solve stopped before reaching its tolerance.

    ``residuals`` holds the last residual norms and ``state`` the
    deformation gradient (or other tag) of the failing solve, if known.
    """

    exit_code = 3

    def __init__(self, message, residuals=None, state=None):
        super().__init__(message)
        self.residuals = residuals
        self.state = state


class ConstraintError(ConvergenceError):
    """Density went negative beyond tolerance."""


class FitError(ConvergenceError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class RegimeError(FieldQCError):
    """Homogenized model outside the regime an operation supports."""

    exit_code = 4


class ConsistencyError(FieldQCError):
    """An internal cross-check (closed form vs. quadrature, etc.) failed."""

    exit_code = 5


class DegenerateGeometryError(ConsistencyError):
    pass


class IllConditionedError(ConsistencyError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
