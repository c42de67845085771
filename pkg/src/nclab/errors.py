"""Exception types shared across the package."""


class NclabError(Exception):
    """Base class for all package errors."""


class GridError(NclabError, ValueError):
    """Invalid domain discretization request."""


class FieldError(NclabError, ValueError):
    """Scalar field violates its invariants (shape, finiteness, sign)."""


class KernelError(NclabError, ValueError):
    """Kernel specification or sampled kernel matrix is invalid."""


class OperatorError(NclabError, ValueError):
    """Dispersal operator assembly or application rejected."""


class ReducibleOperatorError(NclabError):
    """The nonzero pattern of the operator does not connect the grid.

    Raised before power iteration: a reducible matrix has no strictly
    positive dominant eigenvector, so the failure is a modeling mistake
    (kernel range too small for the mesh), not a solver breakdown.
    """


class ConvergenceError(NclabError):
    """An iterative computation did not reach its tolerance."""

    def __init__(self, message: str, residual: float | None = None,
                 iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class MonotoneOrbitError(NclabError):
    """A monotone orbit violated its ordering during time stepping."""


class SteadyStateNotFoundError(NclabError):
    """No positive steady state exists for the requested problem."""


class ConfigError(NclabError, ValueError):
    """Scenario or sweep configuration is invalid."""
