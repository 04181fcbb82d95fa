"""Exception and warning types shared across the package."""


class TorusFactorError(Exception):
    """Base class for all package errors."""


class ChartViolationError(TorusFactorError):
    """A displacement field left the valid near-identity chart
    (sup-norm of the Jacobian >= 1, or non-positive Jacobian determinant)."""


class InversionError(TorusFactorError):
    """Newton inversion of a diffeomorphism failed to converge."""

    def __init__(self, message, worst_residual=None):
        super().__init__(message)
        self.worst_residual = worst_residual


class DiophantineError(TorusFactorError):
    """A rotation vector failed empirical small-divisor certification."""


class SmallDivisorBreach(TorusFactorError):
    """A divisor encountered during a spectral solve fell below the
    certified lower bound."""


class SolverDivergenceError(TorusFactorError):
    """An iterative solver diverged; carries the residual history."""

    def __init__(self, message, history=None, leaf_index=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
        self.leaf_index = leaf_index


class FragmentationError(TorusFactorError):
    """A partial displacement field left the fragmentation chart."""


class LeafwiseError(TorusFactorError):
    """A leaf family violated the leaf-preservation or smoothness bounds."""


class InputError(TorusFactorError):
    """Bad user input (file missing, malformed JSON, invalid grid)."""


class ChartWarning(UserWarning):
    """A composed diffeomorphism left the near-identity chart; the result
    is still a valid diffeomorphism but downstream chart guarantees lapse."""
