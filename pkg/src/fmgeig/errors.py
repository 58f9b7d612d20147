"""Exception types shared across the package."""


class SolverError(RuntimeError):
    """Base class for numerical failures (factorization, convergence, rank)."""


class NotPositiveDefiniteError(SolverError):
    """A matrix required to be positive (semi)definite failed the check."""


class ConvergenceError(SolverError):
    """An iterative method exhausted its iteration budget."""


class DegenerateAugmentationError(SolverError):
    """Rank filtering left fewer basis columns than requested eigenpairs."""


class AssemblyError(SolverError):
    """Coefficient evaluation produced invalid data during assembly."""


class MeshFormatError(ValueError):
    """A mesh file violated the node/element text format."""

    def __init__(self, message, line=None):
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)
        self.line = line
