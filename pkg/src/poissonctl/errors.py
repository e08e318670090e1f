"""Exception types shared across the package.

The command line maps these onto exit codes, so the split matters:
configuration problems must be distinguishable from numerical failures.
"""


class PoissonctlError(Exception):
    """Base class for all package errors."""


class MeshFormatError(PoissonctlError):
    """Mesh or field file could not be parsed or validated.

    Carries the offending line number (1-based) when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class GeometryError(PoissonctlError):
    """Invalid geometry arguments (overlapping circles, point outside mesh, ...)."""


class CapacityError(PoissonctlError):
    """Requested resolution would exceed the memory budget."""


class SolverError(PoissonctlError):
    """Iterative linear solve failed to reach the requested tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateProblemError(PoissonctlError):
    """A well-posedness precondition failed (flat field, empty bracket, ...)."""


class ConstraintError(PoissonctlError):
    """Control violates the admissible class, or constraint parameters are inconsistent."""


class ConfigError(PoissonctlError):
    """Invalid run configuration.  Collects every validation problem at once."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
