class SolverError(Exception):
    """Base class for every failure raised by the layer solver"""


class DomainError(SolverError, ValueError):
    """Argument outside the domain of a special function"""


class BranchPointError(DomainError):
    """Spectral parameter sits exactly on a threshold n^2"""


class CoincidentPointsError(SolverError, ValueError):
    """Kernel evaluated at coinciding points"""


class GeometryError(SolverError, ValueError):
    """Surface violates the layer or wire constraints"""


class ThresholdCollisionError(SolverError, ValueError):
    """An eigenvalue lands on a threshold k^2"""


class PoleCollisionError(SolverError):
    """Some Gamma_n with n != l vanishes at the evaluation point"""


class IllConditionedError(SolverError):
    """A linear solve exceeded the condition-number limit"""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ConvergenceError(SolverError):
    """Root finding did not converge"""

    def __init__(self, message, last=None, iterations=0):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


class KernelRangeError(SolverError):
    """Spectral parameter too large for the precomputed kernel tail"""


class FitError(SolverError, ValueError):
    """Power-law fit cannot be formed from the supplied points"""


class ConfigError(SolverError, ValueError):
    """Invalid run configuration; carries the offending key and line"""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)
