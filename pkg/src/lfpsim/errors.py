"""Exception hierarchy. CLI exit codes hang off these classes."""


class LfpsimError(Exception):
    exit_code = 1


class ConfigError(LfpsimError, ValueError):
    exit_code = 2


class DomainError(LfpsimError, ValueError):
    """A pointwise function was evaluated outside its domain."""

    exit_code = 4


class SolverError(LfpsimError, RuntimeError):
    """Nonlinear solve did not converge; carries the last residual norm."""

    exit_code = 3

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularJacobianError(SolverError):
    pass


class NumericError(LfpsimError, FloatingPointError):
    exit_code = 4
