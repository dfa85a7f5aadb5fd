from typing import Optional


class CpgError(Exception):
    """Base class for all errors raised by the cPG toolkit."""


class ConfigError(CpgError, ValueError):
    """Invalid solver or experiment configuration."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"field '{field}': "
        super().__init__(prefix + message)


class ConfigMismatchError(ConfigError):
    """A solution is analysed with a config other than the one it was produced with."""


class DomainError(CpgError):
    """A system callable failed or returned non-finite values."""

    def __init__(self, message: str, t: Optional[float] = None):
        self.t = t
        if t is not None:
            message = f"{message} (at t={t!r})"
        super().__init__(message)


class SingularJacobianError(CpgError):
    """The Newton Jacobian could not be factorized."""


class NonConvergenceError(CpgError):
    """Newton iteration exhausted its budget.

    Attributes:
        d: best iterate (derivative coefficients, shape (dim, k))
        residual_norm: sup-norm of the residual at ``d``
        iterations: iterations spent
        step_index: index of the failing step, set by ``solver.integrate``
        partial: trajectory up to the failing step, set by ``solver.integrate``
    """

    def __init__(self, message: str, d=None, residual_norm: float = float("nan"),
                 iterations: int = 0):
        super().__init__(message)
        self.d = d
        self.residual_norm = residual_norm
        self.iterations = iterations
        self.step_index: Optional[int] = None
        self.partial = None
