"""Exception hierarchy shared by all modules."""


class StochomError(Exception):
    """Base class for package errors."""


class ParameterError(StochomError, ValueError):
    """Invalid physical or numerical parameter."""


class ContractError(StochomError, ValueError):
    """Incompatible inputs (grid mismatch, wrong phase layout, ...)."""


class ConfigError(StochomError, ValueError):
    """Malformed run configuration (CLI layer)."""


class PercolationError(StochomError, RuntimeError):
    """Active/fluid phase does not percolate; effective tensor degenerate."""


class SolverError(StochomError, RuntimeError):
    """Iterative solver failed to reach the requested residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual
