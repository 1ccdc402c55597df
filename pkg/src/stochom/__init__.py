"""stochom: random microstructures, corrector problems, effective tensors,
and the coupled bulk/surface limit system on periodic windows."""

__version__ = "0.1.0"

from . import cellproblem, ergodic, fields, geometry, io, reactionsim, stokescell
from .errors import (
    ConfigError,
    ContractError,
    ParameterError,
    PercolationError,
    SolverError,
    StochomError,
)

__all__ = [
    "cellproblem",
    "ergodic",
    "fields",
    "geometry",
    "io",
    "reactionsim",
    "stokescell",
    "ConfigError",
    "ContractError",
    "ParameterError",
    "PercolationError",
    "SolverError",
    "StochomError",
    "__version__",
]
