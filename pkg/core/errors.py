"""Error types raised by the numerical lab."""
from typing import Any, Dict, List, Optional


class LabError(Exception):
    """Base class for all errors raised by the lab."""
    exit_code = 1


class GridError(LabError):
    """Invalid torus geometry or discretisation."""
    exit_code = 3


class FormDegreeError(LabError):
    """Form of the wrong bidegree passed to an operation."""
    exit_code = 3


class RankMismatchError(LabError):
    """Matrix ranks of the operands do not agree."""
    exit_code = 3


class ConfigError(LabError):
    """Invalid run configuration."""
    exit_code = 3

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


class CheckpointError(LabError):
    """Corrupt or incompatible checkpoint file."""
    exit_code = 3


class UnsolvableError(LabError):
    """
    A zero-mass Helmholtz problem whose right-hand side has non-zero mean.

    Attributes:
        mean: Offending mean of the right-hand side
    """
    exit_code = 3

    def __init__(self, mean: complex):
        super().__init__(f"rhs has non-zero mean {mean:.3e} with zero mass")
        self.mean = mean


class PreconditionError(LabError):
    """
    Input data do not satisfy the structure equations within tolerance.

    Attributes:
        residuals: Mapping from residual name to measured sup norm
    """
    exit_code = 3

    def __init__(self, message: str, residuals: Optional[Dict[str, float]] = None):
        super().__init__(message)
        self.residuals = residuals or {}


class ConvergenceError(LabError):
    """
    An iterative solver failed to reach tolerance.

    Attributes:
        residual_history: Sup-norm residual after each iteration
        diagnostics: Solver diagnostics at the point of failure
        partial: Best iterate found, if any
    """
    exit_code = 2

    def __init__(self, message: str, residual_history: Optional[List[float]] = None,
                 diagnostics: Optional[Dict[str, Any]] = None, partial: Any = None):
        super().__init__(message)
        self.residual_history = residual_history or []
        self.diagnostics = diagnostics or {}
        self.partial = partial


class CancelledError(LabError):
    """A queued run was stopped before it finished."""
    exit_code = 1
