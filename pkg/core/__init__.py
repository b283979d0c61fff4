"""Numerical core package."""
from .errors import (LabError, GridError, FormDegreeError, RankMismatchError, ConfigError, CheckpointError,
                     UnsolvableError, PreconditionError, ConvergenceError, CancelledError)

__all__ = ['LabError', 'GridError', 'FormDegreeError', 'RankMismatchError', 'ConfigError', 'CheckpointError',
           'UnsolvableError', 'PreconditionError', 'ConvergenceError', 'CancelledError']
