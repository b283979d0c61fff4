"""Utility functions package."""
from .validators import (validate_grid, validate_metric, validate_schedule,
                         validate_time_step, validate_rank, validate_file_path)

__all__ = [
    'validate_grid', 'validate_metric', 'validate_schedule',
    'validate_time_step', 'validate_rank', 'validate_file_path',
]
