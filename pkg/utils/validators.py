"""Input validation utilities."""
from pathlib import Path
from typing import Sequence, Tuple

import numpy as np


def validate_grid(grid: Sequence[int], periods: Sequence[float]) -> Tuple[bool, str]:
    """
    Validate grid sizes and periods of a torus.

    Args:
        grid: Points per real direction of every complex coordinate
        periods: Period per complex coordinate

    Returns:
        Tuple of (is_valid, error_message)
    """
    if len(grid) != len(periods):
        return False, "grid and periods must have one entry per complex coordinate"
    for N in grid:
        if int(N) != N or N < 8:
            return False, f"grid size {N} must be an integer of at least 8"
        if N % 2 != 0:
            return False, f"grid size {N} must be even"
    for L in periods:
        if not np.isfinite(L) or L <= 0:
            return False, f"period {L} must be positive"
    return True, ""


def validate_metric(metric: np.ndarray, n: int) -> Tuple[bool, str]:
    """
    Validate the constant Kähler metric coefficients.

    Args:
        metric: Candidate n×n matrix g_{αβ̄}
        n: Complex dimension

    Returns:
        Tuple of (is_valid, error_message)
    """
    metric = np.asarray(metric, dtype=complex)
    if metric.shape != (n, n):
        return False, f"metric must be {n}x{n}, got shape {metric.shape}"
    if not np.allclose(metric, metric.conj().T, atol=1e-12):
        return False, "metric must be Hermitian"
    if np.min(np.linalg.eigvalsh(metric)) <= 0:
        return False, "metric must be positive definite"
    return True, ""


def validate_schedule(schedule: Sequence[float]) -> Tuple[bool, str]:
    """
    Validate an ε-continuation schedule.

    Returns:
        Tuple of (is_valid, error_message)
    """
    if len(schedule) == 0:
        return False, "schedule must not be empty"
    for eps in schedule:
        if not 0.0 < eps <= 1.0:
            return False, f"schedule value {eps} outside (0, 1]"
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        return False, "schedule must be strictly decreasing"
    return True, ""


def validate_time_step(dt: float, spacing: float, cfl: float) -> bool:
    """
    Check the explicit heat-flow stability limit dt ≤ CFL·Δx².

    Args:
        dt: Time step
        spacing: Smallest grid spacing Δx
        cfl: CFL constant

    Returns:
        True if within the limit
    """
    return 0.0 < dt <= cfl * spacing ** 2


def validate_rank(rank: int) -> bool:
    """
    Validate a bundle rank.

    Returns:
        True if rank is a positive integer
    """
    return isinstance(rank, (int, np.integer)) and rank >= 1


def validate_file_path(file_path: Path, must_exist: bool = True) -> bool:
    """
    Validate file path.

    Args:
        file_path: Path to validate
        must_exist: If True, file must exist

    Returns:
        True if valid
    """
    if not file_path:
        return False

    try:
        path = Path(file_path)

        if must_exist:
            return path.exists() and path.is_file()
        else:
            # Check if parent directory exists
            return path.parent.exists()

    except Exception:
        return False
