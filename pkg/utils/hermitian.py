"""Pointwise Hermitian matrix functional calculus on grids of matrices."""
from typing import Callable, Tuple

import numpy as np


def dagger(values: np.ndarray) -> np.ndarray:
    """Conjugate transpose of the trailing two axes."""
    return np.conj(np.swapaxes(values, -1, -2))


def hermitian_part(values: np.ndarray) -> np.ndarray:
    """Return (M + M^†)/2 for every matrix in the grid."""
    return 0.5 * (values + dagger(values))


def eigh(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Batched eigendecomposition of Hermitian matrices.

    Args:
        values: Array of shape grid + (r, r), Hermitian in the last two axes

    Returns:
        Tuple of (eigenvalues grid + (r,), eigenvectors grid + (r, r))
    """
    w, v = np.linalg.eigh(hermitian_part(values))
    return w, v


def apply_function(values: np.ndarray, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """
    Apply a scalar function to Hermitian matrices through their spectra.

    Args:
        values: Hermitian matrices, shape grid + (r, r)
        fn: Vectorized function applied to the eigenvalues

    Returns:
        U fn(Λ) U^† for every grid point
    """
    w, v = eigh(values)
    fw = fn(w)
    return np.einsum('...ij,...j,...kj->...ik', v, fw, np.conj(v))


def expm_h(values: np.ndarray) -> np.ndarray:
    """Matrix exponential of Hermitian matrices."""
    return apply_function(values, np.exp)


def logm_h(values: np.ndarray) -> np.ndarray:
    """
    Principal logarithm of positive definite Hermitian matrices.

    Raises:
        ValueError: If a non-positive eigenvalue is found
    """
    w, v = eigh(values)
    if np.any(w <= 0.0):
        raise ValueError(f"logarithm of non-positive matrix (min eigenvalue {w.min():.3e})")
    return np.einsum('...ij,...j,...kj->...ik', v, np.log(w), np.conj(v))


def sqrtm_h(values: np.ndarray) -> np.ndarray:
    """Positive square root of positive semidefinite Hermitian matrices."""
    return apply_function(values, lambda w: np.sqrt(np.clip(w, 0.0, None)))


def inv_sqrtm_h(values: np.ndarray) -> np.ndarray:
    """Inverse positive square root of positive definite Hermitian matrices."""
    return apply_function(values, lambda w: 1.0 / np.sqrt(w))


def condition_number(values: np.ndarray) -> float:
    """Largest spectral condition number over the grid."""
    w, _ = eigh(values)
    lo = np.min(np.abs(w), axis=-1)
    hi = np.max(np.abs(w), axis=-1)
    with np.errstate(divide='ignore'):
        cond = np.where(lo > 0, hi / np.where(lo > 0, lo, 1.0), np.inf)
    return float(np.max(cond))


def theta_weights(eigenvalues: np.ndarray) -> np.ndarray:
    """
    Divided-difference weights of the exponential on eigenvalue pairs.

    Entry (a, b) is (e^{λa − λb} − 1)/(λa − λb), continued by 1 on the diagonal
    and whenever the two eigenvalues coincide.

    Args:
        eigenvalues: Array grid + (r,)

    Returns:
        Array grid + (r, r)
    """
    diff = eigenvalues[..., :, None] - eigenvalues[..., None, :]
    small = np.abs(diff) < 1e-8
    safe = np.where(small, 1.0, diff)
    # expm1(x)/x ≈ 1 + x/2 near zero
    return np.where(small, 1.0 + 0.5 * diff, np.expm1(safe) / safe)
