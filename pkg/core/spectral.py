"""Spectral calculus on flat tori: derivatives, contraction, integration, Helmholtz solves."""
import logging
import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import FormDegreeError, GridError, UnsolvableError
from models.fields import SCALAR_KEY, HermitianField, MatrixFormField
from models.geometry import TorusGeometry
from utils.validators import validate_grid, validate_metric

logger = logging.getLogger(__name__)

FieldLike = Union[np.ndarray, MatrixFormField, HermitianField]


def build_torus(n: int, periods: Union[float, Sequence[float]] = 1.0,
                grid: Union[int, Sequence[int]] = 16, metric: Optional[np.ndarray] = None,
                dealias: bool = True) -> TorusGeometry:
    """
    Build a flat complex torus with precomputed spectral tables.

    Args:
        n: Complex dimension, 1 or 2
        periods: Period per complex coordinate (scalar is broadcast)
        grid: Even grid size per complex coordinate, at least 8
        metric: Constant positive definite Hermitian n×n matrix (identity by default)
        dealias: Oversample products by 3/2

    Returns:
        TorusGeometry

    Raises:
        GridError: On invalid dimension, grid or metric
    """
    if n not in (1, 2):
        raise GridError(f"complex dimension must be 1 or 2, got {n}")
    periods = tuple(float(L) for L in np.broadcast_to(np.asarray(periods, dtype=float), (n,)))
    grid = tuple(int(N) for N in np.broadcast_to(np.asarray(grid), (n,)))
    metric = np.eye(n, dtype=complex) if metric is None else np.asarray(metric, dtype=complex)

    ok, msg = validate_grid(grid, periods)
    if not ok:
        raise GridError(msg)
    ok, msg = validate_metric(metric, n)
    if not ok:
        raise GridError(msg)

    geometry = TorusGeometry(n=n, periods=periods, grid=grid, metric=metric, dealias=dealias)
    logger.debug("built torus n=%d grid=%s volume=%.6g", n, grid, geometry.volume)
    return geometry


# ----------------------------------------------------------------------------
# transforms

def _grid_ndim(geometry: TorusGeometry) -> int:
    return len(geometry.shape)


def forward(values: np.ndarray, geometry: TorusGeometry) -> np.ndarray:
    """Fourier coefficients (normalised so that the zero mode is the mean)."""
    return np.fft.fftn(values, axes=geometry.axes, norm='forward')


def backward(coeffs: np.ndarray, geometry: TorusGeometry) -> np.ndarray:
    """Grid values from Fourier coefficients."""
    return np.fft.ifftn(coeffs, axes=geometry.axes, norm='forward')


def _expand(symbol: np.ndarray, values: np.ndarray, geometry: TorusGeometry) -> np.ndarray:
    extra = values.ndim - _grid_ndim(geometry)
    return symbol.reshape(symbol.shape + (1,) * extra)


def apply_symbol(values: np.ndarray, symbol: np.ndarray, geometry: TorusGeometry) -> np.ndarray:
    """Apply a Fourier multiplier over the grid axes of ``values``."""
    return backward(_expand(symbol, values, geometry) * forward(values, geometry), geometry)


def _spectral_map(old: Tuple[int, ...], new: Tuple[int, ...]):
    """Index arrays placing the shared modes of two grid sizes, Nyquist dropped."""
    src, dst = [], []
    for N, M in zip(old, new):
        half = min(N, M) // 2
        pos = np.arange(0, half)
        neg = np.arange(1, half)
        src.append(np.concatenate([pos, N - neg]))
        dst.append(np.concatenate([pos, M - neg]))
    return np.ix_(*src), np.ix_(*dst)


def _transfer(values: np.ndarray, geometry: TorusGeometry, new_shape: Tuple[int, ...]) -> np.ndarray:
    coeffs = forward(values, geometry)
    old_shape = values.shape[:_grid_ndim(geometry)]
    src, dst = _spectral_map(old_shape, new_shape)
    out = np.zeros(new_shape + values.shape[_grid_ndim(geometry):], dtype=complex)
    out[dst + (Ellipsis,)] = coeffs[src + (Ellipsis,)]
    return np.fft.ifftn(out, axes=geometry.axes, norm='forward')


def to_fine(values: np.ndarray, geometry: TorusGeometry) -> np.ndarray:
    """Interpolate grid values onto the dealiasing grid."""
    if not geometry.dealias:
        return values
    return _transfer(values, geometry, geometry.fine_shape)


def to_coarse(values: np.ndarray, geometry: TorusGeometry) -> np.ndarray:
    """Truncate values on the dealiasing grid back to the base grid."""
    if not geometry.dealias:
        return values
    coeffs = np.fft.fftn(values, axes=geometry.axes, norm='forward')
    src, dst = _spectral_map(geometry.fine_shape, geometry.shape)
    out = np.zeros(geometry.shape + values.shape[_grid_ndim(geometry):], dtype=complex)
    out[dst + (Ellipsis,)] = coeffs[src + (Ellipsis,)]
    return backward(out, geometry)


def resample(values: np.ndarray, geometry: TorusGeometry, target: TorusGeometry) -> np.ndarray:
    """
    Spectrally interpolate or truncate grid data onto another resolution.

    Args:
        values: Array on ``geometry``'s grid (trailing matrix axes allowed)
        geometry: Source torus
        target: Torus with the same periods and a different grid

    Returns:
        Values on ``target``'s grid
    """
    if target.n != geometry.n or not np.allclose(target.periods, geometry.periods):
        raise GridError("resampling needs tori with equal dimension and periods")
    return _transfer(values, geometry, target.shape)


def resample_form(form: MatrixFormField, target: TorusGeometry) -> MatrixFormField:
    """Resample every coefficient of a form onto ``target``."""
    comps = {k: resample(v, form.geometry, target) for k, v in form.components.items()}
    return MatrixFormField(target, comps, form.matrix_shape)


# ----------------------------------------------------------------------------
# exterior calculus

def _insert(index: Tuple[int, ...], alpha: int) -> Tuple[int, Optional[Tuple[int, ...]]]:
    """Sign and sorted index of dz^α ∧ dz^I."""
    if alpha in index:
        return 0, None
    position = sum(1 for i in index if i < alpha)
    return (-1) ** position, tuple(sorted(index + (alpha,)))


def spectral_d(field: MatrixFormField, kind: Tuple[int, int]) -> MatrixFormField:
    """
    Exterior ∂ (kind (1,0)) or ∂̄ (kind (0,1)) of a matrix form.

    Derivatives are exact Fourier multipliers; the Nyquist mode is zeroed.
    Components that would exceed the top degree vanish, and the result carries
    a ``degree_overflow`` flag when every input component overflowed.

    Args:
        field: Form to differentiate
        kind: (1, 0) or (0, 1)

    Returns:
        MatrixFormField of one higher degree
    """
    geometry = field.geometry
    if tuple(kind) == (1, 0):
        symbols, holomorphic = geometry.holo_symbols, True
    elif tuple(kind) == (0, 1):
        symbols, holomorphic = geometry.antiholo_symbols, False
    else:
        raise FormDegreeError(f"derivative type must be (1,0) or (0,1), got {kind}")

    out = MatrixFormField(geometry, {}, field.matrix_shape)
    overflowed = bool(field.components)
    for (I, J), values in field.components.items():
        coeffs = forward(values, geometry)
        for alpha in range(geometry.n):
            if holomorphic:
                sign, new_I = _insert(I, alpha)
                key = (new_I, J)
            else:
                sign, new_J = _insert(J, alpha)
                sign *= (-1) ** len(I)
                key = (I, new_J)
            if sign == 0:
                continue
            overflowed = False
            deriv = backward(_expand(symbols[alpha], values, geometry) * coeffs, geometry)
            if key in out.components:
                out.components[key] = out.components[key] + sign * deriv
            else:
                out.components[key] = sign * deriv
    if overflowed:
        out.flags['degree_overflow'] = True
    return out


def exterior_d(field: MatrixFormField) -> MatrixFormField:
    """Full exterior derivative d = ∂ + ∂̄."""
    return spectral_d(field, (1, 0)) + spectral_d(field, (0, 1))


def lambda_contract(field: MatrixFormField) -> MatrixFormField:
    """
    Contraction Λ_ω of a (1,1) form: Λ(dz^α ∧ dz̄^β) = −2√-1 g^{βα}.

    Raises:
        FormDegreeError: If the field has components other than (1,1)
    """
    geometry = field.geometry
    extra = field.bidegrees - {(1, 1)}
    if extra:
        raise FormDegreeError(f"contraction needs a (1,1) form, got types {sorted(extra)}")
    ginv = geometry.metric_inverse
    total = np.zeros(geometry.shape + field.matrix_shape, dtype=complex)
    for ((alpha,), (beta,)), values in field.components.items():
        total = total + (-2j * ginv[beta, alpha]) * values
    return MatrixFormField(geometry, {SCALAR_KEY: total}, field.matrix_shape)


def _fsum_mean(values: np.ndarray) -> complex:
    flat = np.ravel(values)
    return complex(math.fsum(np.real(flat)), math.fsum(np.imag(flat))) / flat.size


def integrate(field: Union[MatrixFormField, np.ndarray], geometry: Optional[TorusGeometry] = None) -> complex:
    """
    Integrate a scalar function against ω^n/n!, or a top-degree scalar form.

    Args:
        field: Rank-1 (0,0) or (n,n) form, or a plain grid array
        geometry: Required when ``field`` is a plain array

    Returns:
        Integral as a complex number (compensated summation)
    """
    if isinstance(field, np.ndarray):
        if geometry is None:
            raise GridError("integrating a plain array needs its geometry")
        values = field.reshape(geometry.shape) if field.size == geometry.points else field
        return _fsum_mean(values) * geometry.volume

    geometry = field.geometry
    if field.matrix_shape != (1, 1):
        raise FormDegreeError("only scalar (rank-1) forms can be integrated")
    n = geometry.n
    top = (tuple(range(n)), tuple(range(n)))
    degrees = field.bidegrees
    if not degrees:
        return 0j
    if degrees == {(0, 0)}:
        return _fsum_mean(field.values[..., 0, 0]) * geometry.volume
    if degrees == {(n, n)}:
        area = float(np.prod([L * L for L in geometry.periods]))
        factor = (-2j) ** n * (-1) ** (n * (n - 1) // 2)
        return factor * _fsum_mean(field.coefficient(top)[..., 0, 0]) * area
    raise FormDegreeError(f"integration needs a (0,0) or ({n},{n}) form, got {sorted(degrees)}")


def mean_value(values: np.ndarray) -> complex:
    """Deterministic grid mean of a scalar array."""
    return _fsum_mean(values)


# ----------------------------------------------------------------------------
# elliptic solves

def _unwrap(rhs: FieldLike):
    if isinstance(rhs, HermitianField):
        return rhs.values, lambda v: HermitianField(rhs.geometry, v, rhs.role, rhs.reference), rhs.geometry
    if isinstance(rhs, MatrixFormField):
        if rhs.bidegrees - {(0, 0)}:
            raise FormDegreeError("Helmholtz solve acts on (0,0) fields")
        return rhs.values, lambda v: MatrixFormField.scalar(rhs.geometry, v), rhs.geometry
    return rhs, None, None


def helmholtz_solve(rhs: FieldLike, mass: float, geometry: Optional[TorusGeometry] = None,
                    mean_tol: float = 1e-10) -> FieldLike:
    """
    Solve (√-1Λ_ω∂∂̄ − ε)u = rhs componentwise.

    Modes where the symbol vanishes are set to zero. With zero mass the
    right-hand side must have zero mean.

    Args:
        rhs: Scalar grid, matrix grid, HermitianField or (0,0) form
        mass: ε ≥ 0
        geometry: Needed for plain arrays
        mean_tol: Relative tolerance of the zero-mean check

    Returns:
        Solution of the same kind as ``rhs``

    Raises:
        UnsolvableError: Zero mass with non-zero mean right-hand side
    """
    values, wrap, geo = _unwrap(rhs)
    geometry = geo or geometry
    if geometry is None:
        raise GridError("Helmholtz solve of a plain array needs its geometry")
    if mass < 0:
        raise ValueError(f"mass must be non-negative, got {mass}")

    coeffs = forward(values, geometry)
    if mass == 0.0:
        zero_mode = coeffs[(0,) * _grid_ndim(geometry)]
        scale = 1.0 + float(np.max(np.abs(values)))
        worst = np.max(np.abs(zero_mode))
        if worst > mean_tol * scale:
            raise UnsolvableError(complex(np.ravel(zero_mode)[np.argmax(np.abs(np.ravel(zero_mode)))]))

    symbol = geometry.complex_laplace_symbol - mass
    safe = np.where(symbol == 0.0, 1.0, symbol)
    inverse = np.where(symbol == 0.0, 0.0, 1.0 / safe)
    solution = backward(_expand(inverse, values, geometry) * coeffs, geometry)
    if np.isrealobj(values):
        solution = np.real(solution)
    return wrap(solution) if wrap else solution


def helmholtz_apply(values: np.ndarray, mass: float, geometry: TorusGeometry) -> np.ndarray:
    """Forward operator (√-1Λ_ω∂∂̄ − ε) applied componentwise."""
    result = apply_symbol(values, geometry.complex_laplace_symbol - mass, geometry)
    return np.real(result) if np.isrealobj(values) else result


def complex_laplacian(values: np.ndarray, geometry: TorusGeometry) -> np.ndarray:
    """√-1Λ_ω∂∂̄ applied componentwise (spectral multiplier)."""
    return helmholtz_apply(values, 0.0, geometry)


def laplacian(values: np.ndarray, geometry: TorusGeometry) -> np.ndarray:
    """Flat Laplacian Σ(∂²_x + ∂²_y) using the full wavenumbers."""
    result = apply_symbol(values, geometry.laplace_symbol, geometry)
    return np.real(result) if np.isrealobj(values) else result


def heat_phi1(values: np.ndarray, dt: float, geometry: TorusGeometry) -> np.ndarray:
    """
    Apply φ₁(dt·Δ) = (e^{dtΔ} − 1)/(dtΔ) componentwise, with Δ = 2√-1Λ∂∂̄.

    φ₁(0) = 1 on the zero mode.
    """
    z = 2.0 * dt * geometry.complex_laplace_symbol
    small = np.abs(z) < 1e-12
    safe = np.where(small, 1.0, z)
    phi = np.where(small, 1.0 + 0.5 * z, np.expm1(safe) / safe)
    result = apply_symbol(values, phi, geometry)
    return np.real(result) if np.isrealobj(values) else result


def heat_propagate(values: np.ndarray, t: float, geometry: TorusGeometry) -> np.ndarray:
    """Exact heat semigroup e^{tΔ} with Δ = 2√-1Λ∂∂̄."""
    result = apply_symbol(values, np.exp(2.0 * t * geometry.complex_laplace_symbol), geometry)
    return np.real(result) if np.isrealobj(values) else result


# ----------------------------------------------------------------------------
# reproducible data

def random_smooth(geometry: TorusGeometry, rng: np.random.Generator, bandlimit: int = 1,
                  amplitude: float = 0.1, matrix_shape: Tuple[int, ...] = (),
                  hermitian: bool = False, real: bool = False) -> np.ndarray:
    """
    Band-limited random field with sup norm at most ``amplitude`` per entry.

    Args:
        geometry: Torus
        rng: Seeded generator
        bandlimit: Largest integer mode per real direction
        amplitude: Bound on the entry modulus
        matrix_shape: Trailing shape, () for scalars
        hermitian: Symmetrise to Hermitian matrices
        real: Return a real scalar field

    Returns:
        Array of shape grid + matrix_shape
    """
    dims = 2 * geometry.n
    modes = np.arange(-bandlimit, bandlimit + 1)
    grids = np.meshgrid(*([modes] * dims), indexing='ij')
    wavevectors = np.stack([g.ravel() for g in grids], axis=-1)
    count = len(wavevectors)
    entries = int(np.prod(matrix_shape)) if matrix_shape else 1
    coeffs = rng.normal(size=(count, entries)) + 1j * rng.normal(size=(count, entries))
    coeffs *= amplitude / np.sum(np.abs(coeffs), axis=0, keepdims=True)

    coords = geometry.coordinates()
    values = np.zeros(geometry.shape + (entries,), dtype=complex)
    for m, c in zip(wavevectors, coeffs):
        phase = np.zeros(geometry.shape)
        for axis in range(dims):
            L = geometry.periods[axis // 2]
            phase = phase + 2.0 * np.pi * m[axis] * coords[axis] / L
        values += np.exp(1j * phase)[..., None] * c
    values = values.reshape(geometry.shape + tuple(matrix_shape))
    if real:
        return np.real(values)
    if hermitian:
        values = 0.5 * (values + np.conj(np.swapaxes(values, -1, -2)))
    return values
