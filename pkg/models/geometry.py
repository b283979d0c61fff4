"""Flat complex torus with spectral tables."""
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np


@dataclass(frozen=True, eq=False)
class TorusGeometry:
    """
    Flat complex torus C^n / lattice with a uniform periodic grid.

    Real grid axes are ordered (x1, y1) for n = 1 and (x1, y1, x2, y2) for n = 2.
    The x and y directions of a complex coordinate share its period and grid size.

    Attributes:
        n: Complex dimension (1 or 2)
        periods: Period L_α per complex coordinate
        grid: Points N_α per real direction of coordinate α
        metric: Constant Hermitian matrix g_{αβ̄} defining ω
        dealias: Form products on a 3/2 oversampled grid
    """

    n: int
    periods: Tuple[float, ...]
    grid: Tuple[int, ...]
    metric: np.ndarray
    dealias: bool = True

    shape: Tuple[int, ...] = field(init=False, repr=False)
    metric_inverse: np.ndarray = field(init=False, repr=False)
    volume: float = field(init=False, repr=False)
    holo_symbols: Tuple[np.ndarray, ...] = field(init=False, repr=False)
    antiholo_symbols: Tuple[np.ndarray, ...] = field(init=False, repr=False)
    complex_laplace_symbol: np.ndarray = field(init=False, repr=False)
    laplace_symbol: np.ndarray = field(init=False, repr=False)
    fine_shape: Tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        shape = tuple(N for N in self.grid for _ in range(2))
        object.__setattr__(self, 'shape', shape)
        metric = np.asarray(self.metric, dtype=complex)
        object.__setattr__(self, 'metric', metric)
        object.__setattr__(self, 'metric_inverse', np.linalg.inv(metric))
        det_g = float(np.real(np.linalg.det(metric)))
        area = float(np.prod([L * L for L in self.periods]))
        object.__setattr__(self, 'volume', det_g * area)

        dims = 2 * self.n
        full = []
        trimmed = []
        for axis in range(dims):
            N = self.grid[axis // 2]
            L = self.periods[axis // 2]
            k = 2.0 * np.pi * np.fft.fftfreq(N, L / N)
            kd = k.copy()
            kd[N // 2] = 0.0  # Nyquist mode carries no first derivative
            reshape = [1] * dims
            reshape[axis] = N
            full.append(k.reshape(reshape))
            trimmed.append(kd.reshape(reshape))

        holo = []
        antiholo = []
        for alpha in range(self.n):
            kx, ky = trimmed[2 * alpha], trimmed[2 * alpha + 1]
            holo.append(0.5 * (1j * kx + ky))
            antiholo.append(0.5 * (1j * kx - ky))
        object.__setattr__(self, 'holo_symbols', tuple(holo))
        object.__setattr__(self, 'antiholo_symbols', tuple(antiholo))

        # symbol of √-1Λ∂∂̄ = 2 Σ g^{βα} ∂_α ∂_β̄
        sym = np.zeros(shape, dtype=complex)
        for alpha in range(self.n):
            for beta in range(self.n):
                sym = sym + 2.0 * self.metric_inverse[beta, alpha] * holo[alpha] * antiholo[beta]
        object.__setattr__(self, 'complex_laplace_symbol', np.real(sym))

        lap = np.zeros(shape)
        for k in full:
            lap = lap - k ** 2
        object.__setattr__(self, 'laplace_symbol', lap)
        object.__setattr__(self, 'fine_shape', tuple(3 * N // 2 for N in shape))

    @property
    def axes(self) -> Tuple[int, ...]:
        """Real grid axes of a field array."""
        return tuple(range(2 * self.n))

    @property
    def points(self) -> int:
        """Total number of grid points."""
        return int(np.prod(self.shape))

    @property
    def det_metric(self) -> float:
        """Determinant of the metric coefficients."""
        return float(np.real(np.linalg.det(self.metric)))

    def spacing(self) -> float:
        """Smallest grid spacing."""
        return min(L / N for L, N in zip(self.periods, self.grid))

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """
        Broadcastable coordinate arrays for every real axis.

        Returns:
            Tuple of arrays (x1, y1[, x2, y2]) each of full grid shape
        """
        axes = []
        for axis in range(2 * self.n):
            N = self.grid[axis // 2]
            L = self.periods[axis // 2]
            axes.append(np.arange(N) * (L / N))
        return tuple(np.meshgrid(*axes, indexing='ij'))

    def compatible(self, other: 'TorusGeometry') -> bool:
        """Check that two geometries describe the same discretised torus."""
        if other is self:
            return True
        return (self.n == other.n and tuple(self.grid) == tuple(other.grid)
                and np.allclose(self.periods, other.periods)
                and np.allclose(self.metric, other.metric))

    def to_dict(self) -> dict:
        """Convert to dictionary for serialization."""
        return {
            'n': self.n,
            'periods': [float(L) for L in self.periods],
            'grid': [int(N) for N in self.grid],
            'metric_real': np.real(self.metric).tolist(),
            'metric_imag': np.imag(self.metric).tolist(),
            'dealias': self.dealias,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'TorusGeometry':
        """Create from dictionary."""
        metric = np.array(data['metric_real']) + 1j * np.array(data['metric_imag'])
        return cls(
            n=int(data['n']),
            periods=tuple(float(L) for L in data['periods']),
            grid=tuple(int(N) for N in data['grid']),
            metric=metric,
            dealias=bool(data.get('dealias', True)),
        )
