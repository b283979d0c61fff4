"""Named initial data for Higgs and projectively flat bundles."""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Union

import numpy as np

from core.errors import ConfigError, PreconditionError
from core.field_algebra import adjoint_wrt
from core.spectral import random_smooth, spectral_d
from models.bundles import HiggsBundle, ProjFlatBundle
from models.enums import ProblemKind
from models.fields import HermitianField, MatrixFormField
from models.geometry import TorusGeometry
from utils.checkpoint import load_checkpoint

logger = logging.getLogger(__name__)

PRESET_TOLERANCE = 1e-6

PRESETS = ('trivial', 'atiyah', 'constant-theta', 'random-smooth', 'gauge-flat', 'raw')

Structure = Union[HiggsBundle, ProjFlatBundle]


@dataclass(eq=False)
class PresetData:
    """
    Structure built from a preset, with an optional compatible metric.

    Attributes:
        structure: HiggsBundle or ProjFlatBundle
        metric: Metric suggested by the construction (None means identity)
        seed: Seed actually used, recorded for reproducibility
        params: Effective preset parameters
    """

    structure: Structure
    metric: Optional[HermitianField] = None
    seed: Optional[int] = None
    params: Dict[str, Any] = field(default_factory=dict)


def _constant(geometry: TorusGeometry, key, matrix) -> MatrixFormField:
    matrix = np.asarray(matrix, dtype=complex)
    return MatrixFormField.single(geometry, key, np.broadcast_to(matrix, geometry.shape + matrix.shape))


def _checked(structure: Structure, name: str) -> Structure:
    is_valid, error_msg = structure.validate()
    worst = max(structure.residuals.values(), default=0.0)
    if worst > PRESET_TOLERANCE:
        raise PreconditionError(f"preset '{name}': {error_msg}", structure.residuals)
    if not is_valid:
        logger.debug("preset '%s' residuals %s within preset tolerance", name, structure.residuals)
    return structure


def _gauge(geometry: TorusGeometry, rank: int, rng: np.random.Generator,
           bandlimit: int, amplitude: float) -> np.ndarray:
    return np.eye(rank) + random_smooth(geometry, rng, bandlimit, amplitude, (rank, rank))


def atiyah(geometry: TorusGeometry, c: complex = 1.0) -> HiggsBundle:
    """Nonsplit extension of O by O: ∂̄_E = ∂̄ + c E₁₂ dz̄¹, θ = 0."""
    E12 = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    a = _constant(geometry, ((), (0,)), c * E12) if c != 0 else MatrixFormField.zeros(geometry, 2)
    return HiggsBundle(geometry, 2, a=a)


def constant_theta(geometry: TorusGeometry, kind: ProblemKind, matrix) -> Structure:
    """θ = M dz¹ (Higgs) or Γ = M dz¹ + M^† dz̄¹ (flat, needs M normal)."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
    rank = matrix.shape[0]
    theta = _constant(geometry, ((0,), ()), matrix)
    if kind == ProblemKind.HIGGS:
        return _checked(HiggsBundle(geometry, rank, theta=theta, tolerance=None), 'constant-theta')
    return _checked(ProjFlatBundle(geometry, rank, theta + adjoint_wrt(theta), tolerance=None), 'constant-theta')


def random_smooth_higgs(geometry: TorusGeometry, rank: int, rng: np.random.Generator,
                        bandlimit: int = 1, amplitude: float = 0.1) -> HiggsBundle:
    """
    Gauge transform by g = I + R(x) of a constant Higgs field θ₀ dz¹.

    a = g∂̄(g⁻¹) and θ = gθ₀g⁻¹ dz¹, so integrability holds up to spectral accuracy.
    """
    g = _gauge(geometry, rank, rng, bandlimit, amplitude)
    g_inv = np.linalg.inv(g)
    theta0 = amplitude * (rng.normal(size=(rank, rank)) + 1j * rng.normal(size=(rank, rank)))
    a = spectral_d(MatrixFormField.scalar(geometry, g_inv), (0, 1)).left_multiply(g)
    theta = MatrixFormField.single(geometry, ((0,), ()), g @ theta0 @ g_inv)
    return _checked(HiggsBundle(geometry, rank, a, theta, tolerance=None), 'random-smooth')


def gauge_flat(geometry: TorusGeometry, kind: ProblemKind, rank: int, rng: np.random.Generator,
               bandlimit: int = 1, amplitude: float = 0.1) -> PresetData:
    """
    Gauge transform g∘(d + Γ₀)∘g⁻¹ of a constant diagonal flat connection.

    For a Higgs kind the data are the gauge transform of the trivial Higgs bundle
    and the returned metric (gg^†)⁻¹ makes it Hermitian flat.
    """
    g = _gauge(geometry, rank, rng, bandlimit, amplitude)
    g_inv = np.linalg.inv(g)
    metric = HermitianField(geometry, np.linalg.inv(g @ np.conj(np.swapaxes(g, -1, -2))))
    scalar = MatrixFormField.scalar(geometry, g_inv)
    if kind == ProblemKind.HIGGS:
        a = spectral_d(scalar, (0, 1)).left_multiply(g)
        return PresetData(_checked(HiggsBundle(geometry, rank, a, tolerance=None), 'gauge-flat'), metric)

    gamma = spectral_d(scalar, (1, 0)).left_multiply(g) + spectral_d(scalar, (0, 1)).left_multiply(g)
    for alpha in range(geometry.n):
        for key in (((alpha,), ()), ((), (alpha,))):
            diagonal = np.diag(amplitude * (rng.normal(size=rank) + 1j * rng.normal(size=rank)))
            gamma = gamma + MatrixFormField.single(geometry, key, g @ diagonal @ g_inv)
    return PresetData(_checked(ProjFlatBundle(geometry, rank, gamma, tolerance=None), 'gauge-flat'), metric)


def build_preset(geometry: TorusGeometry, kind: Union[ProblemKind, str], rank: int, name: str,
                 params: Optional[Dict[str, Any]] = None) -> PresetData:
    """
    Build the structure named by a bundle block.

    Args:
        geometry: Torus
        kind: 'higgs' or 'projflat'
        rank: Rank r
        name: One of PRESETS
        params: Preset parameters (c, matrix, seed, bandlimit, amplitude, path)

    Returns:
        PresetData

    Raises:
        ConfigError: Unknown preset or parameters that do not fit the kind
    """
    kind = ProblemKind(kind)
    params = dict(params or {})

    if name == 'trivial':
        structure = HiggsBundle(geometry, rank) if kind == ProblemKind.HIGGS else ProjFlatBundle(geometry, rank)
        return PresetData(structure, params=params)

    if name == 'atiyah':
        if kind != ProblemKind.HIGGS or rank != 2:
            raise ConfigError("atiyah preset needs a rank-2 Higgs bundle", 'bundle.preset')
        c = complex(params.setdefault('c', 1.0))
        return PresetData(atiyah(geometry, c), params=params)

    if name == 'constant-theta':
        if 'matrix' not in params:
            raise ConfigError("constant-theta needs a 'matrix' parameter", 'bundle.params.matrix')
        structure = constant_theta(geometry, kind, params['matrix'])
        if structure.rank != rank:
            raise ConfigError(f"matrix has rank {structure.rank}, bundle rank is {rank}", 'bundle.params.matrix')
        return PresetData(structure, params=params)

    if name in ('random-smooth', 'gauge-flat'):
        seed = int(params.setdefault('seed', 0))
        bandlimit = int(params.setdefault('bandlimit', 1))
        amplitude = float(params.setdefault('amplitude', 0.1))
        rng = np.random.default_rng(seed)
        if name == 'random-smooth' and kind == ProblemKind.HIGGS:
            data = PresetData(random_smooth_higgs(geometry, rank, rng, bandlimit, amplitude))
        else:
            data = gauge_flat(geometry, kind, rank, rng, bandlimit, amplitude)
        data.seed, data.params = seed, params
        return data

    if name == 'raw':
        if 'path' not in params:
            raise ConfigError("raw preset needs a checkpoint 'path'", 'bundle.params.path')
        checkpoint = load_checkpoint(params['path'], geometry)
        fields = checkpoint.fields
        if kind == ProblemKind.HIGGS:
            structure = HiggsBundle(geometry, checkpoint.rank, fields.get('a'), fields.get('theta'),
                                    tolerance=None)
        else:
            structure = ProjFlatBundle(geometry, checkpoint.rank, fields.get('gamma'), tolerance=None)
        return PresetData(_checked(structure, 'raw'), fields.get('metric'), params=params)

    raise ConfigError(f"unknown preset '{name}', expected one of {', '.join(PRESETS)}", 'bundle.preset')


__all__ = ['PRESETS', 'PresetData', 'atiyah', 'constant_theta', 'random_smooth_higgs', 'gauge_flat',
           'build_preset']
