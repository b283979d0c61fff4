"""Result records of the solvers and evaluators, serializable to JSON."""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from models.enums import Regime, Verdict
from models.fields import HermitianField, MatrixFormField
from models.flow_state import EpsilonPath


def plain(value: Any) -> Any:
    """Convert numpy scalars, complex numbers and containers to JSON-friendly values."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return {'re': float(np.real(value)), 'im': float(np.imag(value))}
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if hasattr(value, 'value') and isinstance(getattr(value, 'value'), str):
        return value.value
    return value


@dataclass(eq=False)
class HarmonicResult:
    """
    Outcome of a harmonic or Hermitian-Einstein metric search.

    Attributes:
        metric: Final metric (last continuation solution when not converged)
        path: Continuation path leading to it
        converged: Whether the polished metric meets the tolerance
        residual: Sup norm of the trace-free equation at the final metric
        curvature_sup: sup|G_H^⊥| (flat case) or sup|F^⊥_{H,θ}| (Higgs case)
        message: Human-readable summary
    """

    metric: Optional[HermitianField]
    path: Optional[EpsilonPath] = None
    converged: bool = False
    residual: float = float('inf')
    curvature_sup: float = float('inf')
    message: str = ''

    @property
    def growth(self) -> List[float]:
        """‖log h_ε‖_{L²} along the continuation."""
        return self.path.series('log_l2') if self.path else []

    def to_dict(self) -> Dict[str, Any]:
        return plain({
            'converged': self.converged,
            'residual': self.residual,
            'curvature_sup': self.curvature_sup,
            'message': self.message,
            'epsilons': self.path.epsilons if self.path else [],
            'growth': self.growth,
        })


@dataclass(eq=False)
class CharacteristicReport:
    """
    Chern-Weil numbers of a Higgs bundle with metric.

    Attributes:
        rank: Rank r
        n: Complex dimension
        degree: deg_ω from the contraction path
        degree_wedge: deg_ω from the wedge-with-ω path
        slope: μ_ω = deg_ω / r
        ch1: ch₁·[ω^{n-1}]
        ch2: ch₂·[ω^{n-2}] (None for n = 1)
        c1_squared: c₁²·[ω^{n-2}] (None for n = 1)
        c2: c₂·[ω^{n-2}] (None for n = 1)
        discriminant: Δ = c₂ − (r−1)/(2r)c₁² (None for n = 1)
        imaginary: Imaginary contamination per entry
        residuals: Named consistency residuals
    """

    rank: int
    n: int
    degree: float = 0.0
    degree_wedge: float = 0.0
    slope: float = 0.0
    ch1: float = 0.0
    ch2: Optional[float] = None
    c1_squared: Optional[float] = None
    c2: Optional[float] = None
    discriminant: Optional[float] = None
    imaginary: Dict[str, float] = field(default_factory=dict)
    residuals: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return plain(self.__dict__)


@dataclass(eq=False)
class BogomolovReport:
    """Two-path evaluation of the Bogomolov energy identity."""

    lhs: float
    rhs: float
    terms: Dict[str, float] = field(default_factory=dict)

    @property
    def difference(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def relative(self) -> float:
        return self.difference / (1.0 + abs(self.lhs))

    def to_dict(self) -> Dict[str, Any]:
        return plain({'lhs': self.lhs, 'rhs': self.rhs, 'difference': self.difference,
                      'relative': self.relative, 'terms': self.terms})


@dataclass(eq=False)
class OddClassResult:
    """
    Odd characteristic form v_{2j+1} of a flat bundle with metric.

    Attributes:
        j: Index
        form: Scalar (2j+1)-form
        closedness: sup|dv|
        periods: Integral over each coordinate subtorus, keyed by real axis tuple
        imaginary: Largest imaginary part of a period
    """

    j: int
    form: MatrixFormField
    closedness: float = 0.0
    periods: Dict[tuple, float] = field(default_factory=dict)
    imaginary: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return plain({'j': self.j, 'closedness': self.closedness, 'imaginary': self.imaginary,
                      'periods': {'-'.join(map(str, k)): v for k, v in self.periods.items()}})


@dataclass(eq=False)
class ProbeReport:
    """
    Heuristic semistability classification from an ε-continuation.

    The verdict classifies measured trends; it is not a proof of (semi)stability.
    """

    verdict: Verdict
    regime: Regime
    epsilons: List[float] = field(default_factory=list)
    psi_sup: List[float] = field(default_factory=list)
    eps_log_sup: List[float] = field(default_factory=list)
    log_sup: List[float] = field(default_factory=list)
    log_l2: List[float] = field(default_factory=list)
    resolution_verdicts: Dict[int, str] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return plain(self.__dict__)


@dataclass(eq=False)
class ApproxReport:
    """Flowed approximate projective-flatness measure per ε."""

    epsilons: List[float] = field(default_factory=list)
    values: List[float] = field(default_factory=list)
    flow_time: float = 2.0

    @property
    def decreasing(self) -> bool:
        return all(b <= a * (1.0 + 1e-9) + 1e-14 for a, b in zip(self.values, self.values[1:]))

    def to_dict(self) -> Dict[str, Any]:
        return plain({'epsilons': self.epsilons, 'values': self.values,
                      'flow_time': self.flow_time, 'decreasing': self.decreasing})


@dataclass(eq=False)
class CorrespondenceReport:
    """
    Residuals of one or both legs of the Higgs / flat correspondence.

    Attributes:
        direction: 'higgs->projflat', 'projflat->higgs' or 'roundtrip'
        residuals: Named non-negative residuals of every leg
        distance: Round-trip distance modulo constant rescaling (None for single legs)
        partial: True when a leg failed
        notes: Failure messages
    """

    direction: str
    residuals: Dict[str, float] = field(default_factory=dict)
    distance: Optional[float] = None
    partial: bool = False
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return plain(self.__dict__)


@dataclass(eq=False)
class KernelReport:
    """Numerical kernels of D and D'' on sections and the angles between them."""

    dim_flat: int
    dim_holomorphic: int
    angles: List[float] = field(default_factory=list)
    singular_values_flat: List[float] = field(default_factory=list)
    singular_values_holomorphic: List[float] = field(default_factory=list)

    @property
    def max_angle(self) -> float:
        return max(self.angles, default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return plain({'dim_flat': self.dim_flat, 'dim_holomorphic': self.dim_holomorphic,
                      'max_angle': self.max_angle, 'angles': self.angles})


@dataclass(eq=False)
class ExtensionResult:
    """
    Corrected extension representative β̃ = β + D''γ.

    Attributes:
        beta: Corrected 1-form
        gamma: Section solving the elliptic equation
        residuals: lambda_residual (sup|√-1ΛD'β̃|), full_residual (sup|D'β̃|),
            closedness (sup|D''β̃|), kernel_component (rhs projection on the kernel)
        iterations: Krylov iterations used
    """

    beta: MatrixFormField
    gamma: MatrixFormField
    residuals: Dict[str, float] = field(default_factory=dict)
    iterations: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return plain({'residuals': self.residuals, 'iterations': self.iterations})


@dataclass(eq=False)
class BottChernResult:
    """
    Representative √-1 tr(∂̄_H ψ_H^{1,0}) of the Bott-Chern class of a flat bundle.

    Attributes:
        form: Scalar (1,1) form
        closedness: sup|∂ρ| + sup|∂̄ρ|
        realness: sup|ρ − conj(ρ)|
        variation_residual: sup|ρ(H) − ρ(K) − (√-1/2)∂∂̄ log det K⁻¹H| when K is given
    """

    form: MatrixFormField
    closedness: float = 0.0
    realness: float = 0.0
    variation_residual: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return plain({'closedness': self.closedness, 'realness': self.realness,
                      'variation_residual': self.variation_residual, 'sup': self.form.sup_norm()})
