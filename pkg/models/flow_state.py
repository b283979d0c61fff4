"""States and trajectories produced by the continuation and flow solvers."""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from models.bundles import HiggsBundle
from models.enums import ProblemKind, Regime
from models.fields import HermitianField, MatrixFormField

MONOTONE_SLACK = 1e-10


@dataclass(eq=False)
class FlowState:
    """
    Snapshot of the HYM flow.

    Attributes:
        t: Flow time
        H: Metric at time t
        diagnostics: psi_sup, psi_l2, ymh, det_deviation, trace_mean, dt
    """

    t: float
    H: HermitianField
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def to_row(self) -> Dict[str, float]:
        """Flat record for the per-step report."""
        row = {'t': self.t}
        row.update(self.diagnostics)
        return row


def _nonincreasing(values: List[float], slack: float = MONOTONE_SLACK) -> bool:
    return all(b <= a + slack * (1.0 + abs(a)) for a, b in zip(values, values[1:]))


@dataclass(eq=False)
class FlowTrajectory:
    """
    Sequence of flow states from one run.

    Attributes:
        states: Recorded states in time order
        halvings: Number of step-size halvings performed
        psi_sup_increases: Accepted steps on which sup|Ψ| grew
        integrator: Integrator name
        bundle: Higgs bundle being flowed
        reference: Starting metric H0
    """

    states: List[FlowState] = field(default_factory=list)
    halvings: int = 0
    psi_sup_increases: int = 0
    integrator: str = 'exponential'
    bundle: Optional[HiggsBundle] = None
    reference: Optional[HermitianField] = None

    def __len__(self) -> int:
        return len(self.states)

    @property
    def final(self) -> Optional[FlowState]:
        return self.states[-1] if self.states else None

    def series(self, key: str) -> List[float]:
        return [s.diagnostics[key] for s in self.states if key in s.diagnostics]

    @property
    def energy_monotone(self) -> bool:
        return _nonincreasing(self.series('ymh'))

    @property
    def psi_sup_monotone(self) -> bool:
        return _nonincreasing(self.series('psi_sup'))


@dataclass(eq=False)
class PairState:
    """
    Gauge-transported flow state: connection A and Higgs field φ in the fixed metric H0.

    Attributes:
        t: Flow time
        a: (0,1) part of A
        phi: Higgs field σθσ⁻¹
        sigma: Positive square root of H0⁻¹H(t)
        conjugation_residual: Sup of F_A + [φ, φ*] − σ(F_H + [θ, θ*])σ⁻¹
        ymh: YMH energy of the pair
        ymh_metric: YMH energy computed on the metric side
    """

    t: float
    a: MatrixFormField
    phi: MatrixFormField
    sigma: np.ndarray
    conjugation_residual: float = 0.0
    ymh: float = 0.0
    ymh_metric: float = 0.0


@dataclass(eq=False)
class PairTrajectory:
    """Pair representation of a HYM trajectory."""

    states: List[PairState] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max((s.conjugation_residual for s in self.states), default=0.0)

    @property
    def energy_monotone(self) -> bool:
        return _nonincreasing([s.ymh for s in self.states])


@dataclass(eq=False)
class EpsilonPath:
    """
    Solutions of the perturbed equation along a decreasing ε schedule.

    Attributes:
        problem: Higgs or projectively flat
        reference: Normalized reference metric K
        schedule: Requested ε values
        epsilons: ε values actually solved
        solutions: Metric per solved ε
        diagnostics: Per-ε records (log_sup, log_l2, eps_log_sup, psi_sup, det_deviation, newton_iterations)
        reference_sup: sup|Ψ_K|_K (Higgs) or sup|√-1ΛG_K − λ|_K (flat)
        regime: Boundedness of ‖log h_ε‖ along the path
        error: Message of the failure that cut the path short
    """

    problem: ProblemKind
    reference: HermitianField
    schedule: List[float] = field(default_factory=list)
    epsilons: List[float] = field(default_factory=list)
    solutions: List[HermitianField] = field(default_factory=list)
    diagnostics: List[Dict[str, Any]] = field(default_factory=list)
    reference_sup: float = 0.0
    regime: Regime = Regime.UNDECIDED
    error: Optional[str] = None

    def __len__(self) -> int:
        return len(self.epsilons)

    @property
    def complete(self) -> bool:
        return self.error is None and len(self.epsilons) == len(self.schedule)

    def series(self, key: str) -> List[float]:
        return [d[key] for d in self.diagnostics]

    def rows(self) -> List[Dict[str, Any]]:
        return [dict(d, epsilon=eps) for eps, d in zip(self.epsilons, self.diagnostics)]
