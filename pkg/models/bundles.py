"""Higgs bundle, projectively flat bundle and Hom-bundle structure data."""
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from models.fields import HermitianField, MatrixFormField
from models.geometry import TorusGeometry

DEFAULT_TOLERANCE = 1e-10


@dataclass(eq=False)
class HiggsBundle:
    """
    Higgs bundle on the trivial rank-r bundle over a torus.

    The holomorphic structure is ∂̄_E = ∂̄ + a and θ is the Higgs field.

    Attributes:
        geometry: Underlying torus
        rank: Rank r
        a: (0,1) form
        theta: (1,0) form
        lam: Einstein constant λ
        tolerance: Integrability tolerance checked on construction (None skips the check)
        residuals: Measured integrability residuals
    """

    geometry: TorusGeometry
    rank: int
    a: Optional[MatrixFormField] = None
    theta: Optional[MatrixFormField] = None
    lam: float = 0.0
    tolerance: Optional[float] = DEFAULT_TOLERANCE
    residuals: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.a is None:
            self.a = MatrixFormField.zeros(self.geometry, self.rank)
        if self.theta is None:
            self.theta = MatrixFormField.zeros(self.geometry, self.rank)
        if self.tolerance is not None:
            is_valid, error_msg = self.validate()
            if not is_valid:
                from core.errors import PreconditionError
                raise PreconditionError(error_msg, self.residuals)

    def validate(self) -> Tuple[bool, str]:
        """
        Validate shapes and the integrability equations.

        Returns:
            Tuple of (is_valid, error_message)
        """
        for name, form, allowed in (('a', self.a, {(0, 1)}), ('theta', self.theta, {(1, 0)})):
            if form.matrix_shape != (self.rank, self.rank):
                return False, f"{name} has coefficient shape {form.matrix_shape}, expected rank {self.rank}"
            if form.bidegrees - allowed:
                return False, f"{name} has types {sorted(form.bidegrees)}"
            if not form.geometry.compatible(self.geometry):
                return False, f"{name} lives on a different torus"

        from core.gauge import higgs_integrability
        self.residuals = higgs_integrability(self)
        tol = self.tolerance if self.tolerance is not None else DEFAULT_TOLERANCE
        for name, value in self.residuals.items():
            if value > tol:
                return False, f"{name} residual {value:.3e} above tolerance {tol:.1e}"
        return True, ""


@dataclass(eq=False)
class ProjFlatBundle:
    """
    Projectively flat connection D = d + Γ on the trivial rank-r bundle.

    Attributes:
        geometry: Underlying torus
        rank: Rank r
        gamma: Connection 1-form of mixed type
        alpha: Constant coefficients α_{αβ̄} of the central (1,1) form
        tolerance: Flatness tolerance checked on construction (None skips the check)
        residuals: Measured flatness residuals
    """

    geometry: TorusGeometry
    rank: int
    gamma: Optional[MatrixFormField] = None
    alpha: Optional[np.ndarray] = None
    tolerance: Optional[float] = DEFAULT_TOLERANCE
    residuals: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.gamma is None:
            self.gamma = MatrixFormField.zeros(self.geometry, self.rank)
        if self.alpha is None:
            self.alpha = np.zeros((self.geometry.n, self.geometry.n), dtype=complex)
        self.alpha = np.asarray(self.alpha, dtype=complex)
        if self.tolerance is not None:
            is_valid, error_msg = self.validate()
            if not is_valid:
                from core.errors import PreconditionError
                raise PreconditionError(error_msg, self.residuals)

    @property
    def lam(self) -> float:
        """λ = Λ_ω α."""
        ginv = self.geometry.metric_inverse
        return float(np.real(sum(-2j * ginv[b, a] * self.alpha[a, b]
                                 for a in range(self.geometry.n) for b in range(self.geometry.n))))

    def alpha_form(self) -> MatrixFormField:
        """α ⊗ Id as a constant (1,1) matrix form."""
        comps = {}
        eye = np.eye(self.rank, dtype=complex)
        for a in range(self.geometry.n):
            for b in range(self.geometry.n):
                if self.alpha[a, b] != 0:
                    comps[((a,), (b,))] = np.broadcast_to(self.alpha[a, b] * eye,
                                                          self.geometry.shape + eye.shape).copy()
        return MatrixFormField(self.geometry, comps, (self.rank, self.rank))

    def validate(self) -> Tuple[bool, str]:
        """
        Validate shapes and projective flatness √-1F_D = α ⊗ Id.

        Returns:
            Tuple of (is_valid, error_message)
        """
        if self.gamma.matrix_shape != (self.rank, self.rank):
            return False, f"gamma has coefficient shape {self.gamma.matrix_shape}, expected rank {self.rank}"
        if self.gamma.bidegrees - {(1, 0), (0, 1)}:
            return False, f"gamma must be a 1-form, has types {sorted(self.gamma.bidegrees)}"
        if self.alpha.shape != (self.geometry.n, self.geometry.n):
            return False, "alpha must be an n×n coefficient matrix"
        # a real (1,1) form has √-1·α Hermitian coefficients
        if not np.allclose(1j * self.alpha, np.conj(1j * self.alpha).T, atol=1e-12):
            return False, "alpha must be a real (1,1) form"

        from core.gauge import projflat_residual
        self.residuals = projflat_residual(self)
        tol = self.tolerance if self.tolerance is not None else DEFAULT_TOLERANCE
        for name, value in self.residuals.items():
            if value > tol:
                return False, f"{name} residual {value:.3e} above tolerance {tol:.1e}"
        return True, ""


@dataclass(eq=False)
class HomStructure:
    """
    Higgs-Hermitian structure on Hom(Q, S) built from two Higgs bundles with metrics.

    Sections are rank(S)×rank(Q) matrix fields. With Q the trivial line, sections
    are the sections of S itself.

    Attributes:
        target: Higgs bundle S
        target_metric: Metric on S
        source: Higgs bundle Q
        source_metric: Metric on Q
    """

    target: HiggsBundle
    target_metric: HermitianField
    source: HiggsBundle
    source_metric: HermitianField

    @classmethod
    def of_bundle(cls, bundle: HiggsBundle, H: HermitianField) -> 'HomStructure':
        """Hom(O, E) = E for a Higgs bundle with metric."""
        trivial = HiggsBundle(bundle.geometry, 1, tolerance=None)
        return cls(bundle, H, trivial, HermitianField.identity(bundle.geometry, 1))

    @property
    def geometry(self) -> TorusGeometry:
        return self.target.geometry

    @property
    def section_shape(self) -> Tuple[int, int]:
        return (self.target.rank, self.source.rank)
