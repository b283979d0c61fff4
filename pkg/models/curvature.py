"""Typed curvature components returned by the gauge calculus."""
from dataclasses import dataclass, field
from typing import Dict

from models.fields import MatrixFormField


@dataclass(eq=False)
class HiggsCurvature:
    """
    Components of the Hitchin-Simpson curvature F_{H,θ}.

    Attributes:
        chern: (1,1) part of the Chern curvature F_H
        commutator: [θ, θ^{*H}]
        d_theta: ∂_H θ, type (2,0)
        dbar_theta_star: ∂̄_E θ^{*H}, type (0,2)
        chern_20: (2,0) part of the Chern curvature (vanishes for integrable data)
        chern_02: (0,2) part of the Chern curvature (vanishes for integrable data)
    """

    chern: MatrixFormField
    commutator: MatrixFormField
    d_theta: MatrixFormField
    dbar_theta_star: MatrixFormField
    chern_20: MatrixFormField
    chern_02: MatrixFormField

    @property
    def mixed(self) -> MatrixFormField:
        """F_H + [θ, θ^{*H}], the (1,1) part of F_{H,θ}."""
        return self.chern + self.commutator

    @property
    def total(self) -> MatrixFormField:
        """Sum of the four typed components."""
        return self.chern + self.commutator + self.d_theta + self.dbar_theta_star

    @property
    def residuals(self) -> Dict[str, float]:
        return {
            'chern_20': self.chern_20.sup_norm(),
            'chern_02': self.chern_02.sup_norm(),
        }


@dataclass(eq=False)
class PseudoCurvature:
    """
    Pseudo-curvature G_H = (D''_H)² of a flat connection with a metric.

    Attributes:
        full: G_H with all types
        trace_free: G_H − (1/r) tr G_H ⊗ Id
        contracted: √-1 Λ_ω G_H as a (0,0) form
        residuals: Structure-identity residuals by name
    """

    full: MatrixFormField
    trace_free: MatrixFormField
    contracted: MatrixFormField
    residuals: Dict[str, float] = field(default_factory=dict)
