"""
Chern-Weil evaluators: degree, Chern numbers, Bogomolov identity, odd forms of
flat bundles and the Bott-Chern representative.
"""
import itertools
import logging
from typing import Dict, Optional

import numpy as np

from core.errors import FormDegreeError
from core.field_algebra import adjoint_wrt, bracket, inner_norms, trace_free, wedge
from core.gauge import chern_connection, connection_curvature, decompose_connection, higgs_curvature
from core.spectral import exterior_d, integrate, lambda_contract, spectral_d
from models.bundles import HiggsBundle, ProjFlatBundle
from models.fields import HermitianField, MatrixFormField
from models.geometry import TorusGeometry
from models.reports import BogomolovReport, BottChernResult, CharacteristicReport, OddClassResult

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


def kahler_form(geometry: TorusGeometry) -> MatrixFormField:
    """ω = (√-1/2) Σ g_{αβ̄} dz^α∧dz̄^β as a scalar form."""
    omega = MatrixFormField.zeros(geometry, 1)
    for a in range(geometry.n):
        for b in range(geometry.n):
            coefficient = 0.5j * geometry.metric[a, b]
            if coefficient != 0:
                omega = omega + MatrixFormField.single(
                    geometry, ((a,), (b,)), np.full(geometry.shape, coefficient))
    return omega


def _split_real(value: complex, label: str, imaginary: Dict[str, float]) -> float:
    imaginary[label] = abs(float(np.imag(value)))
    return float(np.real(value))


def chern_numbers(bundle: HiggsBundle, H: HermitianField) -> CharacteristicReport:
    """
    Chern-Weil numbers of (E, ∂̄_E) computed with the Chern connection of H.

    Degrees are evaluated twice, through √-1Λ tr F and through tr F ∧ ω^{n-1}.
    Second Chern numbers are only reported for n = 2.

    Args:
        bundle: Higgs bundle (θ does not enter)
        H: Metric

    Returns:
        CharacteristicReport
    """
    geometry = bundle.geometry
    rank, n = bundle.rank, geometry.n
    F = connection_curvature(bundle.a + chern_connection(bundle, H))
    tr_F = F.trace()
    imaginary: Dict[str, float] = {}

    contracted = lambda_contract(tr_F.part(1, 1)).values[..., 0, 0] * 1j
    degree = _split_real(integrate(contracted, geometry) / TWO_PI, 'degree', imaginary)

    ch1_form = tr_F.part(1, 1) * (1j / TWO_PI)
    top = ch1_form if n == 1 else wedge(ch1_form, kahler_form(geometry))
    degree_wedge = _split_real(integrate(top), 'degree_wedge', imaginary)

    report = CharacteristicReport(rank=rank, n=n, degree=degree, degree_wedge=degree_wedge,
                                  slope=degree / rank, ch1=degree_wedge, imaginary=imaginary)
    if n == 2:
        ch2 = _split_real(integrate(wedge(F, F).trace()) * (-1.0 / (8.0 * np.pi ** 2)), 'ch2', imaginary)
        c1_sq = _split_real(integrate(wedge(tr_F, tr_F)) * (-1.0 / (4.0 * np.pi ** 2)), 'c1_squared', imaginary)
        report.ch2 = ch2
        report.c1_squared = c1_sq
        report.c2 = 0.5 * c1_sq - ch2
        report.discriminant = report.c2 - (rank - 1) / (2.0 * rank) * c1_sq

    report.residuals = {
        'degree_paths': abs(degree - degree_wedge),
        'degree_slope': abs(degree - rank * report.slope),
        'ch1_exactness': abs(report.ch1),
    }
    logger.debug("chern numbers: deg=%.3e ch2=%s", degree, report.ch2)
    return report


def degree(bundle: HiggsBundle, H: HermitianField) -> float:
    """deg_ω(E) from the contraction path."""
    return chern_numbers(bundle, H).degree


def slope(bundle: HiggsBundle, H: HermitianField) -> float:
    return chern_numbers(bundle, H).slope


def discriminant(bundle: HiggsBundle, H: HermitianField) -> Optional[float]:
    """Δ = c₂ − (r−1)/(2r)c₁² paired with [ω^{n-2}]; None on curves."""
    return chern_numbers(bundle, H).discriminant


def bogomolov_residual(bundle: HiggsBundle, H: HermitianField) -> BogomolovReport:
    """
    Both sides of 8π²Δ = ∫(2|∂_Hθ|² + |F^⊥|² − |ΛF^⊥|²) with F = (F_{H,θ})^{1,1}.

    The left side comes from the Chern-Weil integrands, the right side from
    pointwise norms of the curvature decomposition.

    Raises:
        FormDegreeError: On a torus of complex dimension other than 2
    """
    geometry = bundle.geometry
    if geometry.n != 2:
        raise FormDegreeError("the Bogomolov identity needs complex dimension 2")

    lhs = 8.0 * np.pi ** 2 * chern_numbers(bundle, H).discriminant
    parts = higgs_curvature(bundle, H)
    perp = trace_free(parts.mixed)
    contracted = lambda_contract(perp)
    d_theta = trace_free(parts.d_theta) if parts.d_theta.components else parts.d_theta

    terms = {
        'higgs_term': 2.0 * float(np.real(inner_norms(d_theta, d_theta, H)[1])) if d_theta.components else 0.0,
        'curvature_term': float(np.real(inner_norms(perp, perp, H)[1])),
        'contraction_term': float(np.real(inner_norms(contracted, contracted, H)[1])),
    }
    rhs = terms['higgs_term'] + terms['curvature_term'] - terms['contraction_term']
    return BogomolovReport(lhs=float(lhs), rhs=rhs, terms=terms)


# ----------------------------------------------------------------------------
# flat bundles

def real_components(form: MatrixFormField) -> Dict[tuple, np.ndarray]:
    """
    Expand a scalar form in the real basis dx/dy.

    Real axes are numbered like the grid axes: x_α = 2α, y_α = 2α + 1.

    Returns:
        Map from a sorted tuple of real axes to the coefficient grid
    """
    out: Dict[tuple, np.ndarray] = {}
    for (I, J), values in form.components.items():
        factors = [[(2 * i, 1.0), (2 * i + 1, 1j)] for i in I]
        factors += [[(2 * j, 1.0), (2 * j + 1, -1j)] for j in J]
        coeff = values[..., 0, 0]
        for choice in itertools.product(*factors):
            axes = tuple(axis for axis, _ in choice)
            if len(set(axes)) < len(axes):
                continue
            inversions = sum(1 for p in range(len(axes)) for q in range(p + 1, len(axes)) if axes[p] > axes[q])
            weight = (-1) ** inversions * np.prod([w for _, w in choice])
            key = tuple(sorted(axes))
            out[key] = out.get(key, 0) + weight * coeff
    return out


def kamber_tondeur(flat: ProjFlatBundle, H: HermitianField, j: int) -> OddClassResult:
    """
    Odd form v_{2j+1} = (2π√-1)^{-j} tr ψ_H^{2j+1} with closedness and periods.

    Periods are integrals over the (2j+1)-dimensional coordinate subtori; for a
    closed form they do not depend on the base point, so the coefficient is
    averaged over the whole grid.

    Args:
        flat: Flat bundle
        H: Metric
        j: Index, j ≥ 0

    Returns:
        OddClassResult (identically zero when 2j+1 exceeds the real dimension)
    """
    if j < 0:
        raise ValueError(f"index must be non-negative, got {j}")
    geometry = flat.geometry
    degree_ = 2 * j + 1
    result = OddClassResult(j=j, form=MatrixFormField.zeros(geometry, 1))
    if degree_ > 2 * geometry.n:
        return result

    _, psi = decompose_connection(flat, H)
    power = psi
    for _ in range(2 * j):
        power = wedge(power, psi)
    form = power.trace() * (TWO_PI * 1j) ** (-j)
    result.form = form
    result.closedness = exterior_d(form).sup_norm()

    for axes, coeff in sorted(real_components(form).items()):
        length = float(np.prod([geometry.periods[axis // 2] for axis in axes]))
        period = complex(np.mean(coeff)) * length
        result.periods[axes] = float(np.real(period))
        result.imaginary = max(result.imaginary, abs(float(np.imag(period))))
    logger.debug("v_%d: closedness %.3e, %d periods", degree_, result.closedness, len(result.periods))
    return result


def _bott_chern_form(flat: ProjFlatBundle, H: HermitianField) -> MatrixFormField:
    unitary, psi = decompose_connection(flat, H)
    psi_10 = psi.part(1, 0)
    dbar_psi = spectral_d(psi_10, (0, 1)) + bracket(unitary.part(0, 1), psi_10)
    return dbar_psi.trace() * 1j


def bott_chern_rep(flat: ProjFlatBundle, H: HermitianField,
                   K: Optional[HermitianField] = None) -> BottChernResult:
    """
    Bott-Chern representative √-1 tr(∂̄_H ψ_H^{1,0}) with its closedness and realness.

    With a second metric K the variation rep(H) − rep(K) is compared to
    (√-1/2)∂∂̄ log det(K⁻¹H).

    Returns:
        BottChernResult
    """
    form = _bott_chern_form(flat, H)
    result = BottChernResult(
        form=form,
        closedness=spectral_d(form, (1, 0)).sup_norm() + spectral_d(form, (0, 1)).sup_norm(),
        realness=(form - adjoint_wrt(form)).sup_norm(),
    )
    if K is not None:
        log_det = np.log(np.real(H.determinant())) - np.log(np.real(K.determinant()))
        scalar = MatrixFormField.scalar(flat.geometry, log_det)
        ddbar = spectral_d(spectral_d(scalar, (0, 1)), (1, 0)) * 0.5j
        result.variation_residual = (form - _bott_chern_form(flat, K) - ddbar).sup_norm()
    return result


__all__ = ['kahler_form', 'chern_numbers', 'degree', 'slope', 'discriminant', 'bogomolov_residual',
           'real_components', 'kamber_tondeur', 'bott_chern_rep']
