"""Curvature calculus of Higgs bundles and flat connections."""
import logging
from typing import Dict, Optional, Tuple, Union

import numpy as np

from core.errors import FormDegreeError
from core.field_algebra import (adjoint_wrt, basis_gram, bracket, inner_density, pointwise_norm,
                                relative_endomorphism, trace_free, wedge)
from core.spectral import complex_laplacian, exterior_d, integrate, lambda_contract, spectral_d
from models.bundles import HiggsBundle, ProjFlatBundle
from models.curvature import HiggsCurvature, PseudoCurvature
from models.fields import HermitianField, MatrixFormField
from utils import hermitian

logger = logging.getLogger(__name__)

Decomposition = Tuple[MatrixFormField, MatrixFormField]


def connection_curvature(gamma: MatrixFormField) -> MatrixFormField:
    """F = dΓ + Γ∧Γ of a connection coefficient."""
    return exterior_d(gamma) + wedge(gamma, gamma)


def higgs_integrability(bundle: HiggsBundle) -> Dict[str, float]:
    """
    Integrability residuals of a Higgs bundle.

    Returns:
        Sup norms of ∂̄a + a∧a, ∂̄θ + [a, θ] and θ∧θ
    """
    a, theta = bundle.a, bundle.theta
    return {
        'dbar_squared': (spectral_d(a, (0, 1)) + wedge(a, a)).sup_norm(),
        'dbar_theta': (spectral_d(theta, (0, 1)) + bracket(a, theta)).sup_norm(),
        'theta_wedge_theta': wedge(theta, theta).sup_norm(),
    }


def projflat_residual(flat: ProjFlatBundle) -> Dict[str, float]:
    """Sup norm of √-1F_D − α⊗Id."""
    F = connection_curvature(flat.gamma)
    return {'projective_flatness': (F * 1j - flat.alpha_form()).sup_norm()}


# ----------------------------------------------------------------------------
# Higgs bundles

def _inverse_times_derivative(H: HermitianField, kind: Optional[Tuple[int, int]] = None) -> MatrixFormField:
    form = H.as_form()
    dH = exterior_d(form) if kind is None else spectral_d(form, kind)
    return dH.left_multiply(H.inverse())


def chern_connection(bundle: HiggsBundle, H: HermitianField) -> MatrixFormField:
    """
    (1,0) part b = H⁻¹∂H − H⁻¹a^†H of the Chern connection of (∂̄ + a, H).

    Args:
        bundle: Higgs bundle supplying a
        H: Hermitian metric

    Returns:
        (1,0) MatrixFormField
    """
    return _inverse_times_derivative(H, (1, 0)) - adjoint_wrt(bundle.a, H)


def metric_compatibility_residual(bundle: HiggsBundle, H: HermitianField) -> float:
    """Sup of dH − (A^†H + HA) for the Chern connection A = a + b."""
    conn = bundle.a + chern_connection(bundle, H)
    dH = exterior_d(H.as_form())
    rhs = adjoint_wrt(conn).right_multiply(H.values) + conn.left_multiply(H.values)
    return (dH - rhs).sup_norm()


def hitchin_simpson_connection(bundle: HiggsBundle, H: HermitianField) -> MatrixFormField:
    """Full coefficient a + b + θ + θ^{*H} of D_{H,θ}."""
    return bundle.a + chern_connection(bundle, H) + bundle.theta + adjoint_wrt(bundle.theta, H)


def higgs_curvature(bundle: HiggsBundle, H: HermitianField) -> HiggsCurvature:
    """
    Typed components of the Hitchin-Simpson curvature.

    Args:
        bundle: Higgs bundle
        H: Hermitian metric

    Returns:
        HiggsCurvature with F_H, [θ, θ^{*H}], ∂_Hθ, ∂̄_Eθ^{*H} and the (2,0)/(0,2) Chern parts
    """
    a, theta = bundle.a, bundle.theta
    b = chern_connection(bundle, H)
    F = connection_curvature(a + b)
    theta_star = adjoint_wrt(theta, H)
    return HiggsCurvature(
        chern=F.part(1, 1),
        commutator=bracket(theta, theta_star),
        d_theta=spectral_d(theta, (1, 0)) + bracket(b, theta),
        dbar_theta_star=spectral_d(theta_star, (0, 1)) + bracket(a, theta_star),
        chern_20=F.part(2, 0),
        chern_02=F.part(0, 2),
    )


def curvature(structure: Union[HiggsBundle, ProjFlatBundle, MatrixFormField],
              H: Optional[HermitianField] = None) -> Union[HiggsCurvature, MatrixFormField]:
    """
    Curvature of a Higgs bundle with metric, a flat bundle, or a bare connection.

    Returns:
        HiggsCurvature for a Higgs bundle, else the full 2-form dΓ + Γ∧Γ
    """
    if isinstance(structure, HiggsBundle):
        if H is None:
            H = HermitianField.identity(structure.geometry, structure.rank)
        return higgs_curvature(structure, H)
    if isinstance(structure, ProjFlatBundle):
        return connection_curvature(structure.gamma)
    return connection_curvature(structure)


def higgs_psi(bundle: HiggsBundle, H: HermitianField,
              parts: Optional[HiggsCurvature] = None) -> np.ndarray:
    """
    Ψ = √-1Λ_ω(F_H + [θ, θ^{*H}]) − λ Id as a grid of matrices.

    Args:
        bundle: Higgs bundle
        H: Metric
        parts: Precomputed curvature components

    Returns:
        Array grid + (r, r)
    """
    parts = parts or higgs_curvature(bundle, H)
    psi = lambda_contract(parts.mixed).values * 1j
    return psi - bundle.lam * np.eye(bundle.rank)


# ----------------------------------------------------------------------------
# flat connections

def decompose_connection(flat: ProjFlatBundle, H: HermitianField) -> Decomposition:
    """
    Split D = D_H + ψ_H into an H-unitary connection and an H-self-adjoint 1-form.

    ψ_H = ½(Γ + Γ^{*H} − H⁻¹dH) and A_H = Γ − ψ_H.

    Returns:
        Tuple of (A_H, ψ_H); their self-adjointness and unitarity residuals are
        stored in the ``flags`` of ψ_H
    """
    gamma = flat.gamma
    gamma_star = adjoint_wrt(gamma, H)
    h_inv_dh = _inverse_times_derivative(H)
    psi = (gamma + gamma_star - h_inv_dh) * 0.5
    unitary = gamma - psi
    psi.flags['selfadjoint_residual'] = (psi - adjoint_wrt(psi, H)).sup_norm()
    psi.flags['unitary_residual'] = (unitary + adjoint_wrt(unitary, H) - h_inv_dh).sup_norm()
    return unitary, psi


def _split(decomposition: Decomposition) -> Tuple[MatrixFormField, MatrixFormField]:
    """Coefficients of D''_H = ∂̄ + A^{0,1} + ψ^{1,0} and D'_H = ∂ + A^{1,0} + ψ^{0,1}."""
    unitary, psi = decomposition
    return unitary.part(0, 1) + psi.part(1, 0), unitary.part(1, 0) + psi.part(0, 1)


def pseudo_curvature(flat: ProjFlatBundle, H: HermitianField,
                     decomposition: Optional[Decomposition] = None) -> PseudoCurvature:
    """
    G_H = (D''_H)² with its trace-free part, contraction and structure residuals.

    Args:
        flat: Flat bundle
        H: Metric
        decomposition: Precomputed (A_H, ψ_H)

    Returns:
        PseudoCurvature
    """
    decomposition = decomposition or decompose_connection(flat, H)
    _, psi = decomposition
    double_prime, _ = _split(decomposition)
    G = spectral_d(double_prime, (0, 1)) + wedge(double_prime, double_prime)
    G11, G20, G02 = G.part(1, 1), G.part(2, 0), G.part(0, 2)

    tr_G = G.trace()
    tr_psi = psi.part(1, 0).trace()
    residuals = {
        'mixed_antiselfadjoint': (adjoint_wrt(G11, H) + G11).sup_norm(),
        'pure_adjoint': (adjoint_wrt(G20, H) - G02).sup_norm(),
        'trace': (tr_G.part(1, 1) - spectral_d(tr_psi, (0, 1))).sup_norm() + tr_G.part(2, 0).sup_norm(),
    }
    return PseudoCurvature(
        full=G,
        trace_free=trace_free(G),
        contracted=lambda_contract(G11) * 1j,
        residuals=residuals,
    )


def d_operator(connection: Union[ProjFlatBundle, MatrixFormField], X: MatrixFormField) -> MatrixFormField:
    """D X = dX + Γ∧X − (−1)^{|X|} X∧Γ on End-valued forms."""
    gamma = connection.gamma if isinstance(connection, ProjFlatBundle) else connection
    return exterior_d(X) + bracket(gamma, X)


def dc_operator(flat: ProjFlatBundle, K: HermitianField, X: MatrixFormField,
                decomposition: Optional[Decomposition] = None) -> MatrixFormField:
    """
    d^c_K X = D''_K X − D'_K X for an End-valued 0-form X.

    Raises:
        FormDegreeError: If X is not a (0,0) form
    """
    if X.bidegrees - {(0, 0)}:
        raise FormDegreeError("d^c acts on (0,0) fields")
    decomposition = decomposition or decompose_connection(flat, K)
    double_prime, prime = _split(decomposition)
    dpp = spectral_d(X, (0, 1)) + bracket(double_prime, X)
    dp = spectral_d(X, (1, 0)) + bracket(prime, X)
    return dpp - dp


def log_derivative_term(flat: ProjFlatBundle, K: HermitianField, H: HermitianField,
                        decomposition: Optional[Decomposition] = None) -> MatrixFormField:
    """D(h⁻¹ d^c_K h) with h = K⁻¹H, as a 2-form."""
    h = relative_endomorphism(K, H)
    dc_h = dc_operator(flat, K, h.as_form(), decomposition)
    return d_operator(flat, dc_h.left_multiply(np.linalg.inv(h.values)))


def difference_formula_residual(flat: ProjFlatBundle, K: HermitianField, H: HermitianField) -> float:
    """Sup of G_H − G_K − ¼D(h⁻¹D^c_K h)."""
    dec_K = decompose_connection(flat, K)
    G_H = pseudo_curvature(flat, H).full
    G_K = pseudo_curvature(flat, K, dec_K).full
    return (G_H - G_K - log_derivative_term(flat, K, H, dec_K) * 0.25).sup_norm()


def _eigenframe(K: HermitianField, s_values: np.ndarray):
    """Eigenvalues of s and the matrices mapping End(E) to its K-orthonormal eigenbasis."""
    root = hermitian.sqrtm_h(K.values)
    inv_root = hermitian.inv_sqrtm_h(K.values)
    w, U = hermitian.eigh(root @ s_values @ inv_root)
    left = hermitian.dagger(U) @ root
    right = inv_root @ U
    return w, left, right


def log_endomorphism(K: HermitianField, H: HermitianField) -> np.ndarray:
    """s = log(K⁻¹H) as a grid of K-self-adjoint matrices."""
    root = hermitian.sqrtm_h(K.values)
    inv_root = hermitian.inv_sqrtm_h(K.values)
    sigma = hermitian.logm_h(inv_root @ H.values @ inv_root)
    return inv_root @ sigma @ root


def theta_quadratic(flat: ProjFlatBundle, K: HermitianField, s_values: np.ndarray) -> np.ndarray:
    """
    Pointwise ⟨Θ(s)(Ds), Ds⟩_K.

    Θ acts on the entry (α, β) of Ds, written in a K-orthonormal eigenbasis of s
    with eigenvalues λ, by (e^{λα−λβ} − 1)/(λα − λβ).
    """
    geometry = K.geometry
    Ds = d_operator(flat, MatrixFormField.scalar(geometry, s_values))
    w, left, right = _eigenframe(K, s_values)
    weights = hermitian.theta_weights(w)
    rotated = {key: left @ values @ right for key, values in Ds.components.items()}

    quadratic = np.zeros(geometry.shape, dtype=complex)
    ginv = geometry.metric_inverse
    for k1, v1 in rotated.items():
        for k2, v2 in rotated.items():
            g = basis_gram(k1, k2, ginv)
            if g == 0:
                continue
            quadratic = quadratic + g * np.sum(weights * v1 * np.conj(v2), axis=(-2, -1))
    return quadratic


def key_identity_residual(K: HermitianField, H: HermitianField, flat: ProjFlatBundle) -> np.ndarray:
    """
    Pointwise ⟨√-1ΛD(h⁻¹D^c_K h), s⟩_K + ⟨Θ(s)Ds, Ds⟩_K − √-1Λ∂∂̄|s|²_K.

    Returns:
        Complex array of grid shape (zero for an exact identity)
    """
    s_values = log_endomorphism(K, H)
    lhs_form = log_derivative_term(flat, K, H).part(1, 1)
    lhs_matrix = lambda_contract(lhs_form).values * 1j
    lhs = np.einsum('...ij,...ji->...', lhs_matrix, s_values)

    norm_sq = np.einsum('...ij,...ji->...', s_values, s_values)
    rhs = -theta_quadratic(flat, K, s_values) + complex_laplacian(norm_sq, K.geometry)
    return lhs - rhs


def trace_log_inequality(flat: ProjFlatBundle, K: HermitianField, H: HermitianField) -> np.ndarray:
    """
    Margin of √-1Λ dd^c log(tr h + tr h⁻¹) ≥ −4(|√-1ΛG_H − λ|_H + |√-1ΛG_K − λ|_K).

    Returns:
        Pointwise LHS − RHS (non-negative up to discretisation slack)
    """
    geometry = K.geometry
    h = relative_endomorphism(K, H)
    tr_h = np.real(np.trace(h.values, axis1=-2, axis2=-1))
    tr_h_inv = np.real(np.trace(np.linalg.inv(h.values), axis1=-2, axis2=-1))
    f = np.log(tr_h + tr_h_inv)
    lhs = 2.0 * complex_laplacian(f, geometry)

    eye = np.eye(flat.rank)
    norms = []
    for metric in (H, K):
        contracted = pseudo_curvature(flat, metric).contracted
        shifted = MatrixFormField.scalar(geometry, contracted.values - flat.lam * eye)
        norms.append(pointwise_norm(shifted, metric))
    return lhs + 4.0 * (norms[0] + norms[1])


def bilinear_relation_residual(flat: ProjFlatBundle, H: HermitianField) -> Dict[str, float]:
    """
    Compare ∫tr(G⊥∧G⊥) with ∫(|G⊥|² − |ΛG⊥|²) on a complex surface.

    Returns:
        Dict with both integrals and their difference

    Raises:
        FormDegreeError: If n ≠ 2
    """
    geometry = flat.geometry
    if geometry.n != 2:
        raise FormDegreeError("bilinear relation needs a complex surface")
    G_perp = pseudo_curvature(flat, H).trace_free
    wedge_integral = integrate(wedge(G_perp, G_perp).trace())
    contracted = lambda_contract(G_perp.part(1, 1))
    density = inner_density(G_perp, G_perp, H) - inner_density(contracted, contracted, H)
    norm_integral = integrate(density, geometry)
    return {
        'wedge_integral': float(np.real(wedge_integral)),
        'norm_integral': float(np.real(norm_integral)),
        'difference': float(abs(wedge_integral - norm_integral)),
    }
