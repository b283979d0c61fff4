"""Hermitian-Yang-Mills heat flow for Higgs bundles and its gauge-equivalent pair form."""
import logging
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from core.field_algebra import inner_density
from core.gauge import higgs_curvature, higgs_psi
from core.newton_krylov import pointwise_sup
from core.perturbed import conformal_normalization_higgs
from core.spectral import heat_phi1, integrate, mean_value, spectral_d
from models.bundles import HiggsBundle
from models.enums import Integrator
from models.fields import HermitianField, MatrixFormField
from models.flow_state import FlowState, FlowTrajectory, MONOTONE_SLACK, PairState, PairTrajectory
from utils import hermitian
from utils.validators import validate_time_step

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[Dict], None]

MAX_HALVINGS = 20


def ymh_energy(bundle: HiggsBundle, H: HermitianField) -> Tuple[float, np.ndarray]:
    """
    Yang-Mills-Higgs functional ∫|F_H + [θ, θ^{*H}]|² + 2|∂_Hθ|² and the density |F_{H,θ}|².

    A gauge-transported pair is evaluated by passing it as a bundle with the fixed metric.

    Returns:
        Tuple of (functional value, real density grid)
    """
    geometry = bundle.geometry
    parts = higgs_curvature(bundle, H)
    mixed = parts.mixed
    value_density = np.real(inner_density(mixed, mixed, H))
    if parts.d_theta.components:
        value_density = value_density + 2.0 * np.real(inner_density(parts.d_theta, parts.d_theta, H))
    total = parts.total
    density = np.real(inner_density(total, total, H))
    return float(np.real(integrate(value_density, geometry))), density


def _hermitian_frame(H: HermitianField, endomorphism: np.ndarray) -> np.ndarray:
    root = hermitian.sqrtm_h(H.values)
    return hermitian.hermitian_part(root @ endomorphism @ hermitian.inv_sqrtm_h(H.values))


def flow_diagnostics(bundle: HiggsBundle, H: HermitianField, H0: HermitianField) -> Dict[str, float]:
    """Diagnostics of a flow state, recomputed from the metric."""
    geometry = bundle.geometry
    psi = higgs_psi(bundle, H)
    frame = _hermitian_frame(H, psi)
    norm_sq = np.sum(np.abs(frame) ** 2, axis=(-2, -1))
    ymh, _ = ymh_energy(bundle, H)
    h = np.linalg.solve(H0.values, H.values)
    return {
        'psi_sup': pointwise_sup(frame),
        'psi_l2': float(np.sqrt(np.real(integrate(norm_sq, geometry)))),
        'ymh': ymh,
        'det_deviation': float(np.max(np.abs(np.linalg.det(h) - 1.0))),
        'trace_mean': float(abs(mean_value(np.trace(psi, axis1=-2, axis2=-1)))),
    }


def _advance(bundle: HiggsBundle, H: HermitianField, dt: float, integrator: Integrator) -> HermitianField:
    """H ↦ H^{1/2} exp(−2dt·Y) H^{1/2} with Y = φ₁(dtΔ)[H^{1/2}ΨH^{-1/2}] or its explicit version."""
    root = hermitian.sqrtm_h(H.values)
    Y = _hermitian_frame(H, higgs_psi(bundle, H))
    if integrator == Integrator.EXPONENTIAL:
        Y = hermitian.hermitian_part(heat_phi1(Y, dt, bundle.geometry))
    values = hermitian.hermitian_part(root @ hermitian.expm_h(-2.0 * dt * Y) @ root)
    return HermitianField(bundle.geometry, values)


def hym_flow(H0: HermitianField, bundle: HiggsBundle, dt: float = 1e-2, T: float = 2.0,
             integrator: Union[Integrator, str] = Integrator.EXPONENTIAL, cfl: float = 0.2,
             normalize: bool = True, record_every: int = 1,
             progress: Optional[ProgressCallback] = None) -> FlowTrajectory:
    """
    Integrate H⁻¹∂_tH = −2Ψ(t) from H0 up to time T.

    A step that increases the YMH energy beyond the monotonicity slack is retried
    with half the step size, at most 20 times per step.

    Args:
        H0: Initial metric
        bundle: Higgs bundle
        dt: Initial time step
        T: Final time
        integrator: 'exponential' (exact on the linear heat part) or 'explicit'
        cfl: CFL number bounding dt for the explicit integrator
        normalize: Conformally normalize H0 so that tr Ψ(0) = 0
        record_every: Record every k-th accepted step (the final state is always recorded)
        progress: Callable receiving one record per accepted step

    Returns:
        FlowTrajectory starting at the (normalized) H0
    """
    integrator = Integrator(integrator)
    geometry = bundle.geometry
    if normalize:
        H0, _ = conformal_normalization_higgs(bundle, H0)

    trajectory = FlowTrajectory(integrator=integrator.value, bundle=bundle, reference=H0)
    if integrator == Integrator.EXPLICIT and not validate_time_step(dt, geometry.spacing(), cfl):
        limit = cfl * geometry.spacing() ** 2
        logger.warning("dt %.3e violates the CFL limit, using %.3e", dt, limit)
        dt = limit

    H = H0
    t = 0.0
    diagnostics = flow_diagnostics(bundle, H, H0)
    diagnostics['dt'] = dt
    trajectory.states.append(FlowState(t, H, diagnostics))

    step = 0
    while t < T - 1e-14:
        h = min(dt, T - t)
        candidate = _advance(bundle, H, h, integrator)
        new_diag = flow_diagnostics(bundle, candidate, H0)
        halvings = 0
        while (new_diag['ymh'] > diagnostics['ymh'] + MONOTONE_SLACK * (1.0 + abs(diagnostics['ymh']))
               and halvings < MAX_HALVINGS):
            h *= 0.5
            halvings += 1
            candidate = _advance(bundle, H, h, integrator)
            new_diag = flow_diagnostics(bundle, candidate, H0)
        if halvings:
            logger.info("t=%.4g: energy increase, step halved %d times to %.3e", t, halvings, h)
            trajectory.halvings += halvings
            dt = h

        if new_diag['psi_sup'] > diagnostics['psi_sup'] + MONOTONE_SLACK * (1.0 + diagnostics['psi_sup']):
            logger.warning("t=%.4g: sup|Psi| increased from %.6e to %.6e", t + h,
                           diagnostics['psi_sup'], new_diag['psi_sup'])
            trajectory.psi_sup_increases += 1

        H, t, diagnostics = candidate, t + h, new_diag
        diagnostics['dt'] = h
        step += 1
        if step % record_every == 0 or t >= T - 1e-14:
            trajectory.states.append(FlowState(t, H, diagnostics))
        logger.debug("flow t=%.4g psi_sup=%.3e ymh=%.6e", t, diagnostics['psi_sup'], diagnostics['ymh'])
        if progress:
            progress(dict(diagnostics, stage='flow', step=step, t=t, residual=diagnostics['psi_sup']))

    return trajectory


def gauge_from_metric(H0: HermitianField, H: HermitianField) -> np.ndarray:
    """σ = H0^{-1/2}(H0^{-1/2} H H0^{-1/2})^{1/2} H0^{1/2}, the H0-positive root of H0⁻¹H."""
    root = hermitian.sqrtm_h(H0.values)
    inv_root = hermitian.inv_sqrtm_h(H0.values)
    middle = hermitian.sqrtm_h(inv_root @ H.values @ inv_root)
    return inv_root @ middle @ root


def gauge_transform(bundle: HiggsBundle, sigma: np.ndarray) -> HiggsBundle:
    """σ(∂̄_E, θ) = (σ∘∂̄_E∘σ⁻¹, σθσ⁻¹)."""
    sigma_inv = np.linalg.inv(sigma)
    geometry = bundle.geometry
    inv_form = MatrixFormField.scalar(geometry, sigma_inv)
    a = (bundle.a.left_multiply(sigma).right_multiply(sigma_inv)
         + spectral_d(inv_form, (0, 1)).left_multiply(sigma))
    theta = bundle.theta.left_multiply(sigma).right_multiply(sigma_inv)
    return HiggsBundle(geometry, bundle.rank, a, theta, bundle.lam, tolerance=None)


def ymh_gauge_transport(trajectory: FlowTrajectory, H0: Optional[HermitianField] = None) -> PairTrajectory:
    """
    Re-express a HYM trajectory as a pair (A(t), φ(t)) in the fixed metric H0.

    Each state is checked against F_A + [φ, φ^{*H0}] = σ(F_H + [θ, θ^{*H}])σ⁻¹ and the
    YMH energies of both representations are recorded.

    Returns:
        PairTrajectory
    """
    bundle = trajectory.bundle
    H0 = H0 or trajectory.reference
    pairs = PairTrajectory()
    for state in trajectory.states:
        sigma = gauge_from_metric(H0, state.H)
        pair = gauge_transform(bundle, sigma)
        lhs = higgs_curvature(pair, H0).mixed
        rhs = higgs_curvature(bundle, state.H).mixed.left_multiply(sigma).right_multiply(np.linalg.inv(sigma))
        residual = (lhs - rhs).sup_norm()
        if residual > 1e-8:
            logger.warning("t=%.4g: conjugation residual %.3e", state.t, residual)
        pairs.states.append(PairState(
            t=state.t, a=pair.a, phi=pair.theta, sigma=sigma,
            conjugation_residual=residual,
            ymh=ymh_energy(pair, H0)[0],
            ymh_metric=ymh_energy(bundle, state.H)[0],
        ))
    return pairs
