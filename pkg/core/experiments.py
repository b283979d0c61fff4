"""Trend experiments built on ε-continuation and the HYM flow."""
import logging
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from core.field_algebra import inner_density, scalar_multiple, trace
from core.gauge import higgs_curvature
from core.hym_flow import hym_flow
from core.newton_krylov import NewtonOptions
from core.perturbed import epsilon_continuation
from core.spectral import build_torus, resample_form
from models.bundles import HiggsBundle
from models.enums import ProblemKind, Regime, Verdict
from models.fields import HermitianField
from models.flow_state import EpsilonPath
from models.reports import ApproxReport, ProbeReport

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[Dict], None]

ZERO_TOL = 1e-8


def classify_path(path: EpsilonPath) -> Verdict:
    """
    Heuristic verdict from the trends of sup|Ψ_ε| and ‖log h_ε‖.

    stable-like: defect tends to 0 with bounded log h. semistable-like: defect tends
    to 0 while log h grows. unstable-like: defect stays bounded away from 0.
    """
    psi = path.series('psi_sup')
    if len(psi) < 2:
        return Verdict.INCONCLUSIVE
    first, last = psi[0], psi[-1]
    tends_to_zero = last <= max(0.25 * first, ZERO_TOL)
    if not tends_to_zero:
        return Verdict.UNSTABLE_LIKE if last >= 0.5 * first else Verdict.INCONCLUSIVE
    if path.regime == Regime.BOUNDED:
        return Verdict.STABLE_LIKE
    if path.regime == Regime.GROWING:
        return Verdict.SEMISTABLE_LIKE
    return Verdict.INCONCLUSIVE


def resample_bundle(bundle: HiggsBundle, grid: int) -> HiggsBundle:
    """Same Higgs data on another resolution."""
    geo = bundle.geometry
    target = build_torus(geo.n, geo.periods, grid, geo.metric, geo.dealias)
    return HiggsBundle(target, bundle.rank, resample_form(bundle.a, target),
                       resample_form(bundle.theta, target), bundle.lam, tolerance=None)


def semistability_probe(bundle: HiggsBundle, schedule: Optional[Sequence[float]] = None,
                        K: Optional[HermitianField] = None, check_grid: Optional[int] = None,
                        options: Optional[NewtonOptions] = None,
                        progress: Optional[ProgressCallback] = None) -> ProbeReport:
    """
    Classify a Higgs bundle as stable-like, semistable-like or unstable-like.

    The classification reads trends of an ε-continuation and is a heuristic, not a
    proof. With ``check_grid`` the run is repeated at that resolution and a
    disagreement downgrades the verdict to inconclusive.

    Returns:
        ProbeReport with the raw per-ε data
    """
    path = epsilon_continuation(ProblemKind.HIGGS, bundle, schedule, K, options, progress)
    verdict = classify_path(path)
    report = ProbeReport(
        verdict=verdict,
        regime=path.regime,
        epsilons=list(path.epsilons),
        psi_sup=path.series('psi_sup'),
        eps_log_sup=path.series('eps_log_sup'),
        log_sup=path.series('log_sup'),
        log_l2=path.series('log_l2'),
        resolution_verdicts={bundle.geometry.grid[0]: verdict.value},
    )
    if path.error:
        report.notes.append(path.error)

    if check_grid:
        other = resample_bundle(bundle, check_grid)
        other_path = epsilon_continuation(ProblemKind.HIGGS, other, schedule, None, options, progress)
        other_verdict = classify_path(other_path)
        report.resolution_verdicts[check_grid] = other_verdict.value
        if other_verdict != verdict:
            report.notes.append(f"verdict differs at N={check_grid}: {other_verdict.value}")
            report.verdict = Verdict.INCONCLUSIVE

    logger.info("probe verdict: %s (regime %s)", report.verdict.value, report.regime.value)
    return report


def approximate_flatness(bundle: HiggsBundle, H: HermitianField, K: HermitianField) -> float:
    """sup(|F_{H,θ} − (1/r) tr F_K ⊗ Id|²_H + 2|∂_Hθ|²_H)."""
    rank = bundle.rank
    parts = higgs_curvature(bundle, H)
    central = scalar_multiple(trace(higgs_curvature(bundle, K).chern), rank) * (1.0 / rank)
    shifted = parts.mixed - central
    density = np.real(inner_density(shifted, shifted, H))
    if parts.d_theta.components:
        density = density + 2.0 * np.real(inner_density(parts.d_theta, parts.d_theta, H))
    return float(np.max(density))


def approx_projflat_experiment(bundle: HiggsBundle, epsilons: Sequence[float], t0: float = 2.0,
                               dt: float = 0.05, K: Optional[HermitianField] = None,
                               options: Optional[NewtonOptions] = None,
                               progress: Optional[ProgressCallback] = None) -> ApproxReport:
    """
    Flow each perturbed solution H_ε for time t0 and measure its distance from
    projective flatness.

    Returns:
        ApproxReport with one value per solved ε
    """
    path = epsilon_continuation(ProblemKind.HIGGS, bundle, epsilons, K, options, progress)
    report = ApproxReport(flow_time=t0)
    for eps, H_eps in zip(path.epsilons, path.solutions):
        trajectory = hym_flow(H_eps, bundle, dt=dt, T=t0, normalize=False, record_every=10 ** 9)
        value = approximate_flatness(bundle, trajectory.final.H, path.reference)
        report.epsilons.append(eps)
        report.values.append(value)
        logger.debug("approx eps=%.3g value=%.6e", eps, value)
        if progress:
            progress({'stage': 'approx', 'step': len(report.values), 'epsilon': eps, 'residual': value})
    return report


__all__ = ['classify_path', 'resample_bundle', 'semistability_probe', 'approximate_flatness',
           'approx_projflat_experiment']
