"""Perturbed Hermitian-Einstein and harmonic-metric equations solved by ε-continuation."""
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import ConvergenceError, LabError
from core.field_algebra import metric_from_sigma, relative_endomorphism, sigma_from_metric, trace_free
from core.gauge import (decompose_connection, higgs_curvature, higgs_psi, log_derivative_term, log_endomorphism,
                        pseudo_curvature, theta_quadratic)
from core.newton_krylov import HermitianPacker, NewtonOptions, NewtonResult, newton_krylov, pointwise_sup
from core.spectral import helmholtz_solve, integrate, lambda_contract
from models.bundles import HiggsBundle, ProjFlatBundle
from models.enums import ProblemKind, Regime
from models.fields import HermitianField
from models.flow_state import EpsilonPath
from models.reports import HarmonicResult
from utils import hermitian

logger = logging.getLogger(__name__)

Structure = Union[HiggsBundle, ProjFlatBundle]
ProgressCallback = Callable[[Dict], None]

MIN_PRECONDITIONER_MASS = 1e-3
C0_SLACK = 1e-6
NORMALIZATION_PASSES = 6
NORMALIZATION_TOL = 1e-13
EXPLICIT_REFERENCE_TOL = 1e-8


def default_schedule(k_max: int = 10) -> List[float]:
    """ε_k = 2^{-k} for k = 0..k_max."""
    return [2.0 ** -k for k in range(k_max + 1)]


def _scale_metric(K: HermitianField, phi: np.ndarray) -> HermitianField:
    return HermitianField(K.geometry, K.values * np.exp(phi)[..., None, None])


def _iterate_conformal(K: HermitianField,
                       rhs_of: Callable[[HermitianField], np.ndarray]) -> Tuple[HermitianField, np.ndarray]:
    """
    Repeat K ↦ K e^φ with √-1Λ∂∂̄φ = rhs_of(K) until the right-hand side is at roundoff.

    The first pass checks solvability; later passes only remove the discrete
    remainder of the previous one.
    """
    total = np.zeros(K.geometry.shape)
    rhs = rhs_of(K)
    first = max(1.0, float(np.max(np.abs(rhs))))
    for step in range(NORMALIZATION_PASSES):
        if step > 0:
            rhs = rhs - np.mean(rhs)
        phi = helmholtz_solve(rhs, 0.0, K.geometry)
        K = _scale_metric(K, phi)
        total = total + phi
        rhs = rhs_of(K)
        if np.max(np.abs(rhs - np.mean(rhs))) <= NORMALIZATION_TOL * first:
            break
    return K, total


# ----------------------------------------------------------------------------
# normalizations

def conformal_normalization_higgs(bundle: HiggsBundle, K: HermitianField) -> Tuple[HermitianField, np.ndarray]:
    """
    Rescale K by e^φ so that tr Ψ_K vanishes pointwise.

    φ solves √-1Λ∂∂̄φ = tr Ψ_K / r.

    Returns:
        Tuple of (normalized metric, φ)

    Raises:
        UnsolvableError: tr Ψ_K has non-zero mean (λ inconsistent with the degree)
    """
    def rhs_of(metric: HermitianField) -> np.ndarray:
        return np.real(np.trace(higgs_psi(bundle, metric), axis1=-2, axis2=-1)) / bundle.rank

    return _iterate_conformal(K, rhs_of)


def _contracted_pseudo(flat: ProjFlatBundle, H: HermitianField, decomposition=None) -> np.ndarray:
    return pseudo_curvature(flat, H, decomposition).contracted.values


def conformal_normalization_projflat(flat: ProjFlatBundle, K: HermitianField) -> Tuple[HermitianField, np.ndarray]:
    """
    Rescale K by e^φ so that tr √-1Λ_ω G_K = rλ.

    φ solves √-1Λ∂∂̄φ = 2λ − 2 tr(√-1Λ_ω G_K) / r.

    Returns:
        Tuple of (normalized metric, φ)
    """
    def rhs_of(metric: HermitianField) -> np.ndarray:
        tr_g = np.real(np.trace(_contracted_pseudo(flat, metric), axis1=-2, axis2=-1))
        return 2.0 * flat.lam - 2.0 * tr_g / flat.rank

    return _iterate_conformal(K, rhs_of)


def explicit_epsilon_one(flat: ProjFlatBundle, K_tilde: HermitianField) -> Tuple[HermitianField, HermitianField]:
    """
    Reference metric with a closed-form solution at ε = 1.

    With h₁ = exp(4(√-1Λ_ω G_K̃ − λ Id)^⊥) and K = K̃h₁⁻¹, the metric H = K̃
    (that is h = h₁) solves the projectively flat perturbed equation at ε = 1
    up to the trace defect of the normalization of K̃.

    Returns:
        Tuple of (K, H at ε = 1)
    """
    rank = flat.rank
    X = 4.0 * (_contracted_pseudo(flat, K_tilde) - flat.lam * np.eye(rank))
    X = X - (np.trace(X, axis1=-2, axis2=-1) / rank)[..., None, None] * np.eye(rank)
    root = hermitian.sqrtm_h(K_tilde.values)
    inv_root = hermitian.inv_sqrtm_h(K_tilde.values)
    # K̃h₁⁻¹ = K̃^{1/2} exp(−K̃^{1/2} X K̃^{-1/2}) K̃^{1/2}
    sym = hermitian.hermitian_part(root @ X @ inv_root)
    K = HermitianField(K_tilde.geometry, hermitian.hermitian_part(root @ hermitian.expm_h(-sym) @ root))
    return K, K_tilde.copy()


def explicit_reference_defect(flat: ProjFlatBundle, K: HermitianField, H1: HermitianField) -> float:
    """sup of the ε = 1 residual at the closed-form solution, as seen on the grid."""
    system = _PerturbedSystem(flat, K, 1.0, True)
    matrix, _ = system.residual_matrix(sigma_from_metric(K, H1))
    return pointwise_sup(matrix)


def projflat_reference(flat: ProjFlatBundle, K: HermitianField,
                       tol: float = EXPLICIT_REFERENCE_TOL) -> Tuple[HermitianField, Optional[HermitianField]]:
    """
    Normalized reference metric of the projectively flat continuation.

    The closed-form ε = 1 reference is used only when the grid resolves it, that is
    when its ε = 1 residual stays below ``tol``. Otherwise the conformally normalized
    metric is returned and the ε = 1 solve starts from it.

    Returns:
        Tuple of (reference K, ε = 1 solution or None)
    """
    K_tilde, _ = conformal_normalization_projflat(flat, K)
    K_explicit, H1 = explicit_epsilon_one(flat, K_tilde)
    defect = explicit_reference_defect(flat, K_explicit, H1)
    if defect <= tol:
        return K_explicit, H1
    logger.debug("explicit eps=1 reference not resolved on the grid (defect %.3e), using K~", defect)
    return K_tilde, None


# ----------------------------------------------------------------------------
# Newton solves

class _PerturbedSystem:
    """Packed residual and preconditioner of one perturbed equation at fixed ε."""

    def __init__(self, structure: Structure, K: HermitianField, eps: float, trace_free: bool):
        self.structure = structure
        self.kind = ProblemKind.HIGGS if isinstance(structure, HiggsBundle) else ProblemKind.PROJFLAT
        self.K = K
        self.eps = eps
        self.geometry = K.geometry
        self.rank = structure.rank
        self.packer = HermitianPacker(self.geometry.shape, self.rank, trace_free)
        self.K_root = hermitian.sqrtm_h(K.values)
        self.K_inv_root = hermitian.inv_sqrtm_h(K.values)
        if self.kind == ProblemKind.PROJFLAT:
            self.decomposition = decompose_connection(structure, K)
            contracted = _contracted_pseudo(structure, K, self.decomposition)
            self.k_term = 4.0 * (contracted - structure.lam * np.eye(self.rank))

    def metric(self, sigma: np.ndarray) -> HermitianField:
        return metric_from_sigma(self.K, sigma)

    def residual_matrix(self, sigma: np.ndarray) -> Tuple[np.ndarray, HermitianField]:
        """Residual in the Hermitian frame H^{1/2}·R·H^{-1/2}, and the metric."""
        H = self.metric(sigma)
        s = self.K_inv_root @ sigma @ self.K_root
        if self.kind == ProblemKind.HIGGS:
            R = higgs_psi(self.structure, H) + self.eps * s
        else:
            dd = log_derivative_term(self.structure, self.K, H, self.decomposition).part(1, 1)
            R = self.k_term + lambda_contract(dd).values * 1j - self.eps * s
        root = hermitian.sqrtm_h(H.values)
        inv_root = hermitian.inv_sqrtm_h(H.values)
        return root @ R @ inv_root, H

    def residual(self, x: np.ndarray) -> np.ndarray:
        matrix, _ = self.residual_matrix(self.packer.unpack(x))
        return self.packer.pack(matrix)

    def measure(self, f: np.ndarray) -> float:
        return pointwise_sup(self.packer.unpack(f))

    def precondition(self, v: np.ndarray) -> np.ndarray:
        matrices = self.packer.unpack(v)
        if self.kind == ProblemKind.HIGGS:
            out = -helmholtz_solve(matrices, max(self.eps, MIN_PRECONDITIONER_MASS), self.geometry)
        else:
            out = 0.5 * helmholtz_solve(matrices, max(0.5 * self.eps, MIN_PRECONDITIONER_MASS), self.geometry)
        return self.packer.pack(out)


def _newton_solve(structure: Structure, K: HermitianField, eps: float, init: Optional[HermitianField],
                  trace_free: bool, options: Optional[NewtonOptions],
                  progress: Optional[ProgressCallback], stage: str) -> Tuple[HermitianField, NewtonResult]:
    system = _PerturbedSystem(structure, K, eps, trace_free)
    if init is None:
        sigma0 = np.zeros(K.values.shape, dtype=complex)
    else:
        sigma0 = sigma_from_metric(K, init)
    x0 = system.packer.pack(sigma0)
    try:
        result = newton_krylov(system.residual, x0, system.measure, system.precondition,
                               options, progress, stage)
    except ConvergenceError as e:
        partial = e.partial
        if partial is not None:
            H = system.metric(system.packer.unpack(partial.x))
            e.diagnostics['condition_number'] = H.condition_number()
            e.partial = H
        raise
    H = system.metric(system.packer.unpack(result.x))
    cond = H.condition_number()
    if cond > 1e12:
        logger.warning("%s: solution metric is ill-conditioned (cond %.3e)", stage, cond)
    return H, result


def solve_perturbed_higgs(K: HermitianField, bundle: HiggsBundle, eps: float,
                          init: Optional[HermitianField] = None, normalize: bool = True,
                          options: Optional[NewtonOptions] = None,
                          progress: Optional[ProgressCallback] = None) -> HermitianField:
    """
    Solve √-1Λ_ω(F_H + [θ, θ^{*H}]) − λ Id + ε log(K⁻¹H) = 0.

    Args:
        K: Reference metric
        bundle: Higgs bundle
        eps: ε ≥ 0
        init: Starting metric (K when None)
        normalize: Conformally normalize K first and keep log(K⁻¹H) trace-free
        options: Newton tolerances
        progress: Callable receiving iteration records

    Returns:
        Metric H (relative to the normalized K when ``normalize`` is set)

    Raises:
        ConvergenceError: Newton iteration failed
    """
    if normalize:
        K, _ = conformal_normalization_higgs(bundle, K)
    H, _ = _newton_solve(bundle, K, eps, init, normalize, options, progress, f"higgs eps={eps:.3g}")
    return H


def solve_perturbed_projflat(K: HermitianField, flat: ProjFlatBundle, eps: float,
                             init: Optional[HermitianField] = None, normalize: bool = True,
                             options: Optional[NewtonOptions] = None,
                             progress: Optional[ProgressCallback] = None) -> HermitianField:
    """
    Solve 4√-1Λ_ω G_K + √-1Λ_ω D(h⁻¹D^c_K h) − ε log h − 4λ Id = 0 for H = Kh.

    With ``normalize`` the reference is conformally normalized and, when the grid
    resolves it, replaced by the metric whose ε = 1 solution is explicit; that
    solution is the starting point when ``init`` is None and ε = 1.

    Returns:
        Metric H
    """
    if normalize:
        K, H1 = projflat_reference(flat, K)
        if init is None and H1 is not None and eps == 1.0:
            init = H1
    H, _ = _newton_solve(flat, K, eps, init, normalize, options, progress, f"projflat eps={eps:.3g}")
    return H


# ----------------------------------------------------------------------------
# continuation

def _reference_sup(structure: Structure, K: HermitianField) -> float:
    if isinstance(structure, HiggsBundle):
        R = higgs_psi(structure, K)
    else:
        R = _contracted_pseudo(structure, K) - structure.lam * np.eye(structure.rank)
    root = hermitian.sqrtm_h(K.values)
    return pointwise_sup(root @ R @ hermitian.inv_sqrtm_h(K.values))


def path_diagnostics(structure: Structure, K: HermitianField, H: HermitianField, eps: float) -> Dict[str, float]:
    """sup and L² size of log h, the equation defect sup|Ψ_H|_H and det h drift."""
    geometry = K.geometry
    sigma = sigma_from_metric(K, H)
    norm_sq = np.real(np.einsum('...ij,...ji->...', sigma, sigma))
    log_sup = float(np.sqrt(np.max(norm_sq)))
    log_l2 = float(np.sqrt(max(np.real(integrate(norm_sq, geometry)), 0.0)))
    h = relative_endomorphism(K, H)
    det_dev = float(np.max(np.abs(np.linalg.det(h.values) - 1.0)))
    return {
        'log_sup': log_sup,
        'log_l2': log_l2,
        'eps_log_sup': eps * log_sup,
        'eps_log_l2': eps * log_l2,
        'psi_sup': _reference_sup(structure, H),
        'det_deviation': det_dev,
    }


def classify_regime(norms: Sequence[float], window: int = 5) -> Regime:
    """
    Decide whether ‖log h_ε‖ settles or keeps growing over the last ``window`` points.

    Increments that shrink at least by half across the window count as bounded;
    positive increments that do not shrink count as growth.
    """
    if len(norms) < window:
        return Regime.UNDECIDED
    tail = np.asarray(norms[-window:], dtype=float)
    scale = max(1.0, float(np.max(np.abs(tail))))
    increments = np.diff(tail)
    if np.max(np.abs(tail)) <= 1e-8:
        return Regime.BOUNDED
    if np.all(increments > 0) and increments[-1] >= 0.5 * increments[0]:
        return Regime.GROWING
    if abs(increments[-1]) <= 0.5 * abs(increments[0]) + 1e-12 * scale:
        return Regime.BOUNDED
    return Regime.UNDECIDED


def epsilon_continuation(problem: Union[ProblemKind, str], structure: Structure,
                         schedule: Optional[Sequence[float]] = None,
                         K: Optional[HermitianField] = None,
                         options: Optional[NewtonOptions] = None,
                         progress: Optional[ProgressCallback] = None) -> EpsilonPath:
    """
    Solve the perturbed equation along a decreasing ε schedule with warm starts.

    A failing solve ends the path at that ε; earlier solutions are kept and the
    failure message is stored on the path.

    Args:
        problem: 'higgs' or 'projflat'
        structure: HiggsBundle or ProjFlatBundle
        schedule: Strictly decreasing ε values in (0, 1]
        K: Reference metric (identity when None)
        options: Newton tolerances
        progress: Callable receiving per-ε and per-iteration records

    Returns:
        EpsilonPath
    """
    problem = ProblemKind(problem)
    schedule = list(schedule) if schedule is not None else default_schedule()
    if K is None:
        K = HermitianField.identity(structure.geometry, structure.rank)

    init = None
    if problem == ProblemKind.HIGGS:
        K, _ = conformal_normalization_higgs(structure, K)
    else:
        K, H1 = projflat_reference(structure, K)
        if H1 is not None and schedule and schedule[0] == 1.0:
            init = H1

    path = EpsilonPath(problem=problem, reference=K, schedule=schedule,
                       reference_sup=_reference_sup(structure, K))
    for eps in schedule:
        stage = f"{problem.value} eps={eps:.3g}"
        try:
            H, result = _newton_solve(structure, K, eps, init, True, options, progress, stage)
        except LabError as e:
            logger.warning("continuation stopped at eps=%.3g: %s", eps, e)
            path.error = f"eps={eps:.6g}: {e}"
            break
        record = path_diagnostics(structure, K, H, eps)
        record['newton_iterations'] = result.iterations
        record['residual'] = result.residual
        path.epsilons.append(eps)
        path.solutions.append(H)
        path.diagnostics.append(record)
        if progress:
            progress(dict(record, stage='continuation', step=len(path.epsilons), epsilon=eps))
        init = H

    path.regime = classify_regime(path.series('log_l2'))
    return path


def c0_bound_check(path: EpsilonPath, slack: float = C0_SLACK) -> List[Dict[str, float]]:
    """
    Maximum-principle bound ε·sup|log h_ε| ≤ c·sup|equation defect at K|.

    c = 1 for the Higgs equation and 4 for the projectively flat one.

    Returns:
        One record per ε with lhs, bound and ok
    """
    factor = 1.0 if path.problem == ProblemKind.HIGGS else 4.0
    bound = factor * path.reference_sup
    rows = []
    for eps, record in zip(path.epsilons, path.diagnostics):
        lhs = record['eps_log_sup']
        rows.append({'epsilon': eps, 'lhs': lhs, 'bound': bound,
                     'ok': bool(lhs <= bound * (1.0 + slack) + 1e-12)})
    return rows


def integral_identity_residual(flat: ProjFlatBundle, K: HermitianField, H: HermitianField,
                               eps: float) -> Dict[str, float]:
    """
    −∫4 tr((√-1Λ_ωG_K − λ)s) + ∫⟨Θ(s)Ds, Ds⟩_K + ε‖s‖² for a perturbed solution H = Ke^s.

    Returns:
        Dict with the three terms and the relative residual
    """
    geometry = K.geometry
    s = log_endomorphism(K, H)
    X = _contracted_pseudo(flat, K) - flat.lam * np.eye(flat.rank)
    t_curv = -4.0 * integrate(np.einsum('...ij,...ji->...', X, s), geometry)
    t_theta = integrate(theta_quadratic(flat, K, s), geometry)
    t_mass = eps * integrate(np.einsum('...ij,...ji->...', s, s), geometry)
    total = t_curv + t_theta + t_mass
    scale = abs(t_curv) + abs(t_theta) + abs(t_mass)
    return {
        'curvature_term': float(np.real(t_curv)),
        'theta_term': float(np.real(t_theta)),
        'mass_term': float(np.real(t_mass)),
        'relative': float(abs(total) / scale) if scale > 0 else 0.0,
    }


# ----------------------------------------------------------------------------
# ε → 0

def _options_for(tol: float) -> NewtonOptions:
    return NewtonOptions(tol=min(NewtonOptions().tol, 0.1 * tol))


def _polish(structure: Structure, K: HermitianField, init: HermitianField,
            options: Optional[NewtonOptions], progress) -> HermitianField:
    H, _ = _newton_solve(structure, K, 0.0, init, True, options, progress, f"{structure.__class__.__name__} polish")
    return H


def _schedule_to(eps_min: float) -> List[float]:
    schedule, eps = [], 1.0
    while eps >= eps_min:
        schedule.append(eps)
        eps *= 0.5
    return schedule


def hermitian_einstein_metric(bundle: HiggsBundle, K: Optional[HermitianField] = None, tol: float = 1e-8,
                              eps_min: float = 1e-4, schedule: Optional[Sequence[float]] = None,
                              options: Optional[NewtonOptions] = None,
                              progress: Optional[ProgressCallback] = None) -> HarmonicResult:
    """
    Hermitian-Einstein metric by continuation to small ε and an ε = 0 Newton polish.

    Without explicit ``options`` the Newton tolerance is tightened to a tenth of ``tol``.

    Returns:
        HarmonicResult; ``curvature_sup`` is sup|(F^{1,1}_{H,θ})^⊥|
    """
    options = options or _options_for(tol)
    path = epsilon_continuation(ProblemKind.HIGGS, bundle, schedule or _schedule_to(eps_min), K, options, progress)
    if not path.solutions:
        return HarmonicResult(None, path, message=f"continuation failed: {path.error}")
    last = path.solutions[-1]
    if path.regime == Regime.GROWING:
        return HarmonicResult(last, path, message="log h_eps grows along the path: bundle not polystable")
    try:
        H = _polish(bundle, path.reference, last, options, progress)
    except ConvergenceError as e:
        return HarmonicResult(last, path, message=f"polish failed: {e}")

    psi = higgs_psi(bundle, H)
    root = hermitian.sqrtm_h(H.values)
    residual = pointwise_sup(root @ psi @ hermitian.inv_sqrtm_h(H.values))
    curvature_sup = trace_free(higgs_curvature(bundle, H).mixed).sup_norm()
    converged = residual < tol
    return HarmonicResult(H, path, converged, residual, curvature_sup,
                          "converged" if converged else f"residual {residual:.3e} above {tol:.1e}")


def harmonic_metric(flat: ProjFlatBundle, K: Optional[HermitianField] = None, tol: float = 1e-8,
                    eps_min: float = 1e-4, schedule: Optional[Sequence[float]] = None,
                    options: Optional[NewtonOptions] = None,
                    progress: Optional[ProgressCallback] = None) -> HarmonicResult:
    """
    Harmonic metric √-1Λ_ω G_H = λ Id of a projectively flat bundle.

    Runs the ε-continuation to ``eps_min``, then solves the ε = 0 equation from the
    last solution. Growth of ‖log h_ε‖ along the path is reported as "not simple"
    together with the growth curve.

    Returns:
        HarmonicResult; ``curvature_sup`` is sup|G_H^⊥|
    """
    options = options or _options_for(tol)
    path = epsilon_continuation(ProblemKind.PROJFLAT, flat, schedule or _schedule_to(eps_min), K, options, progress)
    if not path.solutions:
        return HarmonicResult(None, path, message=f"continuation failed: {path.error}")
    last = path.solutions[-1]
    if path.regime == Regime.GROWING:
        return HarmonicResult(last, path, message="not simple / no harmonic metric found")
    try:
        H = _polish(flat, path.reference, last, options, progress)
    except ConvergenceError as e:
        return HarmonicResult(last, path, message=f"not simple / no harmonic metric found ({e})")

    pseudo = pseudo_curvature(flat, H)
    contracted = pseudo.contracted.values - flat.lam * np.eye(flat.rank)
    root = hermitian.sqrtm_h(H.values)
    residual = pointwise_sup(root @ contracted @ hermitian.inv_sqrtm_h(H.values))
    converged = residual < tol
    return HarmonicResult(H, path, converged, residual, pseudo.trace_free.sup_norm(),
                          "converged" if converged else f"residual {residual:.3e} above {tol:.1e}")


def uniqueness_check(H1: HermitianField, H2: HermitianField) -> Dict[str, float]:
    """
    Deviation of H₁H₂⁻¹ from a constant multiple of the identity.

    Returns:
        Dict with the fitted constant and the relative sup deviation
    """
    ratio = H1.values @ np.linalg.inv(H2.values)
    rank = H1.rank
    constant = float(np.real(np.mean(np.trace(ratio, axis1=-2, axis2=-1)))) / rank
    deviation = float(np.max(np.abs(ratio - constant * np.eye(rank)))) / abs(constant)
    return {'constant': constant, 'deviation': deviation}
