"""
The Higgs / projectively flat correspondence, its round trip, the comparison of
flat and holomorphic section kernels and the extension-class representatives.
"""
import itertools
import logging
from typing import Optional, Tuple, Union

import numpy as np
from scipy.linalg import eigh, subspace_angles
from scipy.sparse.linalg import LinearOperator, gmres

from core.errors import LabError, PreconditionError
from core.field_algebra import adjoint_wrt, hom_action, trace_free
from core.gauge import (chern_connection, connection_curvature, decompose_connection,
                        higgs_curvature, higgs_integrability, higgs_psi,
                        hitchin_simpson_connection, projflat_residual, pseudo_curvature)
from core.newton_krylov import NewtonOptions, pointwise_sup
from core.perturbed import harmonic_metric, hermitian_einstein_metric, uniqueness_check
from core.spectral import helmholtz_solve, lambda_contract, spectral_d
from models.bundles import HiggsBundle, HomStructure, ProjFlatBundle
from models.fields import HermitianField, MatrixFormField
from models.geometry import TorusGeometry
from models.reports import CorrespondenceReport, ExtensionResult, KernelReport
from utils import hermitian

logger = logging.getLogger(__name__)

STRUCTURE_TOL = 1e-6
KERNEL_THRESHOLD = 1e-6


# ----------------------------------------------------------------------------
# the two maps

def _frame_sup(H: HermitianField, endomorphism: np.ndarray) -> float:
    return pointwise_sup(hermitian.sqrtm_h(H.values) @ endomorphism @ hermitian.inv_sqrtm_h(H.values))


def higgs_to_projflat(bundle: HiggsBundle, H: HermitianField, tol: float = STRUCTURE_TOL) -> ProjFlatBundle:
    """
    Hitchin-Simpson connection D_H + θ + θ^{*H} of a Hermitian-Einstein metric.

    Args:
        bundle: Higgs bundle
        H: Hermitian-Einstein metric of the bundle
        tol: Bound on the Hermitian-Einstein and Bogomolov-defect residuals

    Returns:
        ProjFlatBundle whose central form is the mean of (√-1/r) tr F_H;
        ``residuals`` hold the input residuals and the flatness residual

    Raises:
        PreconditionError: H is not Hermitian-Einstein or θ is not H-parallel
    """
    parts = higgs_curvature(bundle, H)
    residuals = {
        'he_residual': _frame_sup(H, higgs_psi(bundle, H, parts)),
        'd_theta': parts.d_theta.sup_norm(),
        'curvature_perp': trace_free(parts.mixed).sup_norm(),
    }
    for name, value in residuals.items():
        if value > tol:
            raise PreconditionError(f"{name} residual {value:.3e} above tolerance {tol:.1e}", residuals)

    geometry = bundle.geometry
    central = parts.chern.trace() * (1j / bundle.rank)
    alpha = np.zeros((geometry.n, geometry.n), dtype=complex)
    for ((a,), (b,)), values in central.components.items():
        alpha[a, b] = np.mean(values[..., 0, 0])

    flat = ProjFlatBundle(geometry, bundle.rank, hitchin_simpson_connection(bundle, H), alpha, tolerance=None)
    flat.residuals = dict(residuals, **projflat_residual(flat))
    logger.debug("higgs -> projflat: flatness %.3e", flat.residuals['projective_flatness'])
    return flat


def projflat_to_higgs(flat: ProjFlatBundle, H: HermitianField, tol: float = STRUCTURE_TOL) -> HiggsBundle:
    """
    Higgs bundle (∂̄_H, ψ_H^{1,0}) of a harmonic metric.

    Args:
        flat: Projectively flat bundle
        H: Harmonic metric
        tol: Bound on sup|G_H^⊥|

    Returns:
        HiggsBundle with its integrability residuals recorded

    Raises:
        PreconditionError: The pseudo-curvature does not vanish
    """
    decomposition = decompose_connection(flat, H)
    pseudo = pseudo_curvature(flat, H, decomposition)
    defect = pseudo.trace_free.sup_norm()
    if defect > tol:
        raise PreconditionError(f"pseudo-curvature {defect:.3e} above tolerance {tol:.1e}",
                                {'pseudo_curvature': defect})
    unitary, psi = decomposition
    bundle = HiggsBundle(flat.geometry, flat.rank, unitary.part(0, 1), psi.part(1, 0), flat.lam, tolerance=None)
    bundle.residuals = higgs_integrability(bundle)
    bundle.residuals['pseudo_curvature'] = defect
    return bundle


def _data_distance(first: MatrixFormField, second: MatrixFormField) -> float:
    return (first - second).sup_norm()


def roundtrip_check(start: Union[HiggsBundle, ProjFlatBundle], K: Optional[HermitianField] = None,
                    tol: float = 1e-8, options: Optional[NewtonOptions] = None,
                    progress=None) -> CorrespondenceReport:
    """
    Compose both directions of the correspondence and compare with the start.

    The distance is the larger of the coefficient distance and the deviation of
    the two metrics from a constant multiple of each other.

    Returns:
        CorrespondenceReport; ``partial`` is set when a leg fails
    """
    report = CorrespondenceReport(direction='roundtrip')
    try:
        if isinstance(start, HiggsBundle):
            first = hermitian_einstein_metric(start, K, tol=tol, options=options, progress=progress)
            report.residuals['he_residual'] = first.residual
            if first.metric is None or not first.converged:
                raise LabError(f"Hermitian-Einstein leg: {first.message}")
            flat = higgs_to_projflat(start, first.metric)
            report.residuals['flatness'] = flat.residuals['projective_flatness']
            second = harmonic_metric(flat, first.metric, tol=tol, options=options, progress=progress)
            report.residuals['harmonic_residual'] = second.residual
            if second.metric is None or not second.converged:
                raise LabError(f"harmonic leg: {second.message}")
            back = projflat_to_higgs(flat, second.metric)
            report.residuals['pseudo_curvature'] = back.residuals['pseudo_curvature']
            coefficients = max(_data_distance(start.a, back.a), _data_distance(start.theta, back.theta))
        else:
            first = harmonic_metric(start, K, tol=tol, options=options, progress=progress)
            report.residuals['harmonic_residual'] = first.residual
            if first.metric is None or not first.converged:
                raise LabError(f"harmonic leg: {first.message}")
            higgs = projflat_to_higgs(start, first.metric)
            report.residuals['pseudo_curvature'] = higgs.residuals['pseudo_curvature']
            second = hermitian_einstein_metric(higgs, first.metric, tol=tol, options=options, progress=progress)
            report.residuals['he_residual'] = second.residual
            if second.metric is None or not second.converged:
                raise LabError(f"Hermitian-Einstein leg: {second.message}")
            back = higgs_to_projflat(higgs, second.metric)
            report.residuals['flatness'] = back.residuals['projective_flatness']
            coefficients = _data_distance(start.gamma, back.gamma)
        metric = uniqueness_check(first.metric, second.metric)['deviation']
        report.residuals['coefficient_distance'] = coefficients
        report.residuals['metric_deviation'] = metric
        report.distance = max(coefficients, metric)
    except LabError as e:
        logger.warning("round trip incomplete: %s", e)
        report.partial = True
        report.notes.append(str(e))
    return report


# ----------------------------------------------------------------------------
# kernels of D and D'' on sections

def _mode_table(geometry: TorusGeometry, kmax: int) -> np.ndarray:
    return np.array(list(itertools.product(range(-kmax, kmax + 1), repeat=2 * geometry.n)), dtype=int)


def _symbols(geometry: TorusGeometry, modes: np.ndarray, alpha: int, holomorphic: bool) -> np.ndarray:
    L = geometry.periods[alpha]
    kx = 2.0 * np.pi * modes[:, 2 * alpha] / L
    ky = 2.0 * np.pi * modes[:, 2 * alpha + 1] / L
    return 0.5 * (1j * kx + ky) if holomorphic else 0.5 * (1j * kx - ky)


def _hom_coefficient(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Matrix of X ↦ LX − XR on row-major vectorized X."""
    rows, cols = left.shape[-1], right.shape[-1]
    return (np.einsum('...ij,kl->...ikjl', left, np.eye(cols)).reshape(left.shape[:-2] + (rows * cols, rows * cols))
            - np.einsum('ij,...lk->...ikjl', np.eye(rows), right).reshape(left.shape[:-2] + (rows * cols, rows * cols)))


def section_kernel(geometry: TorusGeometry, coefficients, kmax: int,
                   threshold: float = KERNEL_THRESHOLD) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Numerical kernel of a first-order operator on vector-valued functions.

    The operator is s ↦ Σ_c (∂_c s + C_c s) over directions c = (α, holomorphic),
    with ∂_c omitted when a direction carries no derivative. Its Gram matrix on the
    Fourier modes |k_i| ≤ kmax is assembled from grid transforms of the coefficients.

    Args:
        geometry: Torus
        coefficients: List of (alpha, holomorphic, has_derivative, grid + (m, m) array)
        kmax: Largest mode per real direction
        threshold: Relative singular-value cutoff

    Returns:
        Tuple of (kernel coefficient vectors as columns, singular values ascending, mode table)
    """
    modes = _mode_table(geometry, kmax)
    nm = len(modes)
    size = coefficients[0][3].shape[-1]
    points = int(np.prod(geometry.shape))
    diff = modes[None, :, :] - modes[:, None, :]
    index = tuple(np.mod(diff[..., axis], geometry.shape[axis]) for axis in range(diff.shape[-1]))
    axes = tuple(range(len(geometry.shape)))

    def transform(values):
        return points * np.fft.ifftn(values, axes=axes)[index]

    gram = np.zeros((nm, nm, size, size), dtype=complex)
    eye = np.eye(size)
    for alpha, holomorphic, has_derivative, C in coefficients:
        sigma = _symbols(geometry, modes, alpha, holomorphic) if has_derivative else np.zeros(nm)
        gram += points * (np.conj(sigma) * sigma)[:, None, None, None] * np.eye(nm)[:, :, None, None] * eye
        gram += np.conj(sigma)[:, None, None, None] * transform(C)
        gram += sigma[None, :, None, None] * transform(np.conj(np.swapaxes(C, -1, -2)))
        gram += transform(np.matmul(np.conj(np.swapaxes(C, -1, -2)), C))

    matrix = gram.transpose(0, 2, 1, 3).reshape(nm * size, nm * size)
    matrix = 0.5 * (matrix + np.conj(matrix.T))
    values, vectors = eigh(matrix)
    singular = np.sqrt(np.clip(values, 0.0, None))
    cutoff = threshold * max(float(singular[-1]), 1e-300)
    kernel = vectors[:, singular <= cutoff]
    return kernel, singular, modes


def kernel_fields(geometry: TorusGeometry, kernel: np.ndarray, modes: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """Grid values of Galerkin kernel vectors, shape (count,) + grid + shape."""
    size = shape[0] * shape[1]
    points = int(np.prod(geometry.shape))
    out = []
    for column in kernel.T:
        coeffs = np.zeros(geometry.shape + (size,), dtype=complex)
        table = column.reshape(len(modes), size)
        for m, row in zip(modes, table):
            coeffs[tuple(np.mod(m, geometry.shape))] = row
        values = points * np.fft.ifftn(coeffs, axes=tuple(range(len(geometry.shape))))
        out.append(values.reshape(geometry.shape + shape))
    return np.array(out).reshape((len(out),) + geometry.shape + shape)


def _default_kmax(geometry: TorusGeometry) -> int:
    kmax = 4 if geometry.n == 1 else 2
    limit = (min(geometry.grid) // 2 - 1) // 2
    return max(1, min(kmax, limit))


def _operator_terms(connection: MatrixFormField, derivatives, n: int):
    terms = []
    for alpha in range(n):
        terms.append((alpha, True, (1, 0) in derivatives, connection.coefficient(((alpha,), ()))))
        terms.append((alpha, False, (0, 1) in derivatives, connection.coefficient(((), (alpha,)))))
    return terms


def h0_equality_check(bundle: HiggsBundle, H: HermitianField, kmax: Optional[int] = None,
                      threshold: float = KERNEL_THRESHOLD) -> KernelReport:
    """
    Compare the parallel sections of D_{H,θ} with the sections killed by D'' = ∂̄_E + θ.

    Both kernels are computed on the same Fourier-truncated section space, so the
    principal angles between them are angles between coefficient subspaces.

    Returns:
        KernelReport with dimensions, principal angles and the smallest singular values
    """
    geometry = bundle.geometry
    kmax = kmax or _default_kmax(geometry)
    flatness = higgs_curvature(bundle, H).total.sup_norm()
    if flatness > STRUCTURE_TOL:
        logger.warning("Hitchin-Simpson curvature %.3e is not small, kernels may differ", flatness)

    full = hitchin_simpson_connection(bundle, H)
    holomorphic = bundle.a + bundle.theta
    flat_kernel, flat_sv, _ = section_kernel(
        geometry, _operator_terms(full, {(1, 0), (0, 1)}, geometry.n), kmax, threshold)
    holo_kernel, holo_sv, _ = section_kernel(
        geometry, _operator_terms(holomorphic, {(0, 1)}, geometry.n), kmax, threshold)

    angles = []
    if flat_kernel.shape[1] and holo_kernel.shape[1]:
        angles = [float(a) for a in subspace_angles(flat_kernel, holo_kernel)]
    report = KernelReport(
        dim_flat=flat_kernel.shape[1],
        dim_holomorphic=holo_kernel.shape[1],
        angles=angles,
        singular_values_flat=[float(s) for s in flat_sv[:8]],
        singular_values_holomorphic=[float(s) for s in holo_sv[:8]],
    )
    logger.info("H0 check: dim D = %d, dim D'' = %d, max angle %.3e",
                report.dim_flat, report.dim_holomorphic, report.max_angle)
    return report


# ----------------------------------------------------------------------------
# extension representatives

def hom_operators(structure: HomStructure) -> Tuple[Tuple[MatrixFormField, MatrixFormField],
                                                      Tuple[MatrixFormField, MatrixFormField]]:
    """Coefficient pairs of D'' = ∂̄ + a + θ and D' = ∂ + b + θ^{*H} on S and Q."""
    def pieces(bundle: HiggsBundle, H: HermitianField):
        return (bundle.a + bundle.theta,
                chern_connection(bundle, H) + adjoint_wrt(bundle.theta, H))

    s_dd, s_d = pieces(structure.target, structure.target_metric)
    q_dd, q_d = pieces(structure.source, structure.source_metric)
    return (s_dd, q_dd), (s_d, q_d)


def _apply(pair, kind, X: MatrixFormField) -> MatrixFormField:
    return spectral_d(X, kind) + hom_action(pair[0], pair[1], X)


def _lambda_values(form: MatrixFormField) -> np.ndarray:
    return lambda_contract(form.part(1, 1)).values * 1j


def harmonic_extension_rep(beta: MatrixFormField, structure: HomStructure, tol: float = 1e-10,
                           restart: int = 50, maxiter: int = 20) -> ExtensionResult:
    """
    Representative β̃ = β + D''γ of [β] with √-1Λ_ω D'β̃ = 0.

    Solves √-1Λ_ω D'D''γ = −√-1Λ_ω D'β by GMRES preconditioned with the inverse
    complex Laplacian, on the complement of the Galerkin kernel of D.

    Args:
        beta: Hom(Q, S)-valued 1-form with D''β = 0
        structure: Flat Higgs-Hermitian structure on Hom(Q, S)
        tol: Relative GMRES tolerance
        restart: GMRES restart length
        maxiter: GMRES outer iterations

    Returns:
        ExtensionResult with residuals and the Krylov iteration count

    Raises:
        PreconditionError: D''β or the coefficient curvature does not vanish
    """
    geometry = structure.geometry
    shape = structure.section_shape
    double_prime, prime = hom_operators(structure)

    closed = _apply(double_prime, (0, 1), beta).sup_norm()
    curvature_sup = max(higgs_curvature(structure.target, structure.target_metric).total.sup_norm(),
                        higgs_curvature(structure.source, structure.source_metric).total.sup_norm())
    if closed > STRUCTURE_TOL or curvature_sup > STRUCTURE_TOL:
        raise PreconditionError("extension data must be D''-closed over a flat coefficient structure",
                                {'dbar_beta': closed, 'curvature': curvature_sup})

    # kernel of D on Hom-sections
    left, right = (double_prime[0] + prime[0]), (double_prime[1] + prime[1])
    terms = []
    for alpha in range(geometry.n):
        for holo, key in ((True, ((alpha,), ())), (False, ((), (alpha,)))):
            C = _hom_coefficient(left.coefficient(key), right.coefficient(key))
            terms.append((alpha, holo, True, C))
    kmax = _default_kmax(geometry)
    kernel, _, modes = section_kernel(geometry, terms, kmax)
    basis = kernel_fields(geometry, kernel, modes, shape).reshape(kernel.shape[1], -1)
    if len(basis):
        basis, _ = np.linalg.qr(basis.T)
        basis = basis.T

    def project(v):
        return v - basis.T @ (np.conj(basis) @ v) if len(basis) else v

    grid_shape = geometry.shape + shape

    def operator(v):
        gamma = MatrixFormField.scalar(geometry, v.reshape(grid_shape))
        return _lambda_values(_apply(prime, (1, 0), _apply(double_prime, (0, 1), gamma))).ravel()

    def precondition(v):
        return project(helmholtz_solve(project(v).reshape(grid_shape), 0.0, geometry, mean_tol=np.inf).ravel())

    rhs = -_lambda_values(_apply(prime, (1, 0), beta)).ravel()
    rhs_norm = float(np.linalg.norm(rhs))
    kernel_component = float(np.linalg.norm(rhs - project(rhs))) / max(rhs_norm, 1e-300) if len(basis) else 0.0
    rhs = project(rhs)

    size = rhs.size
    A = LinearOperator((size, size), matvec=lambda v: project(operator(project(v))), dtype=complex)
    M = LinearOperator((size, size), matvec=precondition, dtype=complex)
    history = []
    if rhs_norm == 0.0:
        solution = np.zeros(size, dtype=complex)
    else:
        solution, info = gmres(A, rhs, rtol=tol, atol=0.0, restart=restart, maxiter=maxiter, M=M,
                               callback=lambda r: history.append(r), callback_type='pr_norm')
        if info != 0:
            logger.warning("extension solve stopped with GMRES info %d", info)
        solution = project(solution)

    gamma = MatrixFormField.scalar(geometry, solution.reshape(grid_shape))
    beta_tilde = beta + _apply(double_prime, (0, 1), gamma)
    d_prime = _apply(prime, (1, 0), beta_tilde)
    result = ExtensionResult(beta=beta_tilde, gamma=gamma, iterations=len(history))
    result.residuals = {
        'lambda_residual': float(np.max(np.abs(_lambda_values(d_prime)))),
        'full_residual': d_prime.sup_norm(),
        'closedness': _apply(double_prime, (0, 1), beta_tilde).sup_norm(),
        'kernel_component': kernel_component,
    }
    logger.debug("extension: %d Krylov iterations, residuals %s", result.iterations, result.residuals)
    return result


def extension_flat_connection(structure: HomStructure, beta_tilde: MatrixFormField) -> ProjFlatBundle:
    """
    Block connection [[Γ_S, β̃], [0, Γ_Q]] on S ⊕ Q built from Hitchin-Simpson connections.

    Returns:
        ProjFlatBundle (unchecked) whose ``residuals`` hold its flatness residual
    """
    geometry = structure.geometry
    rs, rq = structure.section_shape
    gamma_s = hitchin_simpson_connection(structure.target, structure.target_metric)
    gamma_q = hitchin_simpson_connection(structure.source, structure.source_metric)
    keys = set(gamma_s.components) | set(gamma_q.components) | set(beta_tilde.components)
    comps = {}
    for key in keys:
        block = np.zeros(geometry.shape + (rs + rq, rs + rq), dtype=complex)
        block[..., :rs, :rs] = gamma_s.coefficient(key)
        block[..., :rs, rs:] = beta_tilde.coefficient(key)
        block[..., rs:, rs:] = gamma_q.coefficient(key)
        comps[key] = block
    gamma = MatrixFormField(geometry, comps, (rs + rq, rs + rq))
    flat = ProjFlatBundle(geometry, rs + rq, gamma, tolerance=None)
    flat.residuals = {'flatness': connection_curvature(gamma).sup_norm()}
    return flat


__all__ = ['higgs_to_projflat', 'projflat_to_higgs', 'roundtrip_check', 'section_kernel',
           'kernel_fields', 'h0_equality_check', 'hom_operators', 'harmonic_extension_rep',
           'extension_flat_connection']
