"""
Test the perturbed equations, the ε-continuation and the metric solvers.
Rank-1 and block-diagonal data are compared with linear spectral solves.
"""
import sys
from pathlib import Path

import numpy as np

# Add project root to path
sys.path.append(str(Path(__file__).parent))

from core.gauge import higgs_psi, pseudo_curvature
from core.newton_krylov import NewtonOptions
from core.perturbed import (EXPLICIT_REFERENCE_TOL, c0_bound_check, classify_regime, conformal_normalization_higgs,
                            conformal_normalization_projflat, epsilon_continuation, explicit_reference_defect,
                            harmonic_metric, integral_identity_residual, projflat_reference, solve_perturbed_higgs,
                            solve_perturbed_projflat, uniqueness_check)
from core.spectral import build_torus, helmholtz_solve, random_smooth
from models.bundles import HiggsBundle
from models.enums import ProblemKind, Regime
from models.fields import HermitianField, MatrixFormField
from utils.presets import gauge_flat, random_smooth_higgs

TIGHT = NewtonOptions(tol=1e-11)


def _line_bundle(geometry, seed, amplitude=0.1):
    rng = np.random.default_rng(seed)
    c = random_smooth(geometry, rng, 1, amplitude)
    return HiggsBundle(geometry, 1, a=MatrixFormField.single(geometry, ((), (0,)), c)), c


def _linear_solution(bundle, eps):
    geometry = bundle.geometry
    psi = np.real(higgs_psi(bundle, HermitianField.identity(geometry, bundle.rank))[..., 0, 0])
    return helmholtz_solve(psi, eps, geometry)


def test_rank_one_matches_linear_solve():
    geometry = build_torus(1, 1.0, 16)
    bundle, _ = _line_bundle(geometry, 0)
    K = HermitianField.identity(geometry, 1)
    for eps in (1.0, 0.25, 2.0 ** -6):
        H = solve_perturbed_higgs(K, bundle, eps, normalize=False, options=TIGHT)
        log_h = np.log(np.real(H.values[..., 0, 0]))
        assert np.max(np.abs(log_h - _linear_solution(bundle, eps))) < 1e-8


def test_block_diagonal_decouples():
    geometry = build_torus(1, 1.0, 16)
    first, c1 = _line_bundle(geometry, 1)
    second, c2 = _line_bundle(geometry, 2)
    block = np.zeros(geometry.shape + (2, 2), dtype=complex)
    block[..., 0, 0] = c1
    block[..., 1, 1] = c2
    bundle = HiggsBundle(geometry, 2, a=MatrixFormField.single(geometry, ((), (0,)), block))

    eps = 0.5
    H = solve_perturbed_higgs(HermitianField.identity(geometry, 2), bundle, eps, normalize=False, options=TIGHT)
    assert np.max(np.abs(H.values[..., 0, 1])) < 1e-8
    for index, line in ((0, first), (1, second)):
        log_h = np.log(np.real(H.values[..., index, index]))
        assert np.max(np.abs(log_h - _linear_solution(line, eps))) < 1e-8


def test_conformal_normalization_clears_trace():
    geometry = build_torus(1, 1.0, 16)
    rng = np.random.default_rng(7)
    K = HermitianField(geometry, np.eye(2) + random_smooth(geometry, rng, 1, 0.1, (2, 2), hermitian=True))

    higgs = gauge_flat(geometry, ProblemKind.HIGGS, 2, np.random.default_rng(8), 1, 0.1).structure
    K_higgs, _ = conformal_normalization_higgs(higgs, K)
    tr_psi = np.trace(higgs_psi(higgs, K_higgs), axis1=-2, axis2=-1)
    assert np.max(np.abs(tr_psi)) < 1e-10

    flat = gauge_flat(geometry, ProblemKind.PROJFLAT, 2, np.random.default_rng(9), 1, 0.05).structure
    K_flat, _ = conformal_normalization_projflat(flat, K)
    tr_g = np.trace(pseudo_curvature(flat, K_flat).contracted.values, axis1=-2, axis2=-1)
    assert np.max(np.abs(np.real(tr_g) - flat.rank * flat.lam)) < 1e-10


def test_continuation_keeps_determinant_and_c0_bound():
    geometry = build_torus(1, 1.0, 16)
    for seed in range(3):
        bundle = random_smooth_higgs(geometry, 2, np.random.default_rng(seed))
        path = epsilon_continuation(ProblemKind.HIGGS, bundle, [1.0, 0.5, 0.25, 0.125])
        assert path.complete
        assert max(path.series('det_deviation')) < 1e-9
        assert all(row['ok'] for row in c0_bound_check(path))
        assert len(path.rows()) == 4


def test_projflat_integral_identity():
    geometry = build_torus(1, 1.0, 32)
    flat = gauge_flat(geometry, ProblemKind.PROJFLAT, 2, np.random.default_rng(3), 1, 0.05).structure
    path = epsilon_continuation(ProblemKind.PROJFLAT, flat, [1.0, 0.5], options=TIGHT)
    assert path.complete
    assert all(row['ok'] for row in c0_bound_check(path))
    for eps, H in zip(path.epsilons, path.solutions):
        identity = integral_identity_residual(flat, path.reference, H, eps)
        assert identity['relative'] < 1e-6


def test_projflat_reference_is_resolved_on_gauge_flat_data():
    geometry = build_torus(1, 1.0, 16)
    flat = gauge_flat(geometry, ProblemKind.PROJFLAT, 2, np.random.default_rng(3), 1, 0.05).structure
    K, H1 = projflat_reference(flat, HermitianField.identity(geometry, 2))
    if H1 is not None:
        assert explicit_reference_defect(flat, K, H1) <= EXPLICIT_REFERENCE_TOL

    path = epsilon_continuation(ProblemKind.PROJFLAT, flat, [1.0, 0.5, 0.25], options=TIGHT)
    assert path.complete, path.error
    assert max(path.series('residual')) < 1e-11
    assert all(row['ok'] for row in c0_bound_check(path))

    result = harmonic_metric(flat, tol=1e-8)
    assert result.converged, result.message


def test_rank_one_harmonic_metric_is_unique():
    geometry = build_torus(1, 1.0, 16)
    flat = gauge_flat(geometry, ProblemKind.PROJFLAT, 1, np.random.default_rng(4), 1, 0.1).structure
    first = harmonic_metric(flat, tol=1e-8)
    rng = np.random.default_rng(5)
    K = HermitianField(geometry, np.exp(random_smooth(geometry, rng, 1, 0.2, real=True))[..., None, None]
                       * np.ones((1, 1)))
    second = harmonic_metric(flat, K, tol=1e-8)
    assert first.converged and second.converged
    assert uniqueness_check(first.metric, second.metric)['deviation'] < 1e-8


def test_direct_projflat_solve_matches_path():
    geometry = build_torus(1, 1.0, 16)
    flat = gauge_flat(geometry, ProblemKind.PROJFLAT, 2, np.random.default_rng(6), 1, 0.05).structure
    K = HermitianField.identity(geometry, 2)
    direct = solve_perturbed_projflat(K, flat, 0.5, options=TIGHT)
    path = epsilon_continuation(ProblemKind.PROJFLAT, flat, [1.0, 0.5], K, options=TIGHT)
    assert np.max(np.abs(direct.values - path.solutions[-1].values)) < 1e-8


def test_regime_classification():
    assert classify_regime([0.1, 0.2]) == Regime.UNDECIDED
    assert classify_regime([0.0] * 6) == Regime.BOUNDED
    assert classify_regime([1.0, 1.5, 1.75, 1.875, 1.9375]) == Regime.BOUNDED
    assert classify_regime([1.0, 2.0, 3.0, 4.0, 5.0]) == Regime.GROWING


if __name__ == "__main__":
    tests = [test_rank_one_matches_linear_solve, test_block_diagonal_decouples,
             test_conformal_normalization_clears_trace,
             test_continuation_keeps_determinant_and_c0_bound, test_projflat_integral_identity,
             test_projflat_reference_is_resolved_on_gauge_flat_data, test_rank_one_harmonic_metric_is_unique,
             test_direct_projflat_solve_matches_path,
             test_regime_classification]
    failed = 0
    for test in tests:
        try:
            test()
            print(f"PASSED {test.__name__}")
        except AssertionError as e:
            failed += 1
            print(f"FAILED {test.__name__}: {e}")
    sys.exit(1 if failed else 0)
