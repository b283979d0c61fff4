"""
Test curvature calculus of Higgs bundles and flat connections.
"""
import sys
from pathlib import Path

import numpy as np

# Add project root to path
sys.path.append(str(Path(__file__).parent))

from core.errors import FormDegreeError
from core.gauge import (bilinear_relation_residual, dc_operator, decompose_connection, difference_formula_residual,
                        higgs_integrability, higgs_psi, key_identity_residual, metric_compatibility_residual,
                        projflat_residual, pseudo_curvature, trace_log_inequality)
from core.spectral import build_torus, random_smooth
from models.bundles import HiggsBundle
from models.enums import ProblemKind
from models.fields import HermitianField, MatrixFormField
from utils.presets import constant_theta, gauge_flat, random_smooth_higgs


def _metric(geometry, rank, seed, amplitude=0.1):
    rng = np.random.default_rng(seed)
    R = random_smooth(geometry, rng, 1, amplitude, (rank, rank), hermitian=True)
    return HermitianField(geometry, np.eye(rank) + R)


def _flat(geometry, seed, amplitude=0.05):
    rng = np.random.default_rng(seed)
    return gauge_flat(geometry, ProblemKind.PROJFLAT, 2, rng, 1, amplitude).structure


def test_preset_integrability():
    geometry = build_torus(1, 1.0, 16)
    bundle = random_smooth_higgs(geometry, 2, np.random.default_rng(0))
    residuals = higgs_integrability(bundle)
    assert set(residuals) == {'dbar_squared', 'dbar_theta', 'theta_wedge_theta'}
    assert max(residuals.values()) <= 1e-6

    flat = constant_theta(geometry, ProblemKind.PROJFLAT, np.diag([0.3, -0.2]))
    assert projflat_residual(flat)['projective_flatness'] < 1e-14


def test_trivial_bundle_has_zero_psi():
    geometry = build_torus(1, 1.0, 16)
    bundle = HiggsBundle(geometry, 2)
    psi = higgs_psi(bundle, HermitianField.identity(geometry, 2))
    assert np.max(np.abs(psi)) == 0.0


def test_chern_connection_is_metric_compatible():
    geometry = build_torus(1, 1.0, 16)
    bundle = random_smooth_higgs(geometry, 2, np.random.default_rng(1))
    H = _metric(geometry, 2, 2)
    assert metric_compatibility_residual(bundle, H) < 1e-10


def test_decomposition_residuals():
    geometry = build_torus(1, 1.0, 16)
    flat = _flat(geometry, 3)
    H = _metric(geometry, 2, 4)
    _, psi = decompose_connection(flat, H)
    assert psi.flags['selfadjoint_residual'] < 1e-12
    assert psi.flags['unitary_residual'] < 1e-12

    pseudo = pseudo_curvature(flat, H)
    assert pseudo.residuals['mixed_antiselfadjoint'] < 1e-7
    assert pseudo.residuals['pure_adjoint'] < 1e-7


def test_difference_formula():
    geometry = build_torus(1, 1.0, 32)
    flat = _flat(geometry, 5)
    K = _metric(geometry, 2, 6, 0.05)
    H = _metric(geometry, 2, 7, 0.05)
    assert difference_formula_residual(flat, K, H) < 1e-7


def test_key_identity():
    geometry = build_torus(1, 1.0, 32)
    for seed in range(3):
        flat = _flat(geometry, 10 + seed)
        K = _metric(geometry, 2, 20 + seed, 0.05)
        H = _metric(geometry, 2, 30 + seed, 0.05)
        assert np.max(np.abs(key_identity_residual(K, H, flat))) < 1e-7


def test_trace_log_inequality_margin():
    geometry = build_torus(1, 1.0, 32)
    flat = _flat(geometry, 8)
    K = _metric(geometry, 2, 9, 0.05)
    H = _metric(geometry, 2, 10, 0.05)
    assert np.min(trace_log_inequality(flat, K, H)) > -1e-7


def test_bilinear_relation_on_surface():
    geometry = build_torus(2, 1.0, 12)
    flat = _flat(geometry, 11, 0.02)
    H = _metric(geometry, 2, 12, 0.02)
    relation = bilinear_relation_residual(flat, H)
    assert relation['difference'] <= 1e-6 * (1.0 + abs(relation['wedge_integral']))

    curve = build_torus(1, 1.0, 16)
    try:
        bilinear_relation_residual(_flat(curve, 13), HermitianField.identity(curve, 2))
        raised = False
    except FormDegreeError:
        raised = True
    assert raised


def test_dc_needs_zero_form():
    geometry = build_torus(1, 1.0, 16)
    flat = _flat(geometry, 14)
    K = HermitianField.identity(geometry, 2)
    one_form = MatrixFormField.single(geometry, ((0,), ()), np.ones(geometry.shape + (2, 2)))
    try:
        dc_operator(flat, K, one_form)
        raised = False
    except FormDegreeError:
        raised = True
    assert raised


if __name__ == "__main__":
    tests = [test_preset_integrability, test_trivial_bundle_has_zero_psi, test_chern_connection_is_metric_compatible,
             test_decomposition_residuals, test_difference_formula, test_key_identity,
             test_trace_log_inequality_margin, test_bilinear_relation_on_surface, test_dc_needs_zero_form]
    failed = 0
    for test in tests:
        try:
            test()
            print(f"PASSED {test.__name__}")
        except AssertionError as e:
            failed += 1
            print(f"FAILED {test.__name__}: {e}")
    sys.exit(1 if failed else 0)
