"""
Test matrix-valued form algebra and the Hermitian functional calculus.
"""
import sys
from pathlib import Path

import numpy as np

# Add project root to path
sys.path.append(str(Path(__file__).parent))

from core.errors import FormDegreeError
from core.field_algebra import (adjoint_wrt, bracket, condition_number, herm_log_exp, herm_sqrt, identity,
                                inner_density, inner_norms, metric_from_sigma, pointwise_norm, relative_endomorphism,
                                sigma_from_metric, theta_weights, trace_free, wedge)
from core.spectral import build_torus, lambda_contract, random_smooth
from models.enums import FieldRole
from models.fields import HermitianField, MatrixFormField


def _metric(geometry, rank, seed):
    rng = np.random.default_rng(seed)
    R = random_smooth(geometry, rng, 1, 0.1, (rank, rank), hermitian=True)
    return HermitianField(geometry, np.eye(rank) + R)


def _matrix_grid(geometry, rank, seed):
    rng = np.random.default_rng(seed)
    return random_smooth(geometry, rng, 1, 0.2, (rank, rank))


def test_wedge_graded_commutativity():
    geometry = build_torus(1, 1.0, 16)
    rng = np.random.default_rng(0)
    a = MatrixFormField.single(geometry, ((0,), ()), random_smooth(geometry, rng, 1, 0.1))
    b = MatrixFormField.single(geometry, ((), (0,)), random_smooth(geometry, rng, 1, 0.1))
    assert (wedge(a, b) + wedge(b, a)).sup_norm() < 1e-14
    assert wedge(a, a).sup_norm() == 0.0


def test_bracket_of_constants():
    geometry = build_torus(1, 1.0, 8)
    A = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    B = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
    fa = MatrixFormField.scalar(geometry, np.broadcast_to(A, geometry.shape + (2, 2)))
    fb = MatrixFormField.scalar(geometry, np.broadcast_to(B, geometry.shape + (2, 2)))
    commutator = bracket(fa, fb).values
    assert np.max(np.abs(commutator - (A @ B - B @ A))) < 1e-14


def test_adjoint_is_an_involution():
    geometry = build_torus(1, 1.0, 16)
    H = _metric(geometry, 2, 1)
    a = (MatrixFormField.single(geometry, ((0,), ()), _matrix_grid(geometry, 2, 2))
         + MatrixFormField.single(geometry, ((), (0,)), _matrix_grid(geometry, 2, 3)))
    twice = adjoint_wrt(adjoint_wrt(a, H), H)
    assert (twice - a).sup_norm() < 1e-12
    # (1,0) ↔ (0,1)
    assert adjoint_wrt(a.part(1, 0), H).bidegrees == {(0, 1)}


def test_adjoint_pairing():
    geometry = build_torus(1, 1.0, 16)
    H = _metric(geometry, 2, 4)
    a = MatrixFormField.single(geometry, ((), (0,)), _matrix_grid(geometry, 2, 5))
    b = MatrixFormField.single(geometry, ((), (0,)), _matrix_grid(geometry, 2, 6))
    # ⟨a, b⟩_H is Hermitian-symmetric
    assert np.max(np.abs(inner_density(a, b, H) - np.conj(inner_density(b, a, H)))) < 1e-12
    assert np.min(np.real(inner_density(a, a, H))) >= 0.0


def test_log_exp_round_trip():
    geometry = build_torus(1, 1.0, 16)
    K = _metric(geometry, 3, 7)
    H = _metric(geometry, 3, 8)
    h = relative_endomorphism(K, H)
    assert h.role == FieldRole.ENDOMORPHISM
    s = herm_log_exp(h, 'log')
    back = herm_log_exp(s, 'exp')
    assert np.max(np.abs(back.values - h.values)) < 1e-12

    root = herm_sqrt(H)
    assert np.max(np.abs(root.values @ root.values - H.values)) < 1e-12


def test_sigma_round_trip():
    geometry = build_torus(1, 1.0, 16)
    K = _metric(geometry, 2, 9)
    H = _metric(geometry, 2, 10)
    sigma = sigma_from_metric(K, H)
    assert np.max(np.abs(sigma - np.conj(np.swapaxes(sigma, -1, -2)))) < 1e-12
    assert np.max(np.abs(metric_from_sigma(K, sigma).values - H.values)) < 1e-12


def test_theta_weights():
    eigenvalues = np.array([[0.0, 0.0, 1.0]])
    weights = theta_weights(eigenvalues)
    assert weights.shape == (1, 3, 3)
    assert np.allclose(np.diagonal(weights, axis1=-2, axis2=-1), 1.0)
    assert abs(weights[0, 0, 1] - 1.0) < 1e-12
    assert abs(weights[0, 0, 2] - (np.exp(-1.0) - 1.0) / -1.0) < 1e-12
    assert abs(weights[0, 2, 0] - (np.exp(1.0) - 1.0)) < 1e-12


def test_identity_condition_and_norms():
    geometry = build_torus(1, 2.0, 16)
    eye = identity(geometry, 2)
    assert np.array_equal(eye.values, np.broadcast_to(np.eye(2), geometry.shape + (2, 2)))
    assert abs(condition_number(HermitianField.identity(geometry, 2)) - 1.0) < 1e-14
    assert condition_number(_metric(geometry, 2, 13)) > 1.0

    H = _metric(geometry, 2, 14)
    a = MatrixFormField.single(geometry, ((), (0,)), _matrix_grid(geometry, 2, 15))
    density, total, sup = inner_norms(a, a, H)
    assert abs(total - np.mean(density) * geometry.volume) < 1e-12
    assert abs(sup - np.max(np.abs(density))) == 0.0
    assert np.max(np.abs(pointwise_norm(a, H) ** 2 - np.real(density))) < 1e-12


def test_trace_free_and_contraction():
    geometry = build_torus(1, 1.0, 16)
    F = MatrixFormField.single(geometry, ((0,), (0,)), _matrix_grid(geometry, 2, 11))
    assert np.max(np.abs(trace_free(F).trace().coefficient(((0,), (0,))))) < 1e-14
    try:
        lambda_contract(F + MatrixFormField.single(geometry, ((0,), ()), _matrix_grid(geometry, 2, 12)))
        raised = False
    except FormDegreeError:
        raised = True
    assert raised


if __name__ == "__main__":
    tests = [test_wedge_graded_commutativity, test_bracket_of_constants, test_adjoint_is_an_involution,
             test_adjoint_pairing, test_log_exp_round_trip, test_sigma_round_trip, test_theta_weights,
             test_identity_condition_and_norms, test_trace_free_and_contraction]
    failed = 0
    for test in tests:
        try:
            test()
            print(f"PASSED {test.__name__}")
        except AssertionError as e:
            failed += 1
            print(f"FAILED {test.__name__}: {e}")
    sys.exit(1 if failed else 0)
