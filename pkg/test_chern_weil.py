"""
Test Chern-Weil evaluators, the Bogomolov identity and the classes of flat bundles.
"""
import sys
from pathlib import Path

import numpy as np

# Add project root to path
sys.path.append(str(Path(__file__).parent))

from core.chern_weil import bogomolov_residual, bott_chern_rep, chern_numbers, degree, kamber_tondeur, slope
from core.errors import FormDegreeError
from core.spectral import build_torus, random_smooth
from models.bundles import HiggsBundle, ProjFlatBundle
from models.enums import ProblemKind
from models.fields import HermitianField, MatrixFormField
from utils.presets import gauge_flat, random_smooth_higgs


def _metric(geometry, rank, seed, amplitude=0.1):
    rng = np.random.default_rng(seed)
    R = random_smooth(geometry, rng, 1, amplitude, (rank, rank), hermitian=True)
    return HermitianField(geometry, np.eye(rank) + R)


def _constant_flat(geometry, holo, antiholo):
    """Γ = diag(holo) dz¹ + diag(antiholo) dz̄¹."""
    gamma = MatrixFormField.zeros(geometry, len(holo))
    for key, entries in ((((0,), ()), holo), (((), (0,)), antiholo)):
        matrix = np.diag(np.asarray(entries, dtype=complex))
        gamma = gamma + MatrixFormField.single(geometry, key, np.broadcast_to(matrix, geometry.shape + matrix.shape))
    return ProjFlatBundle(geometry, len(holo), gamma)


def test_degree_paths_agree():
    geometry = build_torus(1, 1.0, 16)
    bundle = random_smooth_higgs(geometry, 2, np.random.default_rng(0))
    report = chern_numbers(bundle, _metric(geometry, 2, 1))
    assert report.residuals['degree_paths'] < 1e-10
    assert degree(bundle, _metric(geometry, 2, 1)) == report.degree
    assert abs(slope(bundle, _metric(geometry, 2, 1)) - report.degree / 2) < 1e-15
    assert abs(report.degree) < 1e-9
    assert report.residuals['ch1_exactness'] < 1e-9
    assert report.ch2 is None and report.discriminant is None


def test_bogomolov_identity_on_surface():
    geometry = build_torus(2, 1.0, 16)
    bundle = random_smooth_higgs(geometry, 2, np.random.default_rng(2), amplitude=0.05)
    report = bogomolov_residual(bundle, _metric(geometry, 2, 3, 0.05))
    assert report.relative < 1e-6

    curve = build_torus(1, 1.0, 16)
    try:
        bogomolov_residual(HiggsBundle(curve, 2), HermitianField.identity(curve, 2))
        raised = False
    except FormDegreeError:
        raised = True
    assert raised


def test_odd_class_of_constant_line_bundle():
    L = 2.0
    geometry = build_torus(1, L, 8)
    c, c_bar_side = 0.3 + 0.2j, 0.5 - 0.1j
    flat = _constant_flat(geometry, [c], [c_bar_side])
    result = kamber_tondeur(flat, HermitianField.identity(geometry, 1), 0)
    # ψ = ½(Γ + Γ^†): dx and dy coefficients of tr ψ
    assert abs(result.periods[(0,)] - (c.real + c_bar_side.real) * L) < 1e-12
    assert abs(result.periods[(1,)] - (c_bar_side.imag - c.imag) * L) < 1e-12
    assert result.closedness < 1e-12
    assert result.imaginary < 1e-12


def test_odd_class_periods_add_over_direct_sums():
    geometry = build_torus(1, 1.0, 8)
    first, second = (0.1 + 0.4j, -0.2 + 0.1j), (0.25 - 0.3j, 0.05 + 0.2j)
    identity1 = HermitianField.identity(geometry, 1)
    parts = [kamber_tondeur(_constant_flat(geometry, [h], [a]), identity1, 0) for h, a in (first, second)]
    total = kamber_tondeur(_constant_flat(geometry, [first[0], second[0]], [first[1], second[1]]),
                           HermitianField.identity(geometry, 2), 0)
    for axes, period in total.periods.items():
        assert abs(period - sum(p.periods[axes] for p in parts)) < 1e-10


def test_odd_class_beyond_dimension_vanishes():
    geometry = build_torus(1, 1.0, 8)
    flat = _constant_flat(geometry, [0.2], [0.1])
    result = kamber_tondeur(flat, HermitianField.identity(geometry, 1), 1)
    assert result.periods == {}
    assert result.form.sup_norm() == 0.0


def test_second_chern_number_is_metric_independent():
    geometry = build_torus(2, 1.0, 16)
    bundle = random_smooth_higgs(geometry, 2, np.random.default_rng(10), amplitude=0.05)
    first = chern_numbers(bundle, _metric(geometry, 2, 11, 0.05))
    second = chern_numbers(bundle, _metric(geometry, 2, 12, 0.05))
    assert abs(first.ch2 - second.ch2) < 1e-8
    assert abs(first.c1_squared - second.c1_squared) < 1e-8
    assert abs(first.discriminant - second.discriminant) < 1e-8


def test_odd_class_periods_ignore_the_metric():
    geometry = build_torus(1, 1.0, 16)
    flat = gauge_flat(geometry, ProblemKind.PROJFLAT, 2, np.random.default_rng(13), 1, 0.05).structure
    reference = kamber_tondeur(flat, HermitianField.identity(geometry, 2), 0)
    for seed in (14, 15):
        result = kamber_tondeur(flat, _metric(geometry, 2, seed), 0)
        assert result.closedness < 1e-8
        assert result.imaginary < 1e-10
        for axes, period in reference.periods.items():
            assert abs(result.periods[axes] - period) < 1e-10


def test_third_odd_class_vanishes_on_four_torus():
    geometry = build_torus(2, 1.0, 16)
    flat = gauge_flat(geometry, ProblemKind.PROJFLAT, 2, np.random.default_rng(16), 1, 0.05).structure
    for H in (HermitianField.identity(geometry, 2), _metric(geometry, 2, 17, 0.05)):
        result = kamber_tondeur(flat, H, 1)
        assert result.periods
        assert result.closedness < 1e-7
        assert result.imaginary < 1e-8
        assert max(abs(p) for p in result.periods.values()) < 1e-8


def test_bott_chern_variation():
    geometry = build_torus(1, 1.0, 32)
    flat = gauge_flat(geometry, ProblemKind.PROJFLAT, 2, np.random.default_rng(4), 1, 0.05).structure
    H = _metric(geometry, 2, 5, 0.05)
    K = _metric(geometry, 2, 6, 0.05)
    result = bott_chern_rep(flat, H, K)
    assert result.closedness < 1e-10
    assert result.variation_residual < 1e-7


if __name__ == "__main__":
    tests = [test_degree_paths_agree, test_bogomolov_identity_on_surface, test_odd_class_of_constant_line_bundle,
             test_odd_class_periods_add_over_direct_sums, test_odd_class_beyond_dimension_vanishes,
             test_second_chern_number_is_metric_independent, test_odd_class_periods_ignore_the_metric,
             test_third_odd_class_vanishes_on_four_torus, test_bott_chern_variation]
    failed = 0
    for test in tests:
        try:
            test()
            print(f"PASSED {test.__name__}")
        except AssertionError as e:
            failed += 1
            print(f"FAILED {test.__name__}: {e}")
    sys.exit(1 if failed else 0)
