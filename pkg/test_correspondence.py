"""
Test the Higgs / flat correspondence, the section-kernel comparison, the extension
representatives and the semistability experiments.
"""
import sys
from pathlib import Path

import numpy as np

# Add project root to path
sys.path.append(str(Path(__file__).parent))

from core.commands import extension_beta
from core.correspondence import (extension_flat_connection, h0_equality_check, harmonic_extension_rep,
                                 higgs_to_projflat, projflat_to_higgs, roundtrip_check)
from core.errors import PreconditionError
from core.experiments import approx_projflat_experiment, classify_path, semistability_probe
from core.perturbed import epsilon_continuation
from core.spectral import build_torus
from models.bundles import HiggsBundle, HomStructure
from models.enums import ProblemKind, Regime, Verdict
from models.fields import HermitianField
from utils.presets import atiyah, constant_theta, gauge_flat


def test_constant_normal_theta_maps_both_ways():
    geometry = build_torus(1, 1.0, 8)
    bundle = constant_theta(geometry, ProblemKind.HIGGS, np.diag([0.3, -0.2]))
    H = HermitianField.identity(geometry, 2)
    flat = higgs_to_projflat(bundle, H)
    assert flat.residuals['projective_flatness'] < 1e-12
    back = projflat_to_higgs(flat, H)
    assert (back.theta - bundle.theta).sup_norm() < 1e-12
    assert (back.a - bundle.a).sup_norm() < 1e-12


def test_non_einstein_metric_refused():
    geometry = build_torus(1, 1.0, 8)
    bundle = atiyah(geometry, 1.0)
    try:
        higgs_to_projflat(bundle, HermitianField.identity(geometry, 2))
        raised = False
    except PreconditionError as e:
        raised = 'he_residual' in e.residuals
    assert raised


def test_roundtrip_from_hermitian_flat_bundle():
    geometry = build_torus(1, 1.0, 16)
    data = gauge_flat(geometry, ProblemKind.HIGGS, 2, np.random.default_rng(0), 1, 0.1)
    report = roundtrip_check(data.structure, tol=1e-8)
    assert not report.partial, report.notes
    assert report.residuals['he_residual'] < 1e-8
    assert report.residuals['harmonic_residual'] < 1e-8
    assert report.distance < 1e-6
    assert report.residuals['flatness'] < 1e-6


def test_roundtrip_reports_failed_leg():
    geometry = build_torus(1, 1.0, 8)
    report = roundtrip_check(atiyah(geometry, 1.0), tol=1e-8)
    assert report.partial
    assert report.distance is None
    assert report.notes


def test_parallel_sections_are_holomorphic():
    geometry = build_torus(1, 1.0, 16)
    data = gauge_flat(geometry, ProblemKind.HIGGS, 2, np.random.default_rng(1), 1, 0.1)
    report = h0_equality_check(data.structure, data.metric, kmax=3)
    assert report.dim_flat == 2
    assert report.dim_holomorphic == 2
    assert report.max_angle < 1e-6


def test_extension_representative_drops_exact_part():
    geometry = build_torus(1, 1.0, 16)
    bundle = HiggsBundle(geometry, 1)
    structure = HomStructure.of_bundle(bundle, HermitianField.identity(geometry, 1))
    c = 0.5 + 0.25j
    beta = extension_beta(structure, {'constant': [[str(c)]], 'seed': 3, 'amplitude': 0.1})
    result = harmonic_extension_rep(beta, structure, tol=1e-12)
    assert result.residuals['lambda_residual'] < 1e-9
    assert result.residuals['closedness'] < 1e-9
    assert np.max(np.abs(result.beta.coefficient(((), (0,)))[..., 0, 0] - c)) < 1e-9

    flat = extension_flat_connection(structure, result.beta)
    assert flat.rank == 2
    assert flat.residuals['flatness'] < 1e-9


def test_semistability_on_trivial_and_atiyah():
    schedule = [2.0 ** -k for k in range(7)]
    geometry = build_torus(1, 1.0, 8)
    trivial = semistability_probe(HiggsBundle(geometry, 2), schedule)
    assert trivial.verdict == Verdict.STABLE_LIKE
    assert max(trivial.psi_sup) < 1e-12

    geometry = build_torus(1, 1.0, 16)
    report = semistability_probe(atiyah(geometry, 1.0), schedule, check_grid=32)
    assert report.psi_sup[-1] * 10.0 <= report.psi_sup[0]
    assert all(b > a for a, b in zip(report.log_sup, report.log_sup[1:]))
    assert report.regime == Regime.GROWING
    assert report.verdict == Verdict.SEMISTABLE_LIKE
    assert report.resolution_verdicts == {16: Verdict.SEMISTABLE_LIKE.value, 32: Verdict.SEMISTABLE_LIKE.value}
    assert not report.notes


def test_classify_path_short_is_inconclusive():
    geometry = build_torus(1, 1.0, 8)
    path = epsilon_continuation(ProblemKind.HIGGS, HiggsBundle(geometry, 2), [1.0])
    assert classify_path(path) == Verdict.INCONCLUSIVE


def test_approx_experiment_records_each_epsilon():
    geometry = build_torus(1, 1.0, 8)
    epsilons = [2.0 ** -k for k in range(7)]
    report = approx_projflat_experiment(atiyah(geometry, 1.0), epsilons, t0=0.5, dt=0.05)
    assert report.epsilons == epsilons
    assert len(report.values) == len(epsilons)
    assert all(v > 0.0 for v in report.values)
    assert all(b < a for a, b in zip(report.values, report.values[1:]))


if __name__ == "__main__":
    tests = [test_constant_normal_theta_maps_both_ways, test_non_einstein_metric_refused,
             test_roundtrip_from_hermitian_flat_bundle, test_roundtrip_reports_failed_leg,
             test_parallel_sections_are_holomorphic, test_extension_representative_drops_exact_part,
             test_semistability_on_trivial_and_atiyah, test_classify_path_short_is_inconclusive,
             test_approx_experiment_records_each_epsilon]
    failed = 0
    for test in tests:
        try:
            test()
            print(f"PASSED {test.__name__}")
        except AssertionError as e:
            failed += 1
            print(f"FAILED {test.__name__}: {e}")
    sys.exit(1 if failed else 0)
