"""
Test the Hermitian-Yang-Mills flow and its gauge-transported pair form.
"""
import sys
from pathlib import Path

import numpy as np

# Add project root to path
sys.path.append(str(Path(__file__).parent))

from core.gauge import higgs_psi
from core.hym_flow import hym_flow, ymh_energy, ymh_gauge_transport
from core.spectral import build_torus, heat_phi1, random_smooth
from models.bundles import HiggsBundle
from models.enums import Integrator, ProblemKind
from models.fields import HermitianField, MatrixFormField
from utils.presets import constant_theta, random_smooth_higgs


def _metric(geometry, rank, seed, amplitude=0.1):
    rng = np.random.default_rng(seed)
    R = random_smooth(geometry, rng, 1, amplitude, (rank, rank), hermitian=True)
    return HermitianField(geometry, np.eye(rank) + R)


def test_flow_laws_on_random_data():
    geometry = build_torus(1, 1.0, 16)
    for seed in range(3):
        bundle = random_smooth_higgs(geometry, 2, np.random.default_rng(seed))
        trajectory = hym_flow(_metric(geometry, 2, 100 + seed), bundle, dt=1e-2, T=0.5)
        assert trajectory.energy_monotone
        assert trajectory.psi_sup_monotone
        assert trajectory.psi_sup_increases == 0
        assert max(trajectory.series('trace_mean')) < 1e-10
        assert max(trajectory.series('det_deviation')) < 1e-8
        assert abs(trajectory.final.t - 0.5) < 1e-12
        assert trajectory.series('psi_sup')[-1] < trajectory.series('psi_sup')[0]


def test_trivial_bundle_flow_keeps_psi_monotone():
    geometry = build_torus(1, 1.0, 16)
    trajectory = hym_flow(_metric(geometry, 2, 21, amplitude=0.2), HiggsBundle(geometry, 2), dt=1e-2, T=0.5)
    psi_sup = trajectory.series('psi_sup')
    assert trajectory.psi_sup_monotone
    assert trajectory.psi_sup_increases == 0
    assert psi_sup[0] > 0
    assert psi_sup[-1] < psi_sup[0]


def test_rank_one_flow_is_exact_heat_decay():
    geometry = build_torus(1, 1.0, 16)
    rng = np.random.default_rng(7)
    c = random_smooth(geometry, rng, 1, 0.1)
    bundle = HiggsBundle(geometry, 1, a=MatrixFormField.single(geometry, ((), (0,)), c))
    identity = HermitianField.identity(geometry, 1)
    psi = np.real(higgs_psi(bundle, identity)[..., 0, 0])

    T = 0.2
    trajectory = hym_flow(identity, bundle, dt=0.01, T=T, normalize=False)
    # ∂_t log h = Δ log h − 2Ψ_1 from log h = 0
    expected = -2.0 * T * heat_phi1(psi, T, geometry)
    log_h = np.log(np.real(trajectory.final.H.values[..., 0, 0]))
    assert np.max(np.abs(log_h - expected)) < 1e-8
    assert trajectory.halvings == 0


def test_explicit_integrator_respects_cfl():
    geometry = build_torus(1, 1.0, 16)
    bundle = random_smooth_higgs(geometry, 2, np.random.default_rng(3))
    trajectory = hym_flow(HermitianField.identity(geometry, 2), bundle, dt=1.0, T=0.01,
                          integrator=Integrator.EXPLICIT, cfl=0.2)
    limit = 0.2 * geometry.spacing() ** 2
    assert trajectory.states[1].diagnostics['dt'] <= limit * (1.0 + 1e-12)
    assert trajectory.energy_monotone


def test_constant_nilpotent_energy():
    geometry = build_torus(1, 1.0, 8)
    bundle = constant_theta(geometry, ProblemKind.HIGGS, [[0.0, 1.0], [0.0, 0.0]])
    energy, density = ymh_energy(bundle, HermitianField.identity(geometry, 2))
    assert energy > 0
    assert np.max(density) - np.min(density) < 1e-12
    assert abs(energy - density[0, 0] * geometry.volume) < 1e-10


def test_gauge_transport():
    geometry = build_torus(1, 1.0, 32)
    bundle = random_smooth_higgs(geometry, 2, np.random.default_rng(11))
    trajectory = hym_flow(_metric(geometry, 2, 12), bundle, dt=1e-2, T=0.1)
    pairs = ymh_gauge_transport(trajectory)
    assert len(pairs.states) == len(trajectory.states)
    assert pairs.max_residual < 1e-8
    assert pairs.energy_monotone
    for state in pairs.states:
        assert abs(state.ymh - state.ymh_metric) <= 1e-8 * (1.0 + abs(state.ymh_metric))


if __name__ == "__main__":
    tests = [test_flow_laws_on_random_data, test_trivial_bundle_flow_keeps_psi_monotone,
             test_rank_one_flow_is_exact_heat_decay,
             test_explicit_integrator_respects_cfl, test_constant_nilpotent_energy, test_gauge_transport]
    failed = 0
    for test in tests:
        try:
            test()
            print(f"PASSED {test.__name__}")
        except AssertionError as e:
            failed += 1
            print(f"FAILED {test.__name__}: {e}")
    sys.exit(1 if failed else 0)
