"""
Test spectral calculus on flat tori.
Checks d² = 0, Helmholtz solves, the Λ calibration, integration and resampling.
"""
import sys
from pathlib import Path

import numpy as np

# Add project root to path
sys.path.append(str(Path(__file__).parent))

from core.chern_weil import kahler_form
from core.errors import GridError, UnsolvableError
from core.spectral import (build_torus, complex_laplacian, exterior_d, heat_propagate, helmholtz_apply,
                           helmholtz_solve, integrate, lambda_contract, laplacian, resample, random_smooth,
                           spectral_d)
from models.fields import MatrixFormField


def _scalar(geometry, seed=0, real=False):
    rng = np.random.default_rng(seed)
    return random_smooth(geometry, rng, bandlimit=1, amplitude=0.1, real=real)


def test_d_squared_vanishes():
    for n, N in ((1, 16), (2, 8)):
        geometry = build_torus(n, 1.0, N)
        f = MatrixFormField.scalar(geometry, _scalar(geometry))
        assert exterior_d(exterior_d(f)).sup_norm() < 1e-12
        dbar = spectral_d(spectral_d(f, (0, 1)), (0, 1))
        assert dbar.sup_norm() < 1e-12


def test_helmholtz_inverse():
    geometry = build_torus(1, 1.0, 16)
    rhs = _scalar(geometry, seed=1)
    for mass in (1.0, 0.25, 2.0 ** -10):
        u = helmholtz_solve(rhs, mass, geometry)
        assert np.max(np.abs(helmholtz_apply(u, mass, geometry) - rhs)) < 1e-11


def test_helmholtz_zero_mass_needs_zero_mean():
    geometry = build_torus(1, 1.0, 16)
    rhs = np.ones(geometry.shape)
    try:
        helmholtz_solve(rhs, 0.0, geometry)
        raised = False
    except UnsolvableError as e:
        raised = abs(e.mean) > 0
    assert raised

    centered = _scalar(geometry, seed=2, real=True)
    centered = centered - np.mean(centered)
    u = helmholtz_solve(centered, 0.0, geometry)
    assert abs(np.mean(u)) < 1e-14
    assert np.max(np.abs(complex_laplacian(u, geometry) - centered)) < 1e-11


def test_lambda_calibration():
    for metric in (None, [[2.0]]):
        geometry = build_torus(1, 1.0, 16, metric)
        values = _scalar(geometry, seed=3)
        f = MatrixFormField.scalar(geometry, values)
        ddbar = spectral_d(spectral_d(f, (0, 1)), (1, 0))
        contracted = 1j * lambda_contract(ddbar).values[..., 0, 0]
        assert np.max(np.abs(contracted - complex_laplacian(values, geometry))) < 1e-11

    geometry = build_torus(1, 1.0, 16)
    values = _scalar(geometry, seed=4)
    assert np.max(np.abs(2.0 * complex_laplacian(values, geometry) - laplacian(values, geometry))) < 1e-11


def test_integration_conventions():
    geometry = build_torus(1, 2.0, 16)
    ones = MatrixFormField.scalar(geometry, np.ones(geometry.shape))
    assert abs(integrate(ones) - 4.0) < 1e-12
    assert abs(integrate(kahler_form(geometry)) - geometry.volume) < 1e-12

    surface = build_torus(2, [1.0, 1.5], 8, [[2.0, 0.0], [0.0, 1.0]])
    assert abs(surface.volume - 2.0 * 1.0 * 2.25) < 1e-12


def test_heat_propagate_single_mode():
    L = 1.0
    geometry = build_torus(1, L, 16)
    x, _ = geometry.coordinates()
    f = np.cos(2 * np.pi * x / L)
    t = 0.01
    expected = np.exp(-(2 * np.pi / L) ** 2 * t) * f
    assert np.max(np.abs(heat_propagate(f, t, geometry) - expected)) < 1e-12


def test_resample_band_limited():
    coarse = build_torus(1, 1.0, 16)
    fine = build_torus(1, 1.0, 32)
    values = _scalar(coarse, seed=5)
    up = resample(values, coarse, fine)
    back = resample(up, fine, coarse)
    assert np.max(np.abs(back - values)) < 1e-13

    x, y = fine.coordinates()
    xc, yc = coarse.coordinates()
    g = np.sin(2 * np.pi * xc) * np.cos(2 * np.pi * yc)
    assert np.max(np.abs(resample(g, coarse, fine) - np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y))) < 1e-12


def test_invalid_grid_refused():
    for grid in (7, 6):
        try:
            build_torus(1, 1.0, grid)
            raised = False
        except GridError:
            raised = True
        assert raised


if __name__ == "__main__":
    tests = [test_d_squared_vanishes, test_helmholtz_inverse, test_helmholtz_zero_mass_needs_zero_mean,
             test_lambda_calibration, test_integration_conventions, test_heat_propagate_single_mode,
             test_resample_band_limited, test_invalid_grid_refused]
    failed = 0
    for test in tests:
        try:
            test()
            print(f"PASSED {test.__name__}")
        except AssertionError as e:
            failed += 1
            print(f"FAILED {test.__name__}: {e}")
    sys.exit(1 if failed else 0)
