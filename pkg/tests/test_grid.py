import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chemlab.grid import (
    SolverError,
    ball_volume,
    build_grid,
    diffusion_bands,
    divergence,
    gradient_faces,
    helmholtz_solve,
    integrate,
    integrate_faces,
    laplacian,
    solve_tridiagonal,
    sphere_measure,
)


@pytest.mark.parametrize("n,expected", [(2, 2 * math.pi), (3, 4 * math.pi), (4, 2 * math.pi**2)])
def test_sphere_measure(n, expected):
    assert sphere_measure(n) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_cell_volumes_sum_to_ball(n):
    g = build_grid(n, 1.7, 100)
    assert g.volumes.sum() == pytest.approx(ball_volume(n, 1.7), rel=1e-13)
    assert g.measure == pytest.approx(ball_volume(n, 1.7), rel=1e-14)


def test_grid_arrays_read_only():
    g = build_grid(3, 1.0, 16)
    with pytest.raises(ValueError):
        g.centers[0] = 1.0


@pytest.mark.parametrize("kw", [dict(n=1, R=1.0, N=16), dict(n=3, R=0.0, N=16), dict(n=3, R=1.0, N=4)])
def test_build_grid_rejects(kw):
    with pytest.raises(ValueError):
        build_grid(**kw)


def test_one_dimensional_only_in_diagnostic_mode():
    g = build_grid(1, 1.0, 16, diagnostic_1d=True)
    assert g.volumes.sum() == pytest.approx(2.0)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 6), x=arrays(np.float64, 32, elements=st.floats(-1e3, 1e3)))
def test_laplacian_conserves_integral(n, x):
    g = build_grid(n, 1.0, 32)
    assert abs(integrate(g, laplacian(g, x))) <= 1e-9 * (1 + np.abs(x).max())


def test_laplacian_second_order_on_quadratic():
    # Lap r^2 = 2n, exact in the interior for the conservative stencil
    for n in (2, 4, 5):
        g = build_grid(n, 1.0, 200)
        lap = laplacian(g, g.centers**2)
        np.testing.assert_allclose(lap[1:-1], 2 * n, rtol=1e-6)


def test_summation_by_parts():
    g = build_grid(4, 1.0, 64)
    rng = np.random.default_rng(0)
    a, b = rng.random(64), rng.random(64)
    lhs = integrate(g, a * laplacian(g, b))
    rhs = -integrate_faces(g, gradient_faces(g, a) * gradient_faces(g, b))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_divergence_of_zero_boundary_flux_has_zero_mean():
    g = build_grid(3, 2.0, 40)
    F = np.sin(np.linspace(0, 3, 41))
    F[0] = F[-1] = 0.0
    assert abs(integrate(g, divergence(g, F))) < 1e-12


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 6), dt=st.one_of(st.none(), st.floats(1e-6, 10.0)))
def test_helmholtz_residual_and_mass(n, dt):
    g = build_grid(n, 1.0, 48)
    b = 1.0 + np.cos(3 * g.centers)
    x = helmholtz_solve(g, b, dt)
    if dt is None:
        res = -laplacian(g, x) + x - b
        assert integrate(g, x) == pytest.approx(integrate(g, b), rel=1e-11)
    else:
        res = x - dt * laplacian(g, x) + dt * x - b
    assert np.abs(res).max() < 1e-9


def test_helmholtz_of_constant_is_constant():
    g = build_grid(4, 1.0, 32)
    np.testing.assert_allclose(helmholtz_solve(g, g.full(3.0)), 3.0, rtol=1e-13)


def test_tridiagonal_matches_dense():
    rng = np.random.default_rng(1)
    n = 20
    lo, up = rng.random(n - 1), rng.random(n - 1)
    d = 3.0 + rng.random(n)
    rhs = rng.random(n)
    A = np.diag(d) + np.diag(lo, -1) + np.diag(up, 1)
    np.testing.assert_allclose(solve_tridiagonal(lo, d, up, rhs), np.linalg.solve(A, rhs), rtol=1e-12)


def test_tridiagonal_singular_raises():
    with pytest.raises(SolverError):
        solve_tridiagonal(np.zeros(2), np.zeros(3), np.zeros(2), np.ones(3))


def test_diffusion_bands_rows_sum_to_zero():
    g = build_grid(5, 1.0, 30)
    lo, d, up = diffusion_bands(g, np.linspace(1, 2, 31))
    rows = d.copy()
    rows[1:] += lo
    rows[:-1] += up
    np.testing.assert_allclose(rows, 0.0, atol=1e-9 * d.max())
