import numpy as np
import pytest

from chemlab.grid import build_grid
from chemlab.identities import (
    CutoffXi,
    biharmonic,
    hardy_rellich_check,
    pohozaev_check,
    report_dict,
    second_derivative_at_boundary,
    weighted_identity_check,
)
from chemlab.kinetics import Kinetics
from chemlab.stationary import solve_stationary
from chemlab.verification import HARDY_SUITE, hardy_oracle, pohozaev_exact


def test_cutoff_J_closed_form():
    cut = CutoffXi(3.0, 0.2)
    r = np.linspace(0.01, 3.0, 50)
    np.testing.assert_allclose(cut.J(r), cut.J_from_derivatives(r), rtol=1e-10, atol=1e-13)
    assert cut.xi(3.0) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        CutoffXi(1.0, 1.5)


@pytest.mark.parametrize("name", list(HARDY_SUITE))
def test_hardy_rellich_holds(name):
    g = build_grid(4, 1.0, 1024)
    rep = hardy_rellich_check(g, HARDY_SUITE[name](g.centers))
    assert rep.passed
    assert rep.extra["ratio"] >= 4.0 - 1e-6


def test_hardy_close_to_oracle():
    g = build_grid(4, 1.0, 4096)
    rep = hardy_rellich_check(g, (1 - g.centers**2) ** 2)
    lhs, rhs = hardy_oracle()
    assert rep.lhs == pytest.approx(lhs, rel=1e-6)
    assert rep.rhs == pytest.approx(rhs, rel=1e-6)


def test_hardy_requires_dimension_four():
    with pytest.raises(ValueError):
        hardy_rellich_check(build_grid(3, 1.0, 32), np.ones(32))


def test_boundary_second_derivative():
    g = build_grid(5, 1.0, 512)
    # v = (1 - r^2)^2: v_rr(1) = 8
    assert second_derivative_at_boundary(g, (1 - g.centers**2) ** 2) == pytest.approx(8.0, rel=1e-4)


def test_biharmonic_of_quartic():
    n = 5
    g = build_grid(n, 1.0, 1024)
    _, bilap = biharmonic(g, (1 - g.centers**2) ** 2)
    interior = slice(10, -10)
    np.testing.assert_allclose(bilap[interior], 8.0 * n * (n + 2), rtol=1e-3)


@pytest.mark.parametrize("n", [4, 5])
def test_pohozaev_matches_exact(n):
    g = build_grid(n, 1.0, 1024)
    rep = pohozaev_check(g, (1 - g.centers**2) ** 2, tol=1e-5)
    lhs, rhs = pohozaev_exact(n)
    assert lhs == pytest.approx(rhs, rel=1e-12)
    assert rep.passed
    assert rep.lhs == pytest.approx(lhs, rel=1e-4)
    assert report_dict(rep)["rel_residual"] == rep.rel_residual


def test_weighted_check_needs_converged_solution():
    kin = Kinetics(0.2, 0.5)
    g = build_grid(4, 4.0, 64)
    sol = solve_stationary(g, kin, 12.0 * g.measure, max_iter=1, newton=False,
                           guess=12.0 * (1 + 0.5 * np.cos(np.pi * g.centers / 4)))
    with pytest.raises(ValueError, match="not converged"):
        weighted_identity_check(g, sol, 0.1, kin)
    with pytest.raises(ValueError):
        weighted_identity_check(build_grid(3, 1.0, 16), sol, 0.1, kin)
