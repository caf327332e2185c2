import math

import numpy as np
import pytest

from chemlab.grid import build_grid, integrate
from chemlab.initdata import (
    BumpPhi,
    InitFamilyParams,
    choose_varrho,
    critical4_profile,
    make_constant,
    make_gaussian,
    make_initial,
)


@pytest.mark.parametrize("n", [2, 4, 5])
def test_bump_has_unit_mass(n):
    phi = BumpPhi(n)
    assert phi.radial_integral(lambda x: x) == pytest.approx(1.0, rel=1e-10)
    assert phi(np.array([1.0, 2.0])).tolist() == [0.0, 0.0]


def test_constant_and_gaussian_mass():
    g = build_grid(3, 2.0, 64)
    for u, v, w in (make_constant(g, 5.0), make_gaussian(g, 5.0)):
        assert integrate(g, u) == pytest.approx(5.0, rel=1e-13)
        assert integrate(g, v) == pytest.approx(5.0, rel=1e-12)
        assert np.array_equal(v, w)


def test_highdim_family_mass_and_scaling():
    g = build_grid(5, 1.0, 2048)
    p = InitFamilyParams(family="highdim", m=1.0, eta=0.1, gamma=1.0, rho=0.5)
    u, v, w = make_initial(g, p)
    assert integrate(g, u) == pytest.approx(1.0, rel=1e-13)
    assert v.max() == pytest.approx(BumpPhi(5)(np.array([0.0]))[0] * 0.1**-0.5, rel=1e-3)
    assert v[g.centers >= 0.1].max() == 0.0


def test_choose_varrho_midpoint():
    assert choose_varrho(5, 1.0) == pytest.approx(0.5)
    assert choose_varrho(8, 0.75) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        choose_varrho(5, 0.7)
    with pytest.raises(ValueError):
        choose_varrho(4, 1.0)


def test_critical4_profile_vanishes_with_slope_at_boundary():
    r = np.array([0.0, 1.0 - 1e-6, 1.0])
    vals = critical4_profile(r, 1.0, 0.01, 0.25, 3)
    assert vals[-1] == 0.0
    assert vals[0] == pytest.approx(math.log(1 / 0.01) ** -0.25 * math.log((1 + 1e-4) / 1e-4))


def test_eps_mass_default_is_half_mass():
    p = InitFamilyParams(family="critical4", m=1.0, eta=0.1).resolved(4, 1.0)
    assert p.eps_mass == 0.5


def test_eps_mass_default_clamped_for_large_mass():
    vol = math.pi**2 / 2
    p = InitFamilyParams(family="critical4", m=3 * vol, eta=0.1).resolved(4, 1.0)
    assert 2 * vol < p.eps_mass < 3 * vol


@pytest.mark.parametrize(
    "kw,key",
    [
        (dict(family="nope"), "family"),
        (dict(m=0.0), "m"),
        (dict(family="critical4"), "eta"),
        (dict(family="critical4", eta=0.1, kappa=0.6), "kappa"),
        (dict(family="critical4", eta=0.6), "eta"),
        (dict(family="critical4", eta=0.1, N_psi=2), "N_psi"),
        (dict(family="critical4", eta=0.1, eps_mass=2.0), "eps_mass"),
        (dict(family="highdim", eta=0.1), "family"),
    ],
)
def test_family_validation_names_key(kw, key):
    with pytest.raises(ValueError, match=f"^{key}:"):
        InitFamilyParams(**kw).resolved(4, 1.0)


def test_highdim_gamma_with_empty_rho_interval():
    with pytest.raises(ValueError, match="^gamma:"):
        InitFamilyParams(family="highdim", eta=0.1, gamma=0.7).resolved(5, 1.0)
