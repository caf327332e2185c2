import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemlab.kinetics import (
    ConditionParams,
    Kinetics,
    OutOfDomainError,
    Primitives,
    check_blowup_conditions,
    eval_D,
    eval_f,
    eval_G,
    eval_H,
    eval_S,
    prototype_verdict,
)

KS = Kinetics(0.0, 1.0)  # D = 1, S = s: closed-form primitives


def test_prototype_pair_values():
    kin = Kinetics(0.5, 0.6, K_D=2.0, k_S=3.0)
    s = np.array([0.0, 1.0, 3.0])
    np.testing.assert_allclose(eval_D(kin, s), 2.0 * (s + 1) ** -0.5)
    np.testing.assert_allclose(eval_S(kin, s), 3.0 * (s + 1) ** -0.4 * s)
    assert eval_S(kin, 0.0) == 0.0


def test_keller_segel_primitives_closed_form():
    s = np.geomspace(1e-6, 1e6, 57)
    np.testing.assert_allclose(eval_f(KS, s), np.log(s / 2.0), rtol=1e-10, atol=1e-10)
    G = s * np.log(s / 2.0) - s + 2.0
    np.testing.assert_allclose(eval_G(KS, s), G, rtol=1e-9, atol=1e-9)
    H = np.where(s >= 2.0, s - 2.0, 0.0)
    np.testing.assert_allclose(eval_H(KS, s), H, rtol=1e-9, atol=1e-9)


def test_primitives_below_table_and_at_zero():
    assert eval_f(KS, 0.0) == -math.inf
    assert eval_G(KS, 0.0) == pytest.approx(2.0, rel=1e-9)
    assert eval_G(KS, 1e-15) == pytest.approx(1e-15 * math.log(5e-16) - 1e-15 + 2.0, rel=1e-9)


def test_anchor_is_zero_of_f_and_G():
    kin = Kinetics(0.7, 0.4)
    for s0 in (0.5, 2.0, 10.0):
        assert eval_f(kin, s0, s0) == pytest.approx(0.0, abs=1e-12)
        assert eval_G(kin, s0, s0) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    alpha=st.floats(0.0, 1.5),
    beta=st.floats(0.05, 1.5),
    logs=st.lists(st.floats(-8, 12), min_size=3, max_size=12),
)
def test_G_convex_nonnegative_f_increasing(alpha, beta, logs):
    kin = Kinetics(alpha, beta)
    s = np.sort(10.0 ** np.array(logs))
    f = eval_f(kin, s)
    G = eval_G(kin, s)
    assert np.all(G >= -1e-9)
    assert np.all(np.diff(f) >= -1e-9 * (1 + np.abs(f[1:])))
    # convexity: G lies above its tangent at the smallest sample
    tangent = G[0] + f[0] * (s - s[0])
    assert np.all(G >= tangent - 1e-8 * (1 + np.abs(G)))


def test_inverse_f_round_trip():
    kin = Kinetics(0.3, 0.8)
    prim = kin.primitives()
    s = np.geomspace(1e-10, 1e10, 41)
    np.testing.assert_allclose(prim.inverse_f(prim.eval_f(s)), s, rtol=1e-10)
    assert prim.inverse_f(np.array([-np.inf]))[0] == 0.0


def test_G_matches_quadrature_of_f():
    from scipy.integrate import quad

    kin = Kinetics(0.5, 0.6)
    for s in (0.1, 5.0, 300.0):
        ref, _ = quad(lambda x: float(eval_f(kin, x)), 2.0, s, epsrel=1e-12, limit=200)
        assert eval_G(kin, s) == pytest.approx(ref, rel=1e-8, abs=1e-10)


def test_negative_density_rejected():
    with pytest.raises(OutOfDomainError):
        eval_D(KS, -1.0)
    with pytest.raises(OutOfDomainError):
        eval_G(KS, np.array([1.0, -1e-3]))


def test_tabulated_matches_prototype_and_guards_range():
    proto = Kinetics(0.4, 0.7)
    s = np.geomspace(1e-3, 1e4, 400)
    tab = Kinetics(mode="tabulated", table=(s, proto.D(s), proto.S(s)))
    q = np.array([0.5, 7.0, 900.0])
    np.testing.assert_allclose(tab.D(q), proto.D(q), rtol=1e-6)
    np.testing.assert_allclose(tab.S(q), proto.S(q), rtol=1e-6)
    assert tab.S(0.0) == 0.0
    with pytest.raises(OutOfDomainError):
        tab.D(2e4)


@pytest.mark.parametrize(
    "kw",
    [
        {"K_D": 0.0},
        {"k_S": -1.0},
        {"mode": "spline"},
        {"mode": "tabulated"},
    ],
)
def test_invalid_kinetics(kw):
    with pytest.raises(ValueError):
        Kinetics(0.5, 0.5, **kw)


def test_decay_floor_hypothesis_checked():
    with pytest.raises(ValueError, match="hypothesis"):
        Kinetics(1.0, 0.5, M=0.5)


def test_primitives_reject_bad_anchor():
    with pytest.raises(ValueError):
        Primitives(KS.ratio_times_s, s0=0.0)


@pytest.mark.parametrize(
    "alpha,beta,n,expected",
    [(1.2, 0.3, 4, True), (0.2, 0.3, 4, False), (0.6, 0.6, 5, True), (0.1, 0.2, 6, False)],
)
def test_condition_checker_prototype(alpha, beta, n, expected):
    rep = check_blowup_conditions(Kinetics(alpha, beta), ConditionParams(n=n))
    assert rep.satisfiable is expected
    assert prototype_verdict(alpha, beta, n)["satisfiable"] is expected
    d = rep.to_dict()
    assert d["satisfiable"] is expected


def test_condition_params_validation():
    with pytest.raises(ValueError):
        ConditionParams(n=1)
