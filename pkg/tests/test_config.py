import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemlab.config import ConfigError, build_kinetics, build_problem, from_dict, load_config, parse_config

MINIMAL = """
[model]
n = 4
R = 1
alpha = 1.2
beta = 0.3
[init]
m = 1
"""


def test_minimal_config_gets_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.grid.cells == 512
    t = cfg.time
    assert (t.t_end, t.dt_init, t.dt_min, t.dt_max, t.cfl, t.stride) == (5.0, 1e-4, 1e-12, 1e-2, 0.4, 10)
    assert cfg.limits.u_max == 1e8
    assert cfg.model.s0 == 2.0 and cfg.model.K_D == 1.0 and cfg.model.k_S == 1.0
    assert cfg.init.family == "gaussian"
    assert (cfg.init.N_psi, cfg.init.theta_log, cfg.init.kappa) == (3, 0.5, 0.25)
    assert cfg.output.emit_svg is True


def _err(text):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    return exc.value


@pytest.mark.parametrize(
    "text,key",
    [
        (MINIMAL + "[init.x]\n", "init.x"),
        (MINIMAL.replace("alpha = 1.2\n", ""), "model.alpha"),
        (MINIMAL.replace("m = 1", "eta = 0.1"), "init.m"),
        (MINIMAL + "[grid]\ncells = 4\n", "grid.cells"),
        (MINIMAL + "[grid]\ncolour = 1\n", "grid.colour"),
        (MINIMAL + "[time]\ncfl = 1.5\n", "time.cfl"),
        (MINIMAL + "[time]\ndt_init = 1.0\n", "time.dt_init"),
        (MINIMAL + "[output]\nemit_svg = 1\n", "output.emit_svg"),
        (MINIMAL.replace("n = 4", "n = 4.5"), "model.n"),
        (MINIMAL.replace("R = 1", "R = -1"), "model.R"),
        (MINIMAL + "[mystery]\na = 1\n", "mystery"),
        ("[model\n", "<document>"),
    ],
)
def test_errors_name_the_key(text, key):
    assert _err(text).key == key


def test_kappa_constraint():
    text = MINIMAL.replace("m = 1", 'm = 1\nfamily = "critical4"\neta = 0.01\nkappa = 0.5')
    e = _err(text)
    assert e.key == "init.kappa"
    assert str(e).startswith("init.kappa:")


def test_gamma_with_empty_rho_interval():
    text = MINIMAL.replace("n = 4", "n = 5").replace("m = 1", 'm = 1\nfamily = "highdim"\neta = 0.1\ngamma = 0.7')
    assert _err(text).key == "init.gamma"


def test_lowercase_aliases():
    cfg = parse_config(MINIMAL.replace("beta = 0.3", "beta = 0.3\nk_d = 2.0\nk_s = 3.0"))
    assert cfg.model.K_D == 2.0 and cfg.model.k_S == 3.0
    assert _err(MINIMAL.replace("beta = 0.3", "beta = 0.3\nk_d = 2.0\nK_D = 2.0")).key.startswith("model.")


def test_run_id_ignores_output_and_tracks_physics():
    a = parse_config(MINIMAL)
    b = parse_config(MINIMAL + '[output]\ndir = "elsewhere"\n')
    c = parse_config(MINIMAL.replace("alpha = 1.2", "alpha = 1.1"))
    assert a.run_id == b.run_id != c.run_id
    assert len(a.run_id) == 16


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0, 2), beta=st.floats(0.01, 2), cells=st.integers(8, 4096))
def test_run_id_deterministic(alpha, beta, cells):
    raw = {"model": {"n": 3, "R": 1.0, "alpha": alpha, "beta": beta}, "grid": {"cells": cells},
           "init": {"m": 1.0}}
    assert from_dict(raw).run_id == from_dict(raw).run_id


def test_with_overrides_revalidates():
    cfg = parse_config(MINIMAL)
    assert cfg.with_overrides(model={"alpha": 0.5}).model.alpha == 0.5
    with pytest.raises(ConfigError):
        cfg.with_overrides(time={"cfl": 2.0})


def test_tabulated_kinetics_from_csv(tmp_path):
    import numpy as np

    s = np.geomspace(1e-3, 1e6, 60)
    data = np.column_stack([s, (s + 1) ** -0.5, s * (s + 1) ** -0.4])
    np.savetxt(tmp_path / "kin.csv", data, delimiter=",", header="s,D,S")
    p = tmp_path / "run.toml"
    p.write_text(MINIMAL.replace("beta = 0.3", 'beta = 0.3\nmode = "tabulated"\ntable = "kin.csv"'))
    cfg = load_config(p)
    kin = build_kinetics(cfg.model)
    assert kin.mode == "tabulated"
    assert float(kin.D(3.0)) == pytest.approx(0.5, rel=1e-3)
    prob = build_problem(cfg)
    assert prob.state0.u.shape == (512,)


def test_missing_table_is_a_config_error(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(MINIMAL.replace("beta = 0.3", 'beta = 0.3\nmode = "tabulated"\ntable = "none.csv"'))
    with pytest.raises(ConfigError) as exc:
        build_kinetics(load_config(p).model)
    assert exc.value.key == "model.table"
