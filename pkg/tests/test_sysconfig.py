import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from fdmimo.errors import ConfigFileMissing, ConfigInvariantError, ConfigParseError
from fdmimo.sysconfig import (SystemConfig, config_from_mapping, db_to_linear,
                              derive_link_budget, linear_to_db, load_config)


@pytest.mark.parametrize("db, lin", [(0.0, 1.0), (30.0, 1000.0), (-40.0, 1e-4)])
def test_db_to_linear_known_points(db, lin):
    assert_allclose(db_to_linear(db), lin, rtol=1e-15)


def test_db_to_linear_rejects_nonfinite():
    with pytest.raises(ValueError):
        db_to_linear(float("nan"))
    with pytest.raises(ValueError):
        linear_to_db(0.0)


@given(st.floats(min_value=-200, max_value=200, allow_nan=False))
def test_db_round_trip(x):
    assert_allclose(linear_to_db(db_to_linear(x)), x, atol=1e-10)


def test_array_conversion_keeps_shape():
    out = db_to_linear(np.array([[0.0, 10.0], [20.0, -10.0]]))
    assert_allclose(out, [[1.0, 10.0], [100.0, 0.1]])


def test_default_budget():
    b = derive_link_budget(SystemConfig())
    assert_allclose(b.rho_si, 1e6)
    assert_allclose(b.si_snr, 1e3)
    assert_allclose(b.rho_dl_k, np.full(12, 1e2))
    assert_allclose(b.rho_ul_k, np.full(12, 10.0))
    assert_allclose(b.rho_uu_kk, np.full((12, 12), 0.1))
    assert_allclose(b.rho_u_dl, 1e9)
    assert_allclose(b.alpha_tx, 0.1)
    assert_allclose(b.alpha_anc, 1e3)


def test_si_budget_is_db_sum():
    b = derive_link_budget(SystemConfig(rho_d_db=30.0, beta_si_db=-40.0))
    assert_allclose(b.rho_si, 0.1)


def test_unit_gain_uplink():
    cfg = SystemConfig(rho_u_db=10.0, beta_ul_db=0.0)
    assert_allclose(derive_link_budget(cfg).rho_ul_k, np.full(12, 10.0))


def test_defaults_echoed_unchanged():
    d = SystemConfig().to_dict()
    assert d["rho_ul_db"] == 10.0
    assert d["beta_si_db"] == -40.0
    assert d["beta_dl_db"] == -80.0 and d["beta_ul_db"] == -80.0
    assert d["beta_uu_db"] == -100.0
    assert d["alpha_anc_db"] == 30.0 and d["alpha_tx_db"] == -10.0


def test_per_user_gains():
    cfg = SystemConfig(k_dl=2, k_ul=2, rho_ul_db=None, rho_u_db=90.0,
                       beta_dl_db=[-80.0, -90.0], beta_ul_db=[-80.0, -70.0],
                       beta_uu_db=[[-100.0, -110.0], [-120.0, -100.0]])
    b = derive_link_budget(cfg)
    assert_allclose(b.rho_dl_k, [1e2, 1e1])
    assert_allclose(b.rho_ul_k, [1e1, 1e2])
    assert_allclose(b.rho_uu_kk, [[0.1, 0.01], [0.001, 0.1]])


def test_rho_u_follows_received_snr():
    cfg = SystemConfig()
    assert_allclose(cfg.rho_u, 1e9)


def test_conflicting_uplink_snrs_rejected():
    with pytest.raises(ConfigInvariantError):
        SystemConfig(rho_u_db=50.0, rho_ul_db=10.0)


def test_replace_one_uplink_snr_clears_other():
    cfg = SystemConfig().replace(rho_u_db=85.0)
    assert cfg.rho_ul_db is None
    assert_allclose(derive_link_budget(cfg).rho_ul_k, np.full(12, 10 ** 0.5))


def test_geometry_invariant():
    with pytest.raises(ConfigInvariantError) as err:
        SystemConfig(m_tx=30, n_rx=24, k_dl=12)
    assert err.value.field == "m_tx"


@pytest.mark.parametrize("changes", [dict(n_rx=8, k_ul=12, tau_si=8), dict(tau_si=10),
                                     dict(m_tx=0), dict(adc_bits=0)])
def test_invalid_values(changes):
    with pytest.raises(ConfigInvariantError):
        SystemConfig(**changes)


def test_non_integer_counts_rejected():
    with pytest.raises(ConfigParseError):
        SystemConfig(m_tx=64.0)


def test_per_user_length_checked():
    with pytest.raises(ConfigInvariantError):
        SystemConfig(beta_dl_db=[-80.0, -80.0])


def test_load_config_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"m_tx": 64, "n_rx": 24, "k_dl": 12, "k_ul": 12}))
    cfg = load_config(p)
    assert (cfg.m_tx, cfg.n_rx, cfg.k_dl, cfg.k_ul) == (64, 24, 12, 12)


def test_load_config_invariant_error(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"m_tx": 30, "n_rx": 24, "k_dl": 12}))
    with pytest.raises(ConfigInvariantError):
        load_config(p)


def test_unknown_key_named(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"foo": 1}))
    with pytest.raises(ConfigParseError, match="foo") as err:
        load_config(p)
    assert err.value.field == "foo"


def test_overrides_win(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"rho_d_db": 90}))
    assert load_config(p, {"rho_d_db": 70}).rho_d_db == 70


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigFileMissing):
        load_config(tmp_path / "none.json")
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigParseError):
        load_config(p)
    p.write_text("[1, 2]")
    with pytest.raises(ConfigParseError):
        load_config(p)


def test_mapping_round_trip():
    cfg = SystemConfig(m_tx=80, rho_d_db=95.5, adc_bits=6)
    assert config_from_mapping(cfg.to_dict()) == cfg


def test_config_is_hashable_and_frozen():
    cfg = SystemConfig(beta_dl_db=[-80.0] * 12)
    hash(cfg)
    with pytest.raises(Exception):
        cfg.m_tx = 10
