import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from fdmimo.channel import draw_iid
from fdmimo.errors import DimensionError
from fdmimo.estimation import (aqnm_alpha, dl_ul_error_variance, draw_estimated_channel,
                               estimate_si_channel_aqnm, pilot_matrix, pilot_si_error_variance,
                               quant_noise_variance, quantize_aqnm, si_error_variance_pilot)
from fdmimo.sysconfig import SystemConfig, derive_link_budget

# 1 - (pi sqrt(3) / 2) * 4**-bits, evaluated with the math module
AQNM_ALPHA = {1: 0.31982523841216837, 2: 0.8299563096030421, 4: 0.9893722693501902,
              8: 0.9999584854271492, 12: 0.9999998378336998}


def test_pilot_error_limits():
    assert_allclose(pilot_si_error_variance(0.0, 0.1, 24, 24), 1.0)
    assert pilot_si_error_variance(1e3, 0.0, 24, 10 ** 9) < 1e-10


def test_pilot_error_example():
    assert abs(pilot_si_error_variance(10.0, 0.1, 24, 24) - 25 / 265) < 1e-12


def test_pilot_error_needs_enough_pilots():
    with pytest.raises(ValueError):
        pilot_si_error_variance(10.0, 0.1, 24, 12)


def test_pilot_error_from_config():
    cfg = SystemConfig()
    b = derive_link_budget(cfg)
    # s = 1000, alpha_tx = 0.1: (2400 + 1) / (24000 + 2400 + 1)
    assert_allclose(si_error_variance_pilot(b, cfg), 2401 / 26401, rtol=1e-14)


@given(st.floats(min_value=0.0, max_value=1e6), st.floats(min_value=0.0, max_value=1.0),
       st.integers(1, 64), st.integers(0, 64))
def test_pilot_error_in_unit_interval(s, atx, n, extra):
    eps = pilot_si_error_variance(s, atx, n, n + extra)
    assert 0.0 < eps <= 1.0


def test_dl_ul_error_examples():
    cfg = SystemConfig(k_dl=1, k_ul=1, rho_ul_db=20.0, rho_u_dl_db=100.0, beta_dl_db=-80.0)
    b = derive_link_budget(cfg)
    assert_allclose(dl_ul_error_variance(b, cfg, 0, "DL"), (1 / 101, 100 / 101))
    assert_allclose(dl_ul_error_variance(b, cfg, 0, "UL"), (1 / 101, 100 / 101))
    cfg0 = SystemConfig(k_dl=1, k_ul=1, rho_u_dl_db=-400.0, beta_dl_db=-80.0)
    eps, var = dl_ul_error_variance(derive_link_budget(cfg0), cfg0, 0, "DL")
    assert_allclose((eps, var), (1.0, 0.0), atol=1e-40)


@given(st.floats(min_value=-100, max_value=150), st.integers(1, 16), st.sampled_from(["DL", "UL"]))
def test_dl_ul_complementarity(rho_db, k, link):
    cfg = SystemConfig(m_tx=64, n_rx=24, k_dl=k, k_ul=k, rho_u_dl_db=rho_db, rho_ul_db=rho_db - 80)
    b = derive_link_budget(cfg)
    eps, var = dl_ul_error_variance(b, cfg, k - 1, link)
    assert eps + var == 1.0


def test_dl_ul_bad_arguments():
    cfg = SystemConfig()
    b = derive_link_budget(cfg)
    with pytest.raises(IndexError):
        dl_ul_error_variance(b, cfg, 12, "DL")
    with pytest.raises(ValueError):
        dl_ul_error_variance(b, cfg, 0, "SI")


@pytest.mark.parametrize("bits", sorted(AQNM_ALPHA))
def test_aqnm_alpha(bits):
    assert_allclose(aqnm_alpha(bits), AQNM_ALPHA[bits], rtol=1e-14)


def test_aqnm_alpha_limits():
    assert aqnm_alpha(40) == 1.0
    with pytest.raises(ValueError):
        aqnm_alpha(0)
    vals = [aqnm_alpha(b) for b in range(1, 20)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_quant_noise_variance():
    a = AQNM_ALPHA[4]
    # alpha (1 - alpha) (s (1 + alpha_tx) + 1) with s = 10, alpha_tx = 0.1
    assert_allclose(quant_noise_variance(a, 10.0, 0.1), a * (1 - a) * 12.0)
    assert_allclose(quant_noise_variance(a, 10.0, 0.1), 0.12617738389253894, rtol=1e-12)
    assert quant_noise_variance(1.0, 10.0, 0.1) == 0.0


def test_pilot_matrix_orthonormal_rows():
    p = pilot_matrix(4, 6)
    assert p.shape == (4, 6)
    assert_allclose(p @ p.conj().T, np.eye(4), atol=1e-14)
    with pytest.raises(DimensionError):
        pilot_matrix(6, 4)


def test_quantize_alpha_one_is_identity(rng):
    cfg = SystemConfig()
    u = draw_iid(64, 24, rng)
    st_ = quantize_aqnm(u, 1.0, derive_link_budget(cfg), cfg, rng)
    assert_array_equal(st_.u_siq, u)


def test_quantization_noise_uncorrelated(rng):
    cfg = SystemConfig()
    b = derive_link_budget(cfg)
    u = draw_iid(64, 24, rng, 70)
    a = aqnm_alpha(2)
    st_ = quantize_aqnm(u, a, b, cfg, rng)
    nq = st_.u_siq - a * u
    corr = np.vdot(u, nq) / np.sqrt(np.vdot(u, u).real * np.vdot(nq, nq).real)
    assert abs(corr) < 0.01
    assert_allclose(np.mean(np.abs(nq) ** 2), st_.quant_noise_var, rtol=0.02)


def test_noiseless_estimate_exact(rng):
    cfg = SystemConfig(rho_d_db=160.0)
    h = draw_iid(cfg.n_rx, cfg.m_tx, rng)
    _, nmse, _ = estimate_si_channel_aqnm(h, derive_link_budget(cfg), cfg, rng,
                                          tx_noise=False, receiver_noise=False)
    assert nmse < 1e-6


def test_estimate_no_pilot_energy(rng):
    cfg = SystemConfig(rho_d_db=-20.0)
    h = draw_iid(cfg.n_rx, cfg.m_tx, rng, 50)
    _, nmse, _ = estimate_si_channel_aqnm(h, derive_link_budget(cfg), cfg, rng)
    assert abs(np.mean(nmse) - 1.0) < 0.01


def test_estimate_ideal_adc_matches_closed_form(rng):
    cfg = SystemConfig()
    b = derive_link_budget(cfg)
    h = draw_iid(cfg.n_rx, cfg.m_tx, rng, 400)
    _, nmse, state = estimate_si_channel_aqnm(h, b, cfg, rng)
    s = b.si_snr
    scale = 1 / (1 / s + 1)
    # per entry: E|c (h + n_tx h + n/sqrt(s)) - h|^2 with c the MMSE scale
    expected = (1 - scale) ** 2 + scale ** 2 * (b.alpha_tx * cfg.n_rx / cfg.tau_si + 1 / s)
    assert state.alpha == 1.0
    assert_allclose(np.mean(nmse), expected, rtol=0.02)


def test_aqnm_nmse_monotone_in_bits():
    cfg = SystemConfig()
    b = derive_link_budget(cfg)
    nmse = []
    for bits in (1, 2, 4, 8, 12):
        rng = np.random.default_rng(11)
        h = draw_iid(cfg.n_rx, cfg.m_tx, rng, 1000)
        nmse.append(float(np.mean(estimate_si_channel_aqnm(h, b, cfg, rng, bits=bits)[1])))
    assert all(a >= b for a, b in zip(nmse, nmse[1:]))
    assert nmse[0] > 0.5 and nmse[-1] < 0.11


def test_estimate_shape_check(rng):
    cfg = SystemConfig()
    with pytest.raises(DimensionError):
        estimate_si_channel_aqnm(np.zeros((3, 3)), derive_link_budget(cfg), cfg, rng)


def test_draw_estimated_channel_exact_at_zero(rng):
    h = draw_iid(4, 4, rng)
    h_hat, err = draw_estimated_channel(h, 0.0, rng)
    assert_array_equal(h_hat, h)
    assert err.epsilon_sq == 0.0


def test_draw_estimated_channel_statistics(rng):
    h = draw_iid(100, 1000, rng)
    eps = 25 / 265
    h_hat, err = draw_estimated_channel(h, eps, rng)
    e = h_hat - h
    assert_allclose(np.mean(np.abs(e) ** 2), eps, rtol=0.03)
    corr = np.vdot(h, e) / math.sqrt(np.vdot(h, h).real * np.vdot(e, e).real)
    assert abs(corr) < 0.01
    assert_allclose(err.error_matrix, e)


def test_draw_estimated_channel_rejects_negative(rng):
    with pytest.raises(ValueError):
        draw_estimated_channel(np.zeros((2, 2)), -0.1, rng)
