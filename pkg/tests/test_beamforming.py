import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from fdmimo.beamforming import (Method, build_beamformers, extended_zf_precoder,
                                normalize_columns, zf_combiner, zf_precoder)
from fdmimo.channel import draw_iid
from fdmimo.errors import DimensionError, SingularChannelError


def test_method_parse_aliases():
    assert Method.parse("STT") is Method.SUBTRACTION
    assert Method.parse("suppression") is Method.SPATIAL_SUPPRESSION
    assert Method.parse("none") is Method.NO_SIC
    with pytest.raises(ValueError):
        Method.parse("fancy")


def test_zf_identity_and_scalar():
    assert_allclose(zf_precoder(np.eye(4)), np.eye(4))
    assert_allclose(zf_precoder(2 * np.eye(3)), 0.5 * np.eye(3))


def test_zf_two_by_two_closed_form():
    h = np.array([[1 + 1j, 2], [0.5, -1j]])
    # for a square channel the right pseudo-inverse is the inverse
    a, b, c, d = h.ravel()
    inv = np.array([[d, -b], [-c, a]]) / (a * d - b * c)
    assert_allclose(zf_precoder(h), inv, atol=1e-14)


def test_zf_residual(rng):
    h = draw_iid(12, 64, rng)
    assert np.max(np.abs(h @ zf_precoder(h) - np.eye(12))) < 1e-8


def test_zf_batched_matches_loop(rng):
    h = draw_iid(3, 8, rng, 5)
    f = zf_precoder(h)
    for b in range(5):
        assert_allclose(f[b], zf_precoder(h[b]), atol=1e-13)


def test_zf_rejects_too_many_users(rng):
    with pytest.raises(DimensionError):
        zf_precoder(draw_iid(5, 4, rng))


def test_extended_zf_empty_si_block(rng):
    h = draw_iid(4, 10, rng)
    assert_array_equal(extended_zf_precoder(h, np.zeros((0, 10))), zf_precoder(h))


def test_extended_zf_residuals(rng):
    h_dl = draw_iid(12, 64, rng)
    h_si = draw_iid(24, 64, rng)
    g = extended_zf_precoder(h_dl, h_si)
    assert np.max(np.abs(h_dl @ g - np.eye(12))) < 1e-8
    assert np.max(np.abs(h_si @ g)) < 1e-8


def test_extended_zf_duplicated_row(rng):
    h_dl = draw_iid(4, 16, rng)
    h_si = draw_iid(6, 16, rng)
    h_si[2] = h_dl[1]
    with pytest.raises(SingularChannelError):
        extended_zf_precoder(h_dl, h_si)


def test_extended_zf_needs_dimensions(rng):
    with pytest.raises(DimensionError):
        extended_zf_precoder(draw_iid(4, 10, rng), draw_iid(8, 10, rng))
    with pytest.raises(DimensionError):
        extended_zf_precoder(draw_iid(4, 10, rng), draw_iid(2, 9, rng))


def test_extended_zf_shared_si_channel_broadcasts(rng):
    h_dl = draw_iid(3, 12, rng, 4)
    h_si = draw_iid(5, 12, rng)
    g = extended_zf_precoder(h_dl, h_si)
    assert g.shape == (4, 12, 3)
    assert np.max(np.abs(h_si @ g)) < 1e-10


def test_normalize_unit_columns():
    assert_allclose(normalize_columns(np.eye(4)), 0.5 * np.eye(4))
    assert_allclose(normalize_columns(np.array([[3.0], [4.0]])), [[0.6], [0.8]])


def test_normalize_zero_column():
    with pytest.raises(ValueError):
        normalize_columns(np.array([[1.0, 0.0], [0.0, 0.0]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_normalize_total_power_one(k, extra, seed):
    f = draw_iid(k + extra, k, np.random.default_rng(seed))
    g = normalize_columns(f)
    assert_allclose(np.sum(np.abs(g) ** 2), 1.0)
    assert_allclose(np.sum(np.abs(g) ** 2, axis=0), 1.0 / k)


def test_combiner_identity_and_residual(rng):
    assert_allclose(zf_combiner(np.eye(3)), np.eye(3))
    h = draw_iid(24, 12, rng)
    assert np.max(np.abs(zf_combiner(h) @ h - np.eye(12))) < 1e-8


def test_combiner_duplicated_users(rng):
    h = draw_iid(6, 3, rng)
    h[:, 2] = h[:, 0]
    with pytest.raises(SingularChannelError):
        zf_combiner(h)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 5), st.integers(0, 5), st.integers(0, 2 ** 32 - 1))
def test_extended_zf_properties(k, n, spare, seed):
    rng = np.random.default_rng(seed)
    m = k + n + spare
    h_dl = draw_iid(k, m, rng)
    h_si = draw_iid(n, m, rng)
    g = extended_zf_precoder(h_dl, h_si)
    assert_allclose(h_dl @ g, np.eye(k), atol=1e-7)
    if n:
        assert np.max(np.abs(h_si @ g)) < 1e-7


def test_build_beamformers(rng):
    h_dl, h_ul, h_si = draw_iid(4, 16, rng), draw_iid(8, 4, rng), draw_iid(8, 16, rng)
    stt = build_beamformers("stt", h_dl, h_ul, h_si)
    sps = build_beamformers("sps", h_dl, h_ul, h_si)
    assert_allclose(stt.precoder_raw, zf_precoder(h_dl))
    assert_allclose(sps.precoder_raw, extended_zf_precoder(h_dl, h_si))
    assert_array_equal(stt.combiner, sps.combiner)
    assert_allclose(np.sum(np.abs(sps.precoder) ** 2), 1.0)
    with pytest.raises(ValueError):
        build_beamformers("sps", h_dl, h_ul, None)
