"""Instantaneous SINRs, residual SI power and sum rates.

Every function works on a single realization or on a stack of trials with
leading batch axes; per-user quantities are returned along the last axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .beamforming import BeamformerSet, Method, build_beamformers
from .sysconfig import LinkBudget

__all__ = [
    "ChannelSet", "TrialMetrics", "si_power", "residual_si_channel",
    "downlink_sinr", "uplink_sinr", "sum_rate", "evaluate_method",
]


@dataclass(frozen=True)
class ChannelSet:
    """True channels, their estimates and the user-to-user gains of one batch.

    Shapes: ``h_dl`` (..., K_DL, M), ``h_ul`` (..., N, K_UL), ``h_si``
    (..., N, M), ``h_uu`` (..., K_DL, K_UL). ``*_hat`` are the estimates.
    """

    h_dl: np.ndarray
    h_ul: np.ndarray
    h_si: np.ndarray
    h_uu: np.ndarray
    h_dl_hat: np.ndarray
    h_ul_hat: np.ndarray
    h_si_hat: np.ndarray

    @property
    def e_dl(self) -> np.ndarray:
        return self.h_dl_hat - self.h_dl

    @property
    def e_ul(self) -> np.ndarray:
        return self.h_ul_hat - self.h_ul

    @property
    def e_si(self) -> np.ndarray:
        return self.h_si_hat - self.h_si


@dataclass(frozen=True)
class TrialMetrics:
    """Per-user SINRs, SI power and sum rates for one method."""

    gamma_dl: np.ndarray
    gamma_ul: np.ndarray
    omega: np.ndarray
    rate_dl: np.ndarray
    rate_ul: np.ndarray
    method: Method


def si_power(combiner: np.ndarray, h_eff: np.ndarray, precoder: np.ndarray) -> np.ndarray:
    """``||w_k^T A G||^2`` for each combiner row ``w_k``.

    ``combiner`` may be a single row (N,) or the full (..., K_UL, N) matrix.
    """
    w = np.asarray(combiner)
    single = w.ndim == 1
    if single:
        w = w[None, :]
    leak = w @ h_eff @ precoder
    omega = np.sum(np.abs(leak) ** 2, axis=-1)
    return omega[0] if single else omega


def residual_si_channel(method, channels: ChannelSet) -> np.ndarray:
    """SI channel left after digital cancellation for ``method``."""
    method = Method.parse(method)
    if method is Method.SUBTRACTION:
        return channels.h_si - channels.h_si_hat
    return channels.h_si


def downlink_sinr(budget: LinkBudget, h_dl_hat: np.ndarray, e_dl: np.ndarray,
                  precoder: np.ndarray, h_uu: Optional[np.ndarray],
                  rho_uu: Optional[np.ndarray] = None) -> np.ndarray:
    """Downlink SINR of every user.

    The desired and inter-user terms use the estimated channel and the
    error term uses ``e_dl``, so that ``h = h_hat - e``. ``rho_uu``
    overrides the budget's user-to-user SNRs (zero for half duplex).
    """
    rho = budget.rho_dl_k
    eff = h_dl_hat @ precoder
    power = np.abs(eff) ** 2
    desired = np.diagonal(power, axis1=-2, axis2=-1)
    user = np.sum(power, axis=-1) - desired
    err = np.sum(np.abs(e_dl @ precoder) ** 2, axis=-1)
    rho_uu = budget.rho_uu_kk if rho_uu is None else np.asarray(rho_uu)
    if h_uu is None or not np.any(rho_uu):
        uu = 0.0
    else:
        uu = np.sum(rho_uu * np.abs(h_uu) ** 2, axis=-1)
    return rho * desired / (rho * (err + user) + uu + 1.0)


def uplink_sinr(budget: LinkBudget, combiner: np.ndarray, h_ul_hat: np.ndarray,
                e_ul: np.ndarray, omega) -> np.ndarray:
    """Uplink SINR of every user after ZF combining.

    ``omega`` is the per-user residual SI power from :func:`si_power`; it
    is inflated by ``rho_SI / alpha_anc * (1 + alpha_tx)``.
    """
    rho = budget.rho_ul_k
    eff = np.abs(combiner @ h_ul_hat) ** 2 * rho
    desired = np.diagonal(eff, axis1=-2, axis2=-1)
    user = np.sum(eff, axis=-1) - desired
    err = np.sum(np.abs(combiner @ e_ul) ** 2 * rho, axis=-1)
    si = budget.si_snr * (1.0 + budget.alpha_tx) * np.asarray(omega)
    noise = np.sum(np.abs(combiner) ** 2, axis=-1)
    return desired / (err + user + si + noise)


def sum_rate(gammas) -> np.ndarray:
    """``sum_k log2(1 + gamma_k)`` over the last axis."""
    g = np.asarray(gammas, dtype=float)
    if np.any(g < 0) or np.any(np.isnan(g)):
        raise ValueError("SINR values must be non-negative")
    return np.sum(np.log2(1.0 + g), axis=-1)


def evaluate_method(method, channels: ChannelSet, budget: LinkBudget,
                    beams: Optional[BeamformerSet] = None,
                    half_duplex: bool = False) -> TrialMetrics:
    """SINRs and rates of ``method`` for a batch of channel realizations.

    With ``half_duplex`` the SI and user-to-user terms are removed; rates are
    not halved here.
    """
    method = Method.parse(method)
    if beams is None:
        beams = build_beamformers(method, channels.h_dl_hat, channels.h_ul_hat,
                                  channels.h_si_hat)
    if half_duplex:
        omega = np.zeros(beams.combiner.shape[:-1])
        rho_uu = np.zeros_like(budget.rho_uu_kk)
    else:
        omega = si_power(beams.combiner, residual_si_channel(method, channels), beams.precoder)
        rho_uu = None
    g_dl = downlink_sinr(budget, channels.h_dl_hat, channels.e_dl, beams.precoder,
                         channels.h_uu, rho_uu)
    g_ul = uplink_sinr(budget, beams.combiner, channels.h_ul_hat, channels.e_ul, omega)
    return TrialMetrics(g_dl, g_ul, omega, sum_rate(g_dl), sum_rate(g_ul), method)
