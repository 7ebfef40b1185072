"""Channel-estimation error models.

Three sources of error variance are provided: the pilot-count formula for the
SI channel, the per-user pilot MMSE variance for the downlink/uplink channels,
and an explicit low-resolution ADC path (additive quantization noise model)
whose empirical NMSE can stand in for the SI error variance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .channel import draw_iid
from .errors import DimensionError
from .sysconfig import LinkBudget, SystemConfig

__all__ = [
    "EstimationError", "AqnmState", "pilot_si_error_variance",
    "si_error_variance_pilot", "dl_ul_error_variance", "aqnm_alpha",
    "quant_noise_variance", "pilot_matrix", "quantize_aqnm",
    "estimate_si_channel_aqnm", "draw_estimated_channel",
]

_AQNM_CONST = np.pi * np.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class EstimationError:
    """Additive error ``E`` with i.i.d. CN(0, epsilon_sq) entries."""

    epsilon_sq: float
    error_matrix: np.ndarray


@dataclass(frozen=True)
class AqnmState:
    """Intermediate quantities of one quantized SI pilot block."""

    alpha: float
    quant_noise_var: float
    u_si: np.ndarray
    u_siq: np.ndarray
    pilot: Optional[np.ndarray] = None
    mmse_scale: Optional[float] = None


def pilot_si_error_variance(si_snr: float, alpha_tx: float, n_rx: int, tau_si: int) -> float:
    """SI error variance for ``tau_si`` pilots with transmitter noise ``alpha_tx``.

    ``si_snr`` is the SI-to-noise ratio after passive cancellation.
    """
    if tau_si < n_rx:
        raise ValueError(f"need at least n_rx={n_rx} pilot symbols, got {tau_si}")
    if si_snr < 0 or alpha_tx < 0:
        raise ValueError("si_snr and alpha_tx must be non-negative")
    tx_noise = alpha_tx * n_rx * si_snr
    return (tx_noise + 1.0) / (tau_si * si_snr + tx_noise + 1.0)


def si_error_variance_pilot(budget: LinkBudget, cfg: SystemConfig,
                            tau_si: Optional[int] = None) -> float:
    """SI error variance from the configured pilot count and link budget."""
    tau = cfg.tau_si if tau_si is None else tau_si
    return pilot_si_error_variance(budget.si_snr, budget.alpha_tx, cfg.n_rx, tau)


def dl_ul_error_variance(budget: LinkBudget, cfg: SystemConfig, user: int,
                         link: str) -> Tuple[float, float]:
    """Return ``(epsilon_sq, estimated_channel_variance)`` for one user.

    The two values always sum to one. ``link`` is ``"DL"`` or ``"UL"``.
    """
    link = link.upper()
    if link == "DL":
        if not 0 <= user < cfg.k_dl:
            raise IndexError(f"downlink user {user} out of range")
        snr = cfg.k_dl * budget.rho_u_dl * budget.beta_dl_k[user]
    elif link == "UL":
        if not 0 <= user < cfg.k_ul:
            raise IndexError(f"uplink user {user} out of range")
        # received uplink SNR already includes the propagation gain
        snr = cfg.k_ul * budget.rho_ul_k[user]
    else:
        raise ValueError(f"link must be 'DL' or 'UL', got {link!r}")
    eps = 1.0 / (snr + 1.0)
    return eps, 1.0 - eps


def aqnm_alpha(bits: int) -> float:
    """Linear gain of a ``bits``-resolution quantizer under the AQNM."""
    if bits < 1:
        raise ValueError(f"ADC resolution must be at least 1 bit, got {bits}")
    return float(min(1.0, max(1.0 - _AQNM_CONST * 2.0 ** (-2 * bits), np.finfo(float).tiny)))


def quant_noise_variance(alpha: float, si_snr: float, alpha_tx: float) -> float:
    """Variance of the quantization noise for a unit-gain SI pilot block."""
    return alpha * (1.0 - alpha) * (si_snr * (1.0 + alpha_tx) + 1.0)


def pilot_matrix(n_rx: int, tau_si: int) -> np.ndarray:
    """``n_rx x tau_si`` pilot with orthonormal rows (first rows of a unitary DFT)."""
    if tau_si < n_rx:
        raise DimensionError(f"tau_si={tau_si} < n_rx={n_rx}")
    t = np.arange(tau_si)
    return np.exp(-2j * np.pi * np.outer(np.arange(n_rx), t) / tau_si) / np.sqrt(tau_si)


def quantize_aqnm(u_si: np.ndarray, alpha: float, budget: LinkBudget,
                  cfg: SystemConfig, rng: np.random.Generator) -> AqnmState:
    """Apply ``alpha * U + N_q`` with N_q drawn independently of ``U``."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    var = quant_noise_variance(alpha, budget.si_snr, budget.alpha_tx)
    u_si = np.asarray(u_si)
    # always draw so that the random stream does not depend on alpha
    nq = draw_iid(u_si.shape[-2], u_si.shape[-1], rng,
                  batch=None if u_si.ndim == 2 else u_si.shape[0])
    u_siq = alpha * u_si + np.sqrt(var) * nq
    return AqnmState(alpha=alpha, quant_noise_var=var, u_si=u_si, u_siq=u_siq)


def estimate_si_channel_aqnm(h_si: np.ndarray, budget: LinkBudget, cfg: SystemConfig,
                             rng: np.random.Generator, bits: Optional[int] = None,
                             tx_noise: bool = True, receiver_noise: bool = True,
                             ) -> Tuple[np.ndarray, np.ndarray, AqnmState]:
    """Pilot-based SI channel estimate through a low-resolution ADC.

    The received pilot block is ``sqrt(s) H^T (P + N_tx) + N_p`` with
    ``s = rho_SI / alpha_anc``. After quantization it is de-spread with
    ``P^H`` and scaled by the scalar MMSE factor ``1 / (1/s + 1)``.

    ``h_si`` is ``(n_rx, m_tx)`` or a batch ``(B, n_rx, m_tx)``. Returns the
    estimate, the NMSE per realization and the quantizer state. ``bits``
    defaults to ``cfg.adc_bits``; when both are None the ADC is ideal.
    """
    h_si = np.asarray(h_si)
    if h_si.shape[-2:] != (cfg.n_rx, cfg.m_tx):
        raise DimensionError(f"SI channel must be {cfg.n_rx}x{cfg.m_tx}, got {h_si.shape[-2:]}")
    batch = None if h_si.ndim == 2 else h_si.shape[0]
    s = budget.si_snr
    if s <= 0:
        raise ValueError("SI pilot SNR must be positive")
    p = pilot_matrix(cfg.n_rx, cfg.tau_si)
    tau = cfg.tau_si

    # fixed draw order keeps streams aligned across ADC resolutions
    n_tx = draw_iid(cfg.n_rx, tau, rng, batch) * np.sqrt(budget.alpha_tx / tau)
    n_p = draw_iid(cfg.m_tx, tau, rng, batch)
    if not tx_noise:
        n_tx = np.zeros_like(n_tx)
    if not receiver_noise:
        n_p = np.zeros_like(n_p)
    h_t = np.swapaxes(h_si, -1, -2)
    u_si = np.sqrt(s) * h_t @ (p + n_tx) + n_p

    bits = cfg.adc_bits if bits is None else bits
    alpha = 1.0 if bits is None else aqnm_alpha(bits)
    state = quantize_aqnm(u_si, alpha, budget, cfg, rng)
    scale = 1.0 / (1.0 / s + 1.0)
    h_hat_t = (state.u_siq @ p.conj().T) * (scale / np.sqrt(s))
    h_hat = np.swapaxes(h_hat_t, -1, -2)
    err = np.sum(np.abs(h_hat - h_si) ** 2, axis=(-2, -1))
    nmse = err / np.sum(np.abs(h_si) ** 2, axis=(-2, -1))
    state = AqnmState(alpha=state.alpha, quant_noise_var=state.quant_noise_var,
                      u_si=state.u_si, u_siq=state.u_siq, pilot=p, mmse_scale=scale)
    return h_hat, nmse, state


def draw_estimated_channel(h: np.ndarray, epsilon_sq: float,
                           rng: np.random.Generator) -> Tuple[np.ndarray, EstimationError]:
    """Return ``(H + E, E)`` with ``E`` i.i.d. CN(0, epsilon_sq), independent of ``H``."""
    if not epsilon_sq >= 0:
        raise ValueError(f"error variance must be non-negative, got {epsilon_sq}")
    h = np.asarray(h)
    batch = None if h.ndim == 2 else h.shape[0]
    e = draw_iid(h.shape[-2], h.shape[-1], rng, batch)
    if epsilon_sq == 0:
        e = np.zeros_like(e)
    else:
        e *= np.sqrt(epsilon_sq)
    return h + e, EstimationError(float(epsilon_sq), e)
