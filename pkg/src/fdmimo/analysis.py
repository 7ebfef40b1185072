"""Closed-form rate, SI-power and trade-off expressions.

Conventions: ``K`` is the number of users per link (the trade-off
functions assume ``K_DL == K_UL``), SNRs are linear, rates are in
bits/s/Hz. Per-user arrays follow the ordering of :class:`LinkBudget`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .beamforming import Method
from .errors import DimensionError
from .sysconfig import LinkBudget, SystemConfig

__all__ = [
    "RateApprox", "ConstraintReport", "SpsCorrelationStats", "HighSinrTerms",
    "perfect_csi_rates", "half_duplex_rates", "expected_si_power",
    "approx_uplink_sinr", "rate_approx", "high_sinr_terms", "rate_gap_analysis",
    "power_scaling_cross_point", "cross_point_from_omega", "optimal_antenna_ratio",
    "DEFAULT_Q", "DEFAULT_R_MAX_DL",
]

DEFAULT_Q = 2.0
DEFAULT_R_MAX_DL = 8.0


@dataclass(frozen=True)
class RateApprox:
    """Approximate ergodic rates per user and summed over users."""

    r_dl_per_user: np.ndarray
    r_ul_per_user: np.ndarray
    method: Union[Method, str]

    @property
    def r_dl_sum(self) -> float:
        return float(np.sum(self.r_dl_per_user))

    @property
    def r_ul_sum(self) -> float:
        return float(np.sum(self.r_ul_per_user))

    @property
    def total(self) -> float:
        return self.r_dl_sum + self.r_ul_sum


@dataclass(frozen=True)
class SpsCorrelationStats:
    """Correlation statistics of the spatial-suppression precoder.

    ``r_im_sps`` is the pooled correlation between error products
    ``E_ik E_il^*`` and precoder products ``g_km g_lm^*`` (k != l);
    ``r_kl_si`` is the M x M correlation magnitude between precoder rows.
    """

    r_im_sps: float
    r_kl_si: np.ndarray
    trials: int = 0
    degenerate: bool = False


@dataclass(frozen=True)
class HighSinrTerms:
    """Coefficients of the high-SINR model written in the received DL SNR ``phi``.

    Uplink SINRs are ``s / (i + omega * phi)`` and downlink SINRs are
    ``(M - K) * phi`` (subtraction) or ``(M - N - K) * phi`` (suppression).
    """

    s: float
    i: float
    omega_stt: float
    omega_sps: float
    kappa: float

    @property
    def omega_delta(self) -> float:
        return self.omega_stt - self.omega_sps


@dataclass(frozen=True)
class ConstraintReport:
    """Results of the rate-gap and power-scaling comparisons."""

    delta_dl: float
    kappa: Optional[float] = None
    delta_ul: Optional[float] = None
    gap_dl: Optional[float] = None
    gap_ul: Optional[float] = None
    r_delta: Optional[float] = None
    r_cross: Optional[float] = None
    phi: Optional[float] = None
    phi_stt: Optional[float] = None
    phi_sps: Optional[float] = None
    eta: Optional[float] = None
    s_term: Optional[float] = None
    i_term: Optional[float] = None
    omega_stt: Optional[float] = None
    omega_delta: Optional[float] = None
    r_max_dl: Optional[float] = None
    rates: dict = field(default_factory=dict)
    ratio_inequality_holds: Optional[bool] = None
    uplink_winner: Optional[Method] = None


def _uu_load(budget: LinkBudget, zero_uu: bool = False) -> np.ndarray:
    if zero_uu:
        return np.zeros(budget.rho_dl_k.shape)
    return np.sum(budget.rho_uu_kk, axis=-1)


def _check_sps_geometry(cfg: SystemConfig):
    if cfg.m_tx < cfg.n_rx + cfg.k_dl:
        raise DimensionError(
            f"spatial suppression needs M >= N + K_DL ({cfg.m_tx} < {cfg.n_rx + cfg.k_dl})")


def perfect_csi_rates(cfg: SystemConfig, budget: LinkBudget, method) -> RateApprox:
    """Approximate per-user rates with perfect channel knowledge.

    Downlink diversity is ``M - K + 1`` for ZF and ``M - N - K + 1`` for the
    SI-nulling precoder; the uplink gets ``N - K + 1`` for both cancelling
    methods. Without cancellation the uplink keeps the full SI power.
    """
    method = Method.parse(method)
    m, n, k_dl, k_ul = cfg.m_tx, cfg.n_rx, cfg.k_dl, cfg.k_ul
    if method is Method.SPATIAL_SUPPRESSION:
        _check_sps_geometry(cfg)
        div = m - n - k_dl + 1
    else:
        div = m - k_dl + 1
    gamma_dl = budget.rho_dl_k * div / (k_dl * (_uu_load(budget) + 1.0))
    gamma_ul = budget.rho_ul_k * (n - k_ul + 1)
    if method is Method.NO_SIC:
        gamma_ul = gamma_ul / (1.0 + budget.si_snr * (1.0 + budget.alpha_tx))
    return RateApprox(np.log2(1.0 + gamma_dl), np.log2(1.0 + gamma_ul), method)


def half_duplex_rates(cfg: SystemConfig, budget: LinkBudget) -> RateApprox:
    """Half-duplex ZF baseline: half of the subtraction rates without user-to-user interference."""
    m, n, k_dl, k_ul = cfg.m_tx, cfg.n_rx, cfg.k_dl, cfg.k_ul
    gamma_dl = budget.rho_dl_k * (m - k_dl + 1) / k_dl
    gamma_ul = budget.rho_ul_k * (n - k_ul + 1)
    return RateApprox(0.5 * np.log2(1.0 + gamma_dl), 0.5 * np.log2(1.0 + gamma_ul), "half-duplex")


def expected_si_power(method, epsilon_sq: float, e_w_norm_sq: float) -> float:
    """Expected residual SI power for independent, unit-variance SI channels.

    Spatial suppression uses the harmonic combination of its perfect
    (``epsilon_sq * E||w||^2``) and worthless (``E||w||^2``) estimation limits.
    """
    method = Method.parse(method)
    if epsilon_sq < 0:
        raise ValueError("epsilon_sq must be non-negative")
    if method is Method.NO_SIC:
        return float(e_w_norm_sq)
    if method is Method.SUBTRACTION:
        return float(epsilon_sq * e_w_norm_sq)
    if epsilon_sq == 0:
        return 0.0
    if np.isinf(epsilon_sq):
        return float(e_w_norm_sq)
    return float(e_w_norm_sq / (1.0 / epsilon_sq + 1.0))


def _si_scale(method: Method, epsilon_sq_si: float) -> float:
    if method is Method.NO_SIC:
        return 1.0
    if method is Method.SUBTRACTION:
        return epsilon_sq_si
    return 0.0 if epsilon_sq_si == 0 else 1.0 / (1.0 / epsilon_sq_si + 1.0)


def approx_uplink_sinr(method, cfg: SystemConfig, budget: LinkBudget,
                       epsilon_sq_si: float) -> np.ndarray:
    """Per-user uplink SINR approximation under imperfect CSI."""
    method = Method.parse(method)
    k, n = cfg.k_ul, cfg.n_rx
    rho = budget.rho_ul_k
    numer = (k * rho + 1.0) * (n - k + 1)
    interference = k * (np.sum(rho / (k * rho + 1.0)) + 1.0)
    si = budget.si_snr * _si_scale(method, epsilon_sq_si) * k * (1.0 + budget.alpha_tx)
    return numer / (interference + si)


def rate_approx(expected_signal, expected_interference_plus_noise):
    """``log2(1 + E{S} / E{I + N})``."""
    den = np.asarray(expected_interference_plus_noise, dtype=float)
    if np.any(den <= 0):
        raise ValueError("interference-plus-noise power must be positive")
    return np.log2(1.0 + np.asarray(expected_signal, dtype=float) / den)


def high_sinr_terms(cfg: SystemConfig, budget: LinkBudget, epsilon_sq_si: float,
                    omega_ratio: Optional[float] = None) -> HighSinrTerms:
    """Rewrite the uplink approximations in terms of ``phi = kappa * rho_d``.

    The SI denominators scale as ``rho_SI / alpha_anc = phi * beta_SI /
    (kappa * alpha_anc)``, so ``omega`` collects everything else. Without
    ``omega_ratio`` the suppression term uses the harmonic approximation;
    otherwise ``omega_sps = omega_ratio * omega_stt`` (e.g. a simulated
    ratio of expected SI powers).
    """
    k, n = cfg.k_ul, cfg.n_rx
    rho = budget.rho_ul_k[0]
    kappa = budget.beta_dl_k[0] / (cfg.k_dl * (_uu_load(budget)[0] + 1.0))
    s = (k * rho + 1.0) * (n - k + 1)
    i = k * (np.sum(budget.rho_ul_k / (k * budget.rho_ul_k + 1.0)) + 1.0)
    base = cfg.beta_si / (kappa * budget.alpha_anc) * k * (1.0 + budget.alpha_tx)
    omega_stt = base * epsilon_sq_si
    if omega_ratio is None:
        omega_sps = base * _si_scale(Method.SPATIAL_SUPPRESSION, epsilon_sq_si)
    else:
        omega_sps = omega_ratio * omega_stt
    return HighSinrTerms(float(s), float(i), float(omega_stt), float(omega_sps), float(kappa))


def _delta_dl(cfg: SystemConfig) -> float:
    m, n, k = cfg.m_tx, cfg.n_rx, cfg.k_dl
    if m - k <= n:
        raise DimensionError(f"need M - K > N for the downlink gap ({m} - {k} <= {n})")
    return n / (m - k)


def rate_gap_analysis(cfg: SystemConfig, phi: float, s: float, i: float,
                      omega_stt: float, omega_delta: float) -> ConstraintReport:
    """Per-user downlink/uplink rate gaps between the two cancelling methods at equal power."""
    m, n, k = cfg.m_tx, cfg.n_rx, cfg.k_dl
    delta_dl = _delta_dl(cfg)
    g_dl_stt = (m - k) * phi
    g_dl_sps = (m - n - k) * phi
    g_ul_stt = s / (i + omega_stt * phi)
    g_ul_sps = s / (i + (omega_stt - omega_delta) * phi)
    delta_ul = omega_delta * phi / (i + omega_stt * phi)
    gap_dl = -np.log2(1.0 - delta_dl * g_dl_stt / (1.0 + g_dl_stt))
    gap_ul = -np.log2(1.0 - delta_ul * g_ul_sps / (1.0 + g_ul_sps))
    rates = {
        "dl_stt": float(np.log2(1.0 + g_dl_stt)), "dl_sps": float(np.log2(1.0 + g_dl_sps)),
        "ul_stt": float(np.log2(1.0 + g_ul_stt)), "ul_sps": float(np.log2(1.0 + g_ul_sps)),
    }
    holds = rates["dl_stt"] * rates["ul_sps"] >= rates["dl_sps"] * rates["ul_stt"]
    return ConstraintReport(
        delta_dl=delta_dl, delta_ul=float(delta_ul), gap_dl=float(gap_dl), gap_ul=float(gap_ul),
        r_delta=rates["dl_stt"] - rates["ul_sps"], phi=phi, s_term=s, i_term=i,
        omega_stt=omega_stt, omega_delta=omega_delta, rates=rates,
        ratio_inequality_holds=bool(holds))


def cross_point_from_omega(cfg: SystemConfig, omega_stt: float, omega_delta: float) -> float:
    """Uplink cross point ``omega_delta / (delta_dl * omega_stt)``; >= 1 favours suppression."""
    return float(omega_delta / (_delta_dl(cfg) * omega_stt))


def power_scaling_cross_point(cfg: SystemConfig, q: float = DEFAULT_Q,
                              r_sps_corr: Optional[SpsCorrelationStats] = None,
                              terms: Optional[HighSinrTerms] = None,
                              r_max_dl: float = DEFAULT_R_MAX_DL) -> ConstraintReport:
    """Uplink comparison when each method only spends the power needed for ``r_max_dl``.

    The cross point comes from the correlation statistics when given (the
    error/precoder correlation enters with a negative sign, so negatively
    correlated products favour suppression), else from ``terms``.
    """
    m, n, k = cfg.m_tx, cfg.n_rx, cfg.k_dl
    delta_dl = _delta_dl(cfg)
    need = 2.0 ** r_max_dl - 1.0
    phi_stt = need / (m - k)
    phi_sps = need / (m - n - k)
    if r_sps_corr is not None:
        r_kl = np.asarray(r_sps_corr.r_kl_si, dtype=float)
        if r_kl.shape != (m, m):
            raise DimensionError(f"r_kl_si must be {m}x{m}")
        spread = np.sum(np.sqrt(q * r_kl ** 2 + 1.0)) / (m * k)
        r_cross = (m - k) / n * k * spread * (-r_sps_corr.r_im_sps)
    elif terms is not None:
        r_cross = cross_point_from_omega(cfg, terms.omega_stt, terms.omega_delta)
    else:
        raise ValueError("need either correlation statistics or high-SINR terms")
    report = ConstraintReport(
        delta_dl=delta_dl, r_cross=float(r_cross), phi_stt=phi_stt, phi_sps=phi_sps,
        r_max_dl=r_max_dl,
        uplink_winner=Method.SPATIAL_SUPPRESSION if r_cross >= 1 else Method.SUBTRACTION)
    if terms is not None:
        report = _with_terms(report, terms)
    return report


def _with_terms(report: ConstraintReport, terms: HighSinrTerms) -> ConstraintReport:
    from dataclasses import replace
    return replace(report, s_term=terms.s, i_term=terms.i, omega_stt=terms.omega_stt,
                   omega_delta=terms.omega_delta, kappa=terms.kappa)


def optimal_antenna_ratio(eta: float):
    """Transmit/receive chain ratios ``M/N`` that match a traffic ratio ``eta``.

    Returns ``(ratio_stt, ratio_sps)``; suppression spends ``N`` transmit
    dimensions on nulling, hence the extra one.
    """
    if not eta > 0:
        raise ValueError("traffic ratio must be positive")
    return float(eta), float(eta + 1.0)
