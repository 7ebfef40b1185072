"""Shared Monte Carlo statistics: diversity orders and precoder correlation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..analysis import SpsCorrelationStats
from ..beamforming import extended_zf_precoder, normalize_columns, zf_combiner, zf_precoder
from ..channel import draw_iid, draw_kronecker
from ..sysconfig import SystemConfig
from .metrics import MetricsTable, mean_stderr
from .scenarios import ScenarioModels, build_models

__all__ = ["SicBatch", "draw_sic_batch", "diversity_check", "estimate_sps_correlation_stats",
           "ci95", "batch_sizes", "Z95"]

Z95 = 1.959963984540054


def ci95(samples) -> tuple:
    """``(mean, lower, upper)`` normal-approximation 95% interval of the mean."""
    mean, se = mean_stderr(samples)
    return mean, mean - Z95 * se, mean + Z95 * se


def batch_sizes(total: int, size: int):
    """Split ``total`` into consecutive batches of at most ``size``."""
    while total > 0:
        b = min(size, total)
        yield b
        total -= b


@dataclass(frozen=True)
class SicBatch:
    """One batch of SI channels, errors and the beamformers built from them."""

    h_si: np.ndarray
    e_si: np.ndarray
    g_zf: np.ndarray
    g_sps: np.ndarray
    w: np.ndarray


def draw_sic_batch(cfg: SystemConfig, models: ScenarioModels, epsilon_sq: float,
                   rng: np.random.Generator, batch: int) -> SicBatch:
    """Draw channels with i.i.d. CN(0, epsilon_sq) SI errors and form both precoders.

    Downlink and uplink estimates are taken as exact; only the SI channel is
    estimated with error. ``w`` holds the full ZF combiner (rows per user).
    """
    m, n, k_dl, k_ul = cfg.m_tx, cfg.n_rx, cfg.k_dl, cfg.k_ul
    h_dl = draw_kronecker(models.dl, k_dl, m, rng, batch)
    h_ul = draw_kronecker(models.ul, n, k_ul, rng, batch)
    h_si = draw_kronecker(models.si, n, m, rng, batch)
    e_si = draw_iid(n, m, rng, batch) * np.sqrt(epsilon_sq)
    g_zf = normalize_columns(zf_precoder(h_dl))
    g_sps = normalize_columns(extended_zf_precoder(h_dl, h_si + e_si))
    return SicBatch(h_si, e_si, g_zf, g_sps, zf_combiner(h_ul))


def diversity_check(cfg: SystemConfig, trials: int, rng: np.random.Generator,
                    chunk: int = 1000) -> MetricsTable:
    """Per-user ``E{1/||f||^2}`` (ZF and SI-nulling) and ``E{1/||w||^2}`` on i.i.d. channels."""
    m, n, k_dl, k_ul = cfg.m_tx, cfg.n_rx, cfg.k_dl, cfg.k_ul
    zf_s, sps_s, w_s = [], [], []
    for b in batch_sizes(trials, chunk):
        h_dl = draw_iid(k_dl, m, rng, b)
        h_si = draw_iid(n, m, rng, b)
        h_ul = draw_iid(n, k_ul, rng, b)
        zf_s.append(1.0 / np.sum(np.abs(zf_precoder(h_dl)) ** 2, axis=-2))
        sps_s.append(1.0 / np.sum(np.abs(extended_zf_precoder(h_dl, h_si)) ** 2, axis=-2))
        w_s.append(1.0 / np.sum(np.abs(zf_combiner(h_ul)) ** 2, axis=-1))
    table = MetricsTable()
    param = f"m_tx={m};n_rx={n};k_dl={k_dl};k_ul={k_ul}"
    for name, parts, expected in (("inv_f_zf_norm_sq", zf_s, m - k_dl + 1),
                                  ("inv_f_sps_norm_sq", sps_s, m - n - k_dl + 1),
                                  ("inv_w_norm_sq", w_s, n - k_ul + 1)):
        # average over users first so each trial contributes one sample
        table.add("iid", "zf", param, name, np.mean(np.concatenate(parts), axis=-1))
        table.add_value("iid", "zf", param, "analysis:" + name, expected)
    return table


def estimate_sps_correlation_stats(cfg: SystemConfig, trials: int, rng: np.random.Generator,
                                   epsilon_sq: float, scenario="i-high",
                                   models: Optional[ScenarioModels] = None,
                                   chunk: int = 500) -> SpsCorrelationStats:
    """Correlation between SI-error products and SI-nulling precoder products.

    ``r_im_sps`` pools ``E{E_ik E_il^* g_km g_lm^*}`` over all i, m and
    k != l and divides by the pooled root second moments of both products.
    ``r_kl_si`` is the magnitude of the normalized correlation between
    precoder rows k and l, estimated over trials and columns.
    """
    models = models or build_models(scenario, cfg)
    m, n, k = cfg.m_tx, cfg.n_rx, cfg.k_dl
    xy = x2 = y2 = 0.0
    gram = np.zeros((m, m), dtype=complex)
    for b in batch_sizes(trials, chunk):
        sb = draw_sic_batch(cfg, models, epsilon_sq, rng, b)
        e, g = sb.e_si, sb.g_sps
        pe, pg = np.abs(e) ** 2, np.abs(g) ** 2
        diag = np.einsum("bik,bkm->b", pe, pg)
        xy += float(np.sum(np.sum(np.abs(e @ g) ** 2, axis=(-2, -1)) - diag))
        x2 += float(np.sum(np.sum(pe, axis=-1) ** 2 - np.sum(pe ** 2, axis=-1)))
        y2 += float(np.sum(np.sum(pg, axis=-2) ** 2 - np.sum(pg ** 2, axis=-2)))
        gram += np.einsum("bkm,blm->kl", g, g.conj())
    d = np.sqrt(np.real(np.diag(gram)))
    r_kl = np.abs(gram) / np.outer(d, d)
    pairs = m * (m - 1)
    x2 /= trials * n * pairs
    y2 /= trials * k * pairs
    if epsilon_sq == 0 or x2 == 0 or y2 == 0:
        return SpsCorrelationStats(float("nan"), r_kl, trials, degenerate=True)
    r_im = (xy / (trials * n * k * pairs)) / np.sqrt(x2 * y2)
    return SpsCorrelationStats(float(r_im), r_kl, trials)
