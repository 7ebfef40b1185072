"""Numerical checks of the expected-SI-power decomposition and its sign claims.

Each check returns a :class:`LemmaReport`. Verdicts come only from the
stated procedure: equalities use the 95% interval of a difference (or a
ratio band), sign claims require the 95% interval to exclude zero on the
claimed side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from ..channel import draw_iid
from ..errors import FdMimoError
from ..sysconfig import SystemConfig
from .scenarios import Scenario, build_models
from .stats import SicBatch, batch_sizes, ci95, draw_sic_batch

__all__ = ["LemmaReport", "verify_lemma", "LemmaSetupError"]


class LemmaSetupError(FdMimoError, ValueError):
    """The requested check cannot be run with the given setup."""


@dataclass(frozen=True)
class LemmaReport:
    """Outcome of one check.

    ``lhs``/``rhs`` carry ``(estimate, lower, upper)``; for exact or
    reference quantities the bounds coincide with the estimate.
    """

    lemma_id: int
    lhs: Tuple[float, float, float]
    rhs: Tuple[float, float, float]
    verdict: bool
    decomposition_terms: Dict[str, float] = field(default_factory=dict)
    details: str = ""

    def summary(self) -> str:
        status = "PASS" if self.verdict else "FAIL"
        terms = ", ".join(f"{k}={v:.6g}" for k, v in self.decomposition_terms.items())
        return (f"lemma {self.lemma_id}: {status}  lhs={self.lhs[0]:.6g} "
                f"[{self.lhs[1]:.6g}, {self.lhs[2]:.6g}]  rhs={self.rhs[0]:.6g} "
                f"[{self.rhs[1]:.6g}, {self.rhs[2]:.6g}]" + (f"  ({terms})" if terms else "")
                + (f"\n  {self.details}" if self.details else ""))


def _exact(x: float) -> Tuple[float, float, float]:
    return (float(x), float(x), float(x))


def _models(cfg, scenario):
    scenario = Scenario.parse(scenario)
    if scenario is Scenario.RAY_FILE:
        raise LemmaSetupError("lemma checks use the synthetic scenarios")
    return build_models(scenario, cfg)


def _lemma1(cfg, trials, rng, epsilon_sq, scenario, batches, user):
    """Decomposition: sum of the independent, zeta and cross-antenna terms equals the direct value."""
    models = _models(cfg, scenario)
    per = max(1, trials // batches)
    rows = []
    for _ in range(batches):
        ww = np.zeros((cfg.n_rx, cfg.n_rx), dtype=complex)
        cc = np.zeros_like(ww)
        pa = np.zeros((cfg.n_rx, cfg.m_tx))
        pg = np.zeros(cfg.m_tx)
        direct = 0.0
        for b in batch_sizes(per, 500):
            sb = draw_sic_batch(cfg, models, epsilon_sq, rng, b)
            w = sb.w[:, user, :]
            a, g = sb.h_si, sb.g_sps
            ag = a @ g
            ww += np.einsum("bi,bj->ij", w, w.conj())
            cc += np.einsum("bim,bjm->ij", ag, ag.conj())
            pa += np.sum(np.abs(a) ** 2, axis=0)
            pg += np.sum(np.abs(g) ** 2, axis=(0, 2))
            direct += float(np.sum(np.abs(np.einsum("bi,bim->bm", w, ag)) ** 2))
        ww, cc, pa, pg, direct = ww / per, cc / per, pa / per, pg / per, direct / per
        w_diag = np.real(np.diag(ww))
        indep_i = pa @ pg
        t_indep = float(w_diag @ indep_i)
        t_zeta = float(w_diag @ (np.real(np.diag(cc)) - indep_i))
        off = ~np.eye(cfg.n_rx, dtype=bool)
        t_cross = float(np.real(np.sum(ww[off] * cc[off])))
        rows.append((t_indep, t_zeta, t_cross, direct))
    rows = np.array(rows)
    total = rows[:, :3].sum(axis=1)
    diff = total - rows[:, 3]
    d_mean, d_lo, d_hi = ci95(diff)
    verdict = d_lo <= 0.0 <= d_hi or abs(d_mean) <= 0.01 * abs(rows[:, 3].mean())
    return LemmaReport(
        1, ci95(total), ci95(rows[:, 3]), bool(verdict),
        {"independent": rows[:, 0].mean(), "zeta": rows[:, 1].mean(),
         "cross_antenna": rows[:, 2].mean(), "difference": d_mean},
        "lhs = sum of decomposition terms, rhs = direct E||w^T A G||^2 (batch means)")


def _lemma2(cfg, trials, rng, sigma_a_sq):
    """Independent i.i.d. w, A, G: E||w^T A G||^2 = sigma_A^2 E||w||^2."""
    n, m, k = cfg.n_rx, cfg.m_tx, cfg.k_dl
    lhs_s, rhs_s = [], []
    for b in batch_sizes(trials, 20000):
        w = draw_iid(1, n, rng, b)
        a = draw_iid(n, m, rng, b) * np.sqrt(sigma_a_sq)
        g = draw_iid(m, k, rng, b) / np.sqrt(m * k)
        lhs_s.append(np.sum(np.abs(w @ a @ g) ** 2, axis=(-2, -1)))
        rhs_s.append(sigma_a_sq * np.sum(np.abs(w) ** 2, axis=(-2, -1)))
    lhs_s, rhs_s = np.concatenate(lhs_s), np.concatenate(rhs_s)
    ratio = lhs_s.mean() / rhs_s.mean()
    return LemmaReport(2, ci95(lhs_s), ci95(rhs_s), bool(0.97 <= ratio <= 1.03),
                       {"ratio": float(ratio)}, "verdict: ratio within [0.97, 1.03]")


def _zeta_samples(sb: SicBatch, epsilon_sq):
    """Per-trial sums over (i, k, m) of the covariance and cross-product parts of zeta."""
    e, g = sb.e_si, sb.g_sps
    n = e.shape[-2]
    diag = np.einsum("bik,bkm->b", np.abs(e) ** 2, np.abs(g) ** 2)
    full = np.sum(np.abs(e @ g) ** 2, axis=(-2, -1))
    return diag - n * epsilon_sq, full - diag


def _lemma3(cfg, trials, rng, epsilon_sq, scenario):
    """Sign of the summed zeta term of the SI-nulling precoder."""
    models = _models(cfg, scenario)
    cov, cross = [], []
    for b in batch_sizes(trials, 500):
        c, x = _zeta_samples(draw_sic_batch(cfg, models, epsilon_sq, rng, b), epsilon_sq)
        cov.append(c)
        cross.append(x)
    cov, cross = np.concatenate(cov), np.concatenate(cross)
    scale = cfg.n_rx * cfg.m_tx * cfg.k_dl
    zeta = (cov + cross) / scale
    est = ci95(zeta)
    return LemmaReport(3, est, _exact(0.0), bool(est[2] < 0.0),
                       {"covariance_part": cov.mean() / scale, "cross_part": cross.mean() / scale},
                       "lhs = zeta averaged over (i, k, m); verdict: upper 95% bound below 0")


def _lemma4(cfg, trials, rng, epsilon_sq, scenario, q, rel_tol):
    """Correlated-channel form of zeta and the moment identity behind it."""
    scenario = Scenario.parse(scenario)
    if scenario is Scenario.IID:
        raise LemmaSetupError("the correlated-channel form needs a correlated SI scenario")
    if epsilon_sq <= 0:
        raise LemmaSetupError("the correlated-channel form needs a positive SI error variance")
    models = _models(cfg, scenario)
    m, n, k = cfg.m_tx, cfg.n_rx, cfg.k_dl
    pairs = m * (m - 1)
    cov_t, cross_t, mean_g2 = [], [], []
    sum_p2 = sum_p4 = 0.0
    prod = np.zeros((m, m))
    gram = np.zeros((m, m), dtype=complex)
    x2 = 0.0
    for b in batch_sizes(trials, 500):
        sb = draw_sic_batch(cfg, models, epsilon_sq, rng, b)
        c, x = _zeta_samples(sb, epsilon_sq)
        cov_t.append(c)
        cross_t.append(x)
        pg = np.abs(sb.g_sps) ** 2
        pe = np.abs(sb.e_si) ** 2
        mean_g2.append(pg.mean(axis=(-2, -1)))
        sum_p2 += float(pg.sum())
        sum_p4 += float((pg ** 2).sum())
        prod += np.einsum("bkm,blm->kl", pg, pg)
        gram += np.einsum("bkm,blm->kl", sb.g_sps, sb.g_sps.conj())
        x2 += float(np.sum(np.sum(pe, axis=-1) ** 2 - np.sum(pe ** 2, axis=-1)))
    cov_t, cross_t = np.concatenate(cov_t), np.concatenate(cross_t)
    count = trials * k
    e_g2 = sum_p2 / (count * m)
    e_g4 = sum_p4 / (count * m)
    q_hat = e_g4 / e_g2 ** 2
    second = prod / count
    corr = gram / count
    off = ~np.eye(m, dtype=bool)
    r_kl = np.abs(corr[off]) / e_g2
    # moment identity: E|g_k|^2|g_l|^2 + |E g_k g_l^*|^2 = r^2 E|g|^4 + (E|g|^2)^2
    ident_lhs = float(np.mean(second[off] + np.abs(corr[off]) ** 2))
    ident_rhs = float(np.mean(r_kl ** 2 * e_g4 + e_g2 ** 2))
    identity_ok = abs(ident_lhs - ident_rhs) <= rel_tol * ident_rhs
    power_ok = abs(float(np.mean(mean_g2)) - 1.0 / (m * k)) <= 1e-9 / (m * k)

    # term-by-term form with the pooled correlation r_im and the model spread
    x2 /= trials * n * pairs
    y2 = float(np.mean(second[off]))
    r_im = (cross_t.mean() / (n * k * pairs)) / np.sqrt(x2 * y2)
    model_spread = np.sqrt(q * r_kl ** 2 + 1.0) / (m * k)
    cross_model = epsilon_sq * r_im * float(np.sum(model_spread)) * n * k
    scale = n * m * k
    direct = ci95((cov_t + cross_t) / scale)
    formula = (cov_t.mean() + cross_model) / scale
    cross_se = np.std(cross_t, ddof=1) / np.sqrt(trials) / scale
    tol = max(3.0 * cross_se, rel_tol * abs(direct[0]))
    form_ok = abs(formula - direct[0]) <= tol
    verdict = bool(identity_ok and power_ok and form_ok)
    return LemmaReport(
        4, direct, _exact(formula), verdict,
        {"mean_g_power": float(np.mean(mean_g2)), "inverse_MK": 1.0 / (m * k),
         "q_estimate": q_hat, "identity_lhs": ident_lhs, "identity_rhs": ident_rhs,
         "r_im_sps": float(r_im), "mean_r_kl": float(np.mean(r_kl))},
        "lhs = direct zeta average, rhs = covariance part + correlated-channel cross form; "
        f"checks: identity {'ok' if identity_ok else 'off'}, "
        f"E|g|^2=1/(MK) {'ok' if power_ok else 'off'}, form {'ok' if form_ok else 'off'}")


def _lemma5(cfg, trials, rng, epsilon_sq, scenario, user):
    """Suppression leaves less SI than subtraction under correlated SI and uplink channels."""
    scenario = Scenario.parse(scenario)
    models = _models(cfg, scenario)
    diff, w_cov = [], []
    for b in batch_sizes(trials, 500):
        sb = draw_sic_batch(cfg, models, epsilon_sq, rng, b)
        w = sb.w
        o_stt = np.sum(np.abs(w @ (-sb.e_si) @ sb.g_zf) ** 2, axis=-1)
        o_sps = np.sum(np.abs(w @ sb.h_si @ sb.g_sps) ** 2, axis=-1)
        diff.append(np.mean(o_sps - o_stt, axis=-1))
        wu = w[:, user, :]
        s = np.abs(np.sum(wu, axis=-1)) ** 2 - np.sum(np.abs(wu) ** 2, axis=-1)
        w_cov.append(s)
    diff, w_cov = np.concatenate(diff), np.concatenate(w_cov)
    gap = ci95(diff)
    cov = ci95(w_cov)
    return LemmaReport(
        5, gap, _exact(0.0), bool(gap[2] < 0.0),
        {"w_offdiag_cov_sum": cov[0], "w_offdiag_cov_lower": cov[1],
         "w_offdiag_cov_upper": cov[2], "w_offdiag_cov_nonneg": float(cov[1] >= 0.0)},
        "lhs = mean(Omega_sps - Omega_stt); verdict: upper 95% bound below 0. "
        "w_offdiag_cov_* is the combiner cross-covariance sum, reported separately")


def verify_lemma(lemma_id: int, cfg: SystemConfig, trials: int, rng: np.random.Generator,
                 epsilon_sq: float = 0.1, scenario="i-high", sigma_a_sq: float = 1.0,
                 q: float = 2.0, rel_tol: float = 0.05, batches: int = 20,
                 user: int = 0) -> LemmaReport:
    """Run the numerical check for ``lemma_id`` (1 to 5).

    1 decomposition of the expected SI power, 2 independent-case identity,
    3 sign of zeta, 4 correlated-channel zeta form, 5 suppression-vs-subtraction
    SI power under correlated channels.
    """
    if trials < 2:
        raise LemmaSetupError("need at least two trials")
    if lemma_id == 1:
        return _lemma1(cfg, trials, rng, epsilon_sq, scenario, batches, user)
    if lemma_id == 2:
        return _lemma2(cfg, trials, rng, sigma_a_sq)
    if lemma_id == 3:
        return _lemma3(cfg, trials, rng, epsilon_sq, scenario)
    if lemma_id == 4:
        return _lemma4(cfg, trials, rng, epsilon_sq, scenario, q, rel_tol)
    if lemma_id == 5:
        return _lemma5(cfg, trials, rng, epsilon_sq, scenario, user)
    raise LemmaSetupError(f"unknown lemma id {lemma_id}; expected 1 to 5")
