"""Which cancellation method suits which system constraint.

Every verdict is derived from closed-form rates and simulated precoder
correlation statistics; nothing here is a stored answer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple


from .. import analysis
from ..beamforming import Method
from ..estimation import si_error_variance_pilot
from ..sysconfig import SystemConfig, derive_link_budget
from .engine import point_rng
from .stats import estimate_sps_correlation_stats

__all__ = ["ReportRow", "constraint_report", "format_report", "POWER_SCALING_CONFIGS",
           "METHOD_NAMES"]

POWER_SCALING_CONFIGS: Tuple[Tuple[int, int], ...] = ((64, 40), (64, 27), (128, 27))
METHOD_NAMES = {Method.SUBTRACTION: "SI Subtraction",
                Method.SPATIAL_SUPPRESSION: "Spatial Suppression",
                Method.NO_SIC: "No SIC"}


@dataclass(frozen=True)
class ReportRow:
    constraint: str
    verdict: Method
    evidence: Dict[str, float] = field(default_factory=dict)


def _sized(cfg: SystemConfig, m: int, n: int) -> SystemConfig:
    return cfg.replace(m_tx=m, n_rx=n, tau_si=max(cfg.tau_si, n))


def _cross_points(cfg, configs, trials, seed) -> Dict[Tuple[int, int, str], float]:
    out = {}
    for m, n in configs:
        c = _sized(cfg, m, n)
        eps = si_error_variance_pilot(derive_link_budget(c), c)
        for scen in ("iid", "i-high"):
            rng = point_rng(seed, f"report|{scen}|m_tx={m};n_rx={n}", 0)
            stats = estimate_sps_correlation_stats(c, trials, rng, eps, scenario=scen)
            out[(m, n, scen)] = analysis.power_scaling_cross_point(c, r_sps_corr=stats).r_cross
    return out


def constraint_report(cfg: SystemConfig, trials: int = 1000, seed: int = 0,
                      configs: Sequence[Tuple[int, int]] = POWER_SCALING_CONFIGS
                      ) -> List[ReportRow]:
    """Four verdict rows: perfect estimation, correlated SI channel, M/N ratio, traffic ratio.

    The two power-scaling rows share one grid of uplink cross points over
    ``configs`` (i.i.d. and highly correlated SI channel).
    """
    rows = []
    budget = derive_link_budget(cfg)

    stt = analysis.perfect_csi_rates(cfg, budget, Method.SUBTRACTION)
    sps = analysis.perfect_csi_rates(cfg, budget, Method.SPATIAL_SUPPRESSION)
    rows.append(ReportRow(
        "Perfect estimation",
        Method.SUBTRACTION if stt.total >= sps.total else Method.SPATIAL_SUPPRESSION,
        {"sum_rate_stt": stt.total, "sum_rate_sps": sps.total}))

    cross = _cross_points(cfg, configs, trials, seed)
    ordered = sorted(configs, key=lambda mn: mn[0] / mn[1])
    flips = [(m, n) for m, n in configs
             if cross[(m, n, "i-high")] >= 1.0 > cross[(m, n, "iid")]]
    grows = all(cross[(m, n, "i-high")] > cross[(m, n, "iid")] for m, n in configs)
    evidence = {f"r_cross_{scen}_{m}x{n}": cross[(m, n, scen)]
                for m, n in configs for scen in ("iid", "i-high")}
    rows.append(ReportRow(
        "Highly correlated channel (power scaling)",
        Method.SPATIAL_SUPPRESSION if (flips and grows) else Method.SUBTRACTION,
        dict(evidence, configs_flipped_by_correlation=float(len(flips)))))

    top = ordered[-1]
    low = ordered[0]
    top_wins = cross[(top[0], top[1], "i-high")] >= 1.0
    rows.append(ReportRow(
        "High M/N (power scaling)",
        Method.SPATIAL_SUPPRESSION if top_wins else Method.SUBTRACTION,
        {"highest_m_over_n": top[0] / top[1], "r_cross_highest": cross[(top[0], top[1], "i-high")],
         "lowest_m_over_n": low[0] / low[1], "r_cross_lowest": cross[(low[0], low[1], "i-high")]}))

    eps = si_error_variance_pilot(budget, cfg)
    terms = analysis.high_sinr_terms(cfg, budget, eps)
    phi = terms.kappa * cfg.rho_d
    gap = analysis.rate_gap_analysis(cfg, phi, terms.s, terms.i, terms.omega_stt, terms.omega_delta)
    ratio_stt = gap.rates["dl_stt"] / gap.rates["ul_stt"]
    ratio_sps = gap.rates["dl_sps"] / gap.rates["ul_sps"]
    rows.append(ReportRow(
        "Total transmit power, high eta",
        Method.SUBTRACTION if ratio_stt >= ratio_sps else Method.SPATIAL_SUPPRESSION,
        {"dl_ul_ratio_stt": ratio_stt, "dl_ul_ratio_sps": ratio_sps,
         "gap_dl": gap.gap_dl, "gap_ul": gap.gap_ul}))
    return rows


def format_report(rows: Sequence[ReportRow]) -> str:
    width = max(len(r.constraint) for r in rows)
    lines = [f"{'System constraint':<{width}}  Desired SIC technique", "-" * (width + 24)]
    for r in rows:
        lines.append(f"{r.constraint:<{width}}  {METHOD_NAMES[r.verdict]}")
        for key, val in r.evidence.items():
            lines.append(f"{'':<{width}}    {key} = {val:.6g}")
    return "\n".join(lines)
