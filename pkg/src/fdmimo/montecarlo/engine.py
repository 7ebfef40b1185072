"""Seeded, chunked Monte Carlo runner.

Trials are generated in fixed-size chunks. Each chunk owns a random stream
derived from ``(master_seed, point key, chunk index)``, and chunk results
are concatenated in chunk order before any averaging, so results do not
depend on how many worker processes run the chunks.
"""

from __future__ import annotations

import itertools
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .. import analysis
from ..beamforming import (BeamformerSet, Method, extended_zf_precoder, normalize_columns,
                           zf_combiner, zf_precoder)
from ..channel import draw_iid, draw_kronecker
from ..errors import ConfigError, DimensionError, SingularChannelError
from ..estimation import (dl_ul_error_variance, estimate_si_channel_aqnm,
                          si_error_variance_pilot)
from ..link import ChannelSet, evaluate_method
from ..sysconfig import LinkBudget, SystemConfig, derive_link_budget
from .metrics import MetricsTable
from .scenarios import Scenario, ScenarioModels, build_models

__all__ = ["ExperimentPlan", "PointResult", "simulate_point", "run_experiment",
           "sweep_points", "param_label", "point_rng", "DEFAULT_AQNM_BITS"]

EXTRA_AXES = ("epsilon_si_sq", "corr_r")
DEFAULT_AQNM_BITS = 4
AQNM_CALIBRATION_TRIALS = 200
METRICS = ("rate_dl_sum", "rate_ul_sum", "rate_sum", "omega", "w_norm_sq",
           "inv_f_norm_sq", "inv_w_norm_sq")


@dataclass(frozen=True)
class ExperimentPlan:
    """What to simulate.

    ``sweep`` maps an axis name (any ``SystemConfig`` field, or
    ``epsilon_si_sq`` / ``corr_r``) to its values; points are the Cartesian
    product in insertion order. ``power_scaling`` lowers the ZF-precoded
    methods' transmit SNR by ``(M-K-N)/(M-K)`` relative to suppression so
    that both reach the same downlink rate.
    """

    scenario: Scenario
    methods: Tuple[Method, ...]
    trials: int
    master_seed: int
    sweep: Optional[Tuple[Tuple[str, tuple], ...]] = None
    perfect_csi: bool = False
    epsilon_si_sq: Optional[float] = None
    si_error_source: str = "auto"
    power_scaling: bool = False
    corr_r: Optional[float] = None
    si_correlation: Optional[tuple] = field(default=None, repr=False)
    chunk_size: int = 250
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario.parse(self.scenario))
        methods = tuple(Method.parse(m) for m in self.methods)
        if not methods:
            raise ValueError("at least one method is required")
        object.__setattr__(self, "methods", methods)
        if int(self.trials) < 1:
            raise ValueError("trials must be at least 1")
        if int(self.chunk_size) < 1 or int(self.workers) < 1:
            raise ValueError("chunk_size and workers must be positive")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.si_error_source not in ("auto", "pilot", "aqnm"):
            raise ValueError("si_error_source must be auto, pilot or aqnm")
        if self.sweep is not None:
            items = self.sweep.items() if isinstance(self.sweep, Mapping) else self.sweep
            sweep = tuple((str(k), tuple(v)) for k, v in items)
            valid = set(SystemConfig.__dataclass_fields__) | set(EXTRA_AXES)
            for axis, values in sweep:
                if axis not in valid:
                    raise ValueError(f"unknown sweep axis {axis!r}")
                if not values:
                    raise ValueError(f"sweep axis {axis!r} has no values")
            object.__setattr__(self, "sweep", sweep or None)


@dataclass
class PointResult:
    """Per-trial samples of one sweep point, keyed by method then metric."""

    param: str
    cfgs: Dict[Method, SystemConfig]
    epsilon_si_sq: Dict[Method, float]
    samples: Dict[Method, Dict[str, np.ndarray]]


def sweep_points(plan: ExperimentPlan):
    if not plan.sweep:
        return [{}]
    axes = [a for a, _ in plan.sweep]
    return [dict(zip(axes, combo)) for combo in itertools.product(*(v for _, v in plan.sweep))]


def param_label(point: Mapping) -> str:
    if not point:
        return "default"
    return ";".join(f"{k}={v}" for k, v in point.items())


def point_rng(master_seed: int, label: str, *counters: int) -> np.random.Generator:
    """Independent generator for one ``(label, counters)`` cell of an experiment."""
    key = (zlib.crc32(label.encode("utf-8")),) + tuple(int(c) for c in counters)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(master_seed), spawn_key=key)))


def _rng_from_key(master_seed: int, key: tuple) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(master_seed), spawn_key=key)))


def _per_user_error(budget: LinkBudget, cfg: SystemConfig, link: str) -> np.ndarray:
    n = cfg.k_dl if link == "DL" else cfg.k_ul
    return np.array([dl_ul_error_variance(budget, cfg, u, link)[0] for u in range(n)])


def _method_cfgs(plan: ExperimentPlan, cfg: SystemConfig) -> Dict[Method, SystemConfig]:
    if not plan.power_scaling:
        return {m: cfg for m in plan.methods}
    m, n, k = cfg.m_tx, cfg.n_rx, cfg.k_dl
    if m - k - n <= 0:
        raise DimensionError("power scaling needs M - K - N > 0")
    zf_cfg = cfg.replace(rho_d_db=cfg.rho_d_db + 10.0 * np.log10((m - k - n) / (m - k)))
    return {meth: (cfg if meth is Method.SPATIAL_SUPPRESSION else zf_cfg) for meth in plan.methods}


def _si_error(plan, cfg, budget, models, label, eps_override) -> float:
    if plan.perfect_csi:
        return 0.0
    if eps_override is not None:
        return float(eps_override)
    source = plan.si_error_source
    if source == "auto":
        source = "aqnm" if (plan.scenario is Scenario.RAY_FILE or cfg.adc_bits) else "pilot"
    if source == "pilot":
        return si_error_variance_pilot(budget, cfg)
    rng = point_rng(plan.master_seed, label + f"|rho_d_db={cfg.rho_d_db}", 1, 0)
    h_si = draw_kronecker(models.si, cfg.n_rx, cfg.m_tx, rng, AQNM_CALIBRATION_TRIALS)
    bits = cfg.adc_bits if cfg.adc_bits is not None else DEFAULT_AQNM_BITS
    _, nmse, _ = estimate_si_channel_aqnm(h_si, budget, cfg, rng, bits=bits)
    return float(np.mean(nmse))


@dataclass(frozen=True)
class _ChunkTask:
    master_seed: int
    key: tuple
    size: int
    models: ScenarioModels
    cfg: SystemConfig
    methods: Tuple[Method, ...]
    budgets: Dict[Method, LinkBudget]
    eps: Dict[Method, tuple]


def _run_chunk(task: _ChunkTask) -> Dict[Method, Dict[str, np.ndarray]]:
    rng = _rng_from_key(task.master_seed, task.key)
    cfg, b = task.cfg, task.size
    m, n, k_dl, k_ul = cfg.m_tx, cfg.n_rx, cfg.k_dl, cfg.k_ul
    h_dl = draw_kronecker(task.models.dl, k_dl, m, rng, b)
    h_ul = draw_kronecker(task.models.ul, n, k_ul, rng, b)
    h_si = draw_kronecker(task.models.si, n, m, rng, b)
    h_uu = draw_iid(k_dl, k_ul, rng, b)
    z_dl = draw_iid(k_dl, m, rng, b)
    z_ul = draw_iid(n, k_ul, rng, b)
    z_si = draw_iid(n, m, rng, b)

    combiners, zf, sps, out = {}, {}, {}, {}
    for method in task.methods:
        eps_dl, eps_ul, eps_si = task.eps[method]
        h_dl_hat = h_dl + np.sqrt(np.asarray(eps_dl))[:, None] * z_dl
        h_ul_hat = h_ul + np.sqrt(np.asarray(eps_ul))[None, :] * z_ul
        h_si_hat = h_si + np.sqrt(eps_si) * z_si
        if eps_ul not in combiners:
            combiners[eps_ul] = zf_combiner(h_ul_hat)
        if method is Method.SPATIAL_SUPPRESSION:
            if (eps_dl, eps_si) not in sps:
                sps[(eps_dl, eps_si)] = extended_zf_precoder(h_dl_hat, h_si_hat)
            raw = sps[(eps_dl, eps_si)]
        else:
            if eps_dl not in zf:
                zf[eps_dl] = zf_precoder(h_dl_hat)
            raw = zf[eps_dl]
        w = combiners[eps_ul]
        beams = BeamformerSet(raw, normalize_columns(raw), w, method)
        chans = ChannelSet(h_dl, h_ul, h_si, h_uu, h_dl_hat, h_ul_hat, h_si_hat)
        tm = evaluate_method(method, chans, task.budgets[method], beams)
        w_norm = np.sum(np.abs(w) ** 2, axis=-1)
        f_norm = np.sum(np.abs(raw) ** 2, axis=-2)
        out[method] = {
            "rate_dl_sum": tm.rate_dl,
            "rate_ul_sum": tm.rate_ul,
            "rate_sum": tm.rate_dl + tm.rate_ul,
            "omega": np.mean(tm.omega, axis=-1),
            "w_norm_sq": np.mean(w_norm, axis=-1),
            "inv_f_norm_sq": np.mean(1.0 / f_norm, axis=-1),
            "inv_w_norm_sq": np.mean(1.0 / w_norm, axis=-1),
        }
    return out


def simulate_point(plan: ExperimentPlan, cfg: SystemConfig, point: Optional[Mapping] = None,
                   label: Optional[str] = None) -> PointResult:
    """Run all trials of one sweep point and return the per-trial samples.

    Raises ``ConfigError``/``DimensionError`` for infeasible points and
    ``SingularChannelError`` if any realization cannot be zero-forced.
    """
    point = dict(point or {})
    cfg_changes = {k: v for k, v in point.items() if k not in EXTRA_AXES}
    if "n_rx" in cfg_changes and "tau_si" not in cfg_changes:
        # the pilot block grows with the receive array unless swept explicitly
        cfg_changes["tau_si"] = max(cfg.tau_si, int(cfg_changes["n_rx"]))
    cfg_p = cfg.replace(**cfg_changes) if cfg_changes else cfg
    corr_r = point.get("corr_r", plan.corr_r)
    eps_override = point.get("epsilon_si_sq", plan.epsilon_si_sq)
    param = param_label(point)
    label = label or f"{plan.scenario.value}|{param}"
    models = build_models(plan.scenario, cfg_p, corr_r=corr_r, si_correlation=plan.si_correlation)
    cfgs = _method_cfgs(plan, cfg_p)

    budgets, eps, eps_si_map = {}, {}, {}
    for method, mcfg in cfgs.items():
        budget = derive_link_budget(mcfg)
        budgets[method] = budget
        if plan.perfect_csi:
            eps_dl = tuple(np.zeros(mcfg.k_dl))
            eps_ul = tuple(np.zeros(mcfg.k_ul))
        else:
            eps_dl = tuple(_per_user_error(budget, mcfg, "DL"))
            eps_ul = tuple(_per_user_error(budget, mcfg, "UL"))
        eps_si = _si_error(plan, mcfg, budget, models, label, eps_override)
        eps[method] = (eps_dl, eps_ul, eps_si)
        eps_si_map[method] = eps_si

    n_chunks = -(-int(plan.trials) // int(plan.chunk_size))
    base = (zlib.crc32(label.encode("utf-8")), 0)
    tasks = []
    for c in range(n_chunks):
        size = min(plan.chunk_size, plan.trials - c * plan.chunk_size)
        tasks.append(_ChunkTask(int(plan.master_seed), base + (c,), size, models, cfg_p,
                                plan.methods, budgets, eps))
    if plan.workers > 1 and n_chunks > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            parts = list(pool.map(_run_chunk, tasks))
    else:
        parts = [_run_chunk(t) for t in tasks]

    samples = {meth: {name: np.concatenate([p[meth][name] for p in parts]) for name in METRICS}
               for meth in plan.methods}
    return PointResult(param, cfgs, eps_si_map, samples)


def _analysis_rows(table: MetricsTable, plan: ExperimentPlan, res: PointResult):
    scen = plan.scenario.value
    for method, mcfg in res.cfgs.items():
        budget = derive_link_budget(mcfg)
        if plan.perfect_csi:
            approx = analysis.perfect_csi_rates(mcfg, budget, method)
            ul = approx.r_ul_sum
            table.add_value(scen, method.value, res.param, "analysis:rate_dl_sum", approx.r_dl_sum)
        else:
            gamma = analysis.approx_uplink_sinr(method, mcfg, budget, res.epsilon_si_sq[method])
            ul = float(np.sum(np.log2(1.0 + gamma)))
        table.add_value(scen, method.value, res.param, "analysis:rate_ul_sum", ul)


def run_experiment(plan: ExperimentPlan, cfg: SystemConfig) -> MetricsTable:
    """Simulate every sweep point of ``plan`` and aggregate into a table.

    Infeasible or numerically singular points produce ``skipped`` rows.
    """
    table = MetricsTable()
    scen = plan.scenario.value
    for point in sweep_points(plan):
        param = param_label(point)
        try:
            res = simulate_point(plan, cfg, point)
        except (ConfigError, DimensionError, SingularChannelError) as exc:
            for method in plan.methods:
                table.add_skipped(scen, method.value, param, str(exc))
            continue
        for method in plan.methods:
            for name in METRICS:
                table.add(scen, method.value, param, name, res.samples[method][name])
            table.add_value(scen, method.value, param, "epsilon_si_sq",
                            res.epsilon_si_sq[method], 0.0, plan.trials)
            table.add_value(scen, method.value, param, "rho_d_db",
                            res.cfgs[method].rho_d_db, 0.0, plan.trials)
        _analysis_rows(table, plan, res)
    return table
