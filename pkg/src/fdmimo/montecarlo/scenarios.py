"""Channel-correlation setups for the simulated scenarios."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..channel import (AntennaGeometry, CorrelationModel, RayTap, bessel_correlation,
                       empirical_correlation, exp_correlation, synth_ray_si_channel,
                       ula_positions)
from ..sysconfig import SystemConfig

__all__ = ["Scenario", "ScenarioModels", "build_models", "ray_si_correlation",
           "LOW_CORRELATION", "HIGH_CORRELATION", "ARRAY_SPACING_WL"]

LOW_CORRELATION = 0.2
HIGH_CORRELATION = 0.8
ARRAY_SPACING_WL = 1.0


class Scenario(enum.Enum):
    IID = "iid"
    LOW_CORR = "i-low"
    HIGH_CORR = "i-high"
    RAY_FILE = "ii"

    @classmethod
    def parse(cls, value) -> "Scenario":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for s in cls:
            if s.value == key:
                return s
        raise ValueError(f"unknown scenario {value!r}; choose from "
                         + ", ".join(s.value for s in cls))


@dataclass(frozen=True)
class ScenarioModels:
    """Correlation models for the downlink, uplink and SI channels."""

    dl: CorrelationModel
    ul: CorrelationModel
    si: CorrelationModel


def _array_correlation(n: int) -> np.ndarray:
    # unit-wavelength spacing: positions in wavelengths, wavelength 1
    return bessel_correlation(ula_positions(n, ARRAY_SPACING_WL), 1.0)


def ray_si_correlation(rays: Sequence[RayTap], geom: AntennaGeometry,
                       rng: np.random.Generator, realizations: int = 200):
    """Unit-diagonal (r_rx, r_tx) of the ray-based SI channel.

    Taps without stored phases get fresh random phases per realization.
    """
    if all(r.phases is not None for r in rays):
        realizations = 1
    samples = np.stack([synth_ray_si_channel(rays, geom, rng) for _ in range(realizations)])
    emp = empirical_correlation(samples)
    return emp["r_rx"], emp["r_tx"]


def build_models(scenario, cfg: SystemConfig, corr_r: Optional[float] = None,
                 si_correlation: Optional[tuple] = None) -> ScenarioModels:
    """Correlation models for ``scenario`` at the dimensions of ``cfg``.

    Scenario I uses exponential SI correlation with coefficient ``corr_r``
    (default 0.2 or 0.8); Scenario II needs ``si_correlation=(r_rx, r_tx)``
    from :func:`ray_si_correlation`. Except in the i.i.d. baseline, the
    downlink transmit and uplink receive arrays carry Bessel correlation.
    """
    scenario = Scenario.parse(scenario)
    m, n, k_dl, k_ul = cfg.m_tx, cfg.n_rx, cfg.k_dl, cfg.k_ul
    if scenario is Scenario.IID:
        return ScenarioModels(CorrelationModel.identity(k_dl, m),
                              CorrelationModel.identity(n, k_ul),
                              CorrelationModel.identity(n, m))
    dl = CorrelationModel(np.eye(k_dl), _array_correlation(m))
    ul = CorrelationModel(_array_correlation(n), np.eye(k_ul))
    if scenario is Scenario.RAY_FILE:
        if si_correlation is None:
            raise ValueError("ray-based scenario needs the SI correlation from a ray file")
        r_rx, r_tx = si_correlation
        if r_rx.shape != (n, n) or r_tx.shape != (m, m):
            raise ValueError("ray-based SI correlation does not match the antenna counts")
        si = CorrelationModel(r_rx, r_tx)
    else:
        if corr_r is None:
            corr_r = LOW_CORRELATION if scenario is Scenario.LOW_CORR else HIGH_CORRELATION
        si = CorrelationModel(exp_correlation(corr_r, n), exp_correlation(corr_r, m))
    return ScenarioModels(dl, ul, si)
