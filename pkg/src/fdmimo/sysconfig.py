"""System parameters, unit conversion and the link budget.

Every quantity is stored in the config in the unit a user would type
(antenna counts, dB values) and converted to linear units exactly once by
:func:`derive_link_budget`. Downstream modules only see linear values.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import (ConfigError, ConfigFileMissing, ConfigInvariantError,
                     ConfigParseError)

__all__ = [
    "SystemConfig", "LinkBudget", "db_to_linear", "linear_to_db",
    "derive_link_budget", "load_config", "read_config_file", "config_from_mapping",
]

DbValue = Union[float, Sequence[float]]


def db_to_linear(x):
    """Convert decibels to a linear power ratio, ``10**(x/10)``.

    Works element-wise on arrays. Non-finite input raises ``ValueError``.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"dB value must be finite, got {x!r}")
    out = np.power(10.0, arr / 10.0)
    return float(out) if out.ndim == 0 else out


def linear_to_db(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError(f"linear ratio must be finite and positive, got {x!r}")
    out = 10.0 * np.log10(arr)
    return float(out) if out.ndim == 0 else out


def _freeze(value):
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    return value


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of a full-duplex massive MIMO cell.

    Defaults reproduce the evaluation setup: 64 transmit and 24 receive RF
    chains serving 12 downlink and 12 uplink users, 30 dB of passive analog
    cancellation and -10 dB transmitter noise.

    Attributes
    ----------
    m_tx, n_rx : int
        Transmit (M) and receive (N) RF chains at the base station.
    k_dl, k_ul : int
        Number of single-antenna downlink / uplink users.
    rho_d_db : float
        Total transmit SNR at the base station, P_d / P_n.
    rho_u_db : float or None
        Transmit SNR of a user, P_u / P_n. Derived from ``rho_ul_db`` when
        left unset.
    rho_ul_db : float or None
        Received uplink SNR. When set it is authoritative for every uplink
        user and ``rho_u_db`` follows as ``rho_ul_db - beta_ul_db``.
    rho_u_dl_db : float or None
        Pilot SNR used for downlink channel estimation. Defaults to the user
        transmit SNR.
    beta_si_db, beta_dl_db, beta_ul_db, beta_uu_db
        Propagation gains. ``beta_dl_db``/``beta_ul_db`` accept one value per
        user, ``beta_uu_db`` a ``k_dl x k_ul`` nested list.
    alpha_anc_db : float
        Passive analog cancellation level.
    alpha_tx_db : float
        Transmitter-noise variance relative to the transmit signal.
    tau_si : int
        SI pilot length; must be at least ``n_rx``.
    adc_bits : int or None
        ADC resolution. When set, the SI estimation error comes from the
        quantized pilot path instead of the pilot-count formula.
    """

    m_tx: int = 64
    n_rx: int = 24
    k_dl: int = 12
    k_ul: int = 12
    rho_d_db: float = 100.0
    rho_u_db: Optional[float] = None
    rho_ul_db: Optional[float] = 10.0
    rho_u_dl_db: Optional[float] = None
    beta_si_db: float = -40.0
    beta_dl_db: DbValue = -80.0
    beta_ul_db: DbValue = -80.0
    beta_uu_db: Any = -100.0
    alpha_anc_db: float = 30.0
    alpha_tx_db: float = -10.0
    tau_si: int = 24
    adc_bits: Optional[int] = None

    def __post_init__(self):
        for name in ("beta_dl_db", "beta_ul_db", "beta_uu_db"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))
        self._validate()

    # -- validation ---------------------------------------------------------
    def _validate(self):
        for name in ("m_tx", "n_rx", "k_dl", "k_ul", "tau_si"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ConfigParseError(f"{name} must be an integer, got {v!r}", name)
            if v <= 0:
                raise ConfigInvariantError(f"{name} must be positive, got {v}", name)
        if self.adc_bits is not None:
            if isinstance(self.adc_bits, bool) or not isinstance(self.adc_bits, (int, np.integer)):
                raise ConfigParseError(f"adc_bits must be an integer, got {self.adc_bits!r}",
                                       "adc_bits")
            if self.adc_bits < 1:
                raise ConfigInvariantError("adc_bits must be >= 1", "adc_bits")
        if self.m_tx < self.n_rx + self.k_dl:
            raise ConfigInvariantError(
                f"m_tx={self.m_tx} < n_rx + k_dl = {self.n_rx + self.k_dl}", "m_tx")
        if self.n_rx < self.k_ul:
            raise ConfigInvariantError(f"n_rx={self.n_rx} < k_ul={self.k_ul}", "n_rx")
        if self.tau_si < self.n_rx:
            raise ConfigInvariantError(f"tau_si={self.tau_si} < n_rx={self.n_rx}", "tau_si")

        for name in ("rho_d_db", "beta_si_db", "alpha_anc_db", "alpha_tx_db"):
            _check_finite(getattr(self, name), name)
        for name in ("rho_u_db", "rho_ul_db", "rho_u_dl_db"):
            v = getattr(self, name)
            if v is not None:
                _check_finite(v, name)
        if self.rho_u_db is None and self.rho_ul_db is None:
            raise ConfigInvariantError("one of rho_u_db / rho_ul_db is required", "rho_u_db")
        if self.rho_ul_db is not None and not _is_scalar(self.beta_ul_db):
            raise ConfigInvariantError(
                "rho_ul_db fixes the received SNR of every uplink user; per-user "
                "beta_ul_db needs rho_u_db instead", "rho_ul_db")
        if self.rho_ul_db is not None and self.rho_u_db is not None:
            if abs(self.rho_u_db + float(self.beta_ul_db) - self.rho_ul_db) > 1e-9:
                raise ConfigInvariantError(
                    "rho_u_db + beta_ul_db disagrees with rho_ul_db", "rho_ul_db")

        _per_user(self.beta_dl_db, self.k_dl, "beta_dl_db")
        _per_user(self.beta_ul_db, self.k_ul, "beta_ul_db")
        _per_pair(self.beta_uu_db, self.k_dl, self.k_ul, "beta_uu_db")

    # -- linear views -------------------------------------------------------
    @property
    def rho_d(self) -> float:
        return db_to_linear(self.rho_d_db)

    @property
    def rho_u(self) -> float:
        if self.rho_u_db is not None:
            return db_to_linear(self.rho_u_db)
        return db_to_linear(self.rho_ul_db - float(self.beta_ul_db))

    @property
    def alpha_anc(self) -> float:
        return db_to_linear(self.alpha_anc_db)

    @property
    def alpha_tx(self) -> float:
        return db_to_linear(self.alpha_tx_db)

    @property
    def beta_si(self) -> float:
        return db_to_linear(self.beta_si_db)

    def replace(self, **changes) -> "SystemConfig":
        return config_from_mapping({**self.to_dict(), **changes}, base=None,
                                   explicit=set(changes))

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = json.loads(json.dumps(v))
        return out


def _is_scalar(v) -> bool:
    return not isinstance(v, (tuple, list))


def _check_finite(v, name):
    if isinstance(v, bool) or not isinstance(v, (int, float, np.floating, np.integer)):
        raise ConfigParseError(f"{name} must be a number, got {v!r}", name)
    if not math.isfinite(v):
        raise ConfigInvariantError(f"{name} must be finite", name)


def _per_user(value, n, name) -> np.ndarray:
    if _is_scalar(value):
        _check_finite(value, name)
        return np.full(n, float(value))
    if len(value) != n:
        raise ConfigInvariantError(f"{name} needs {n} entries, got {len(value)}", name)
    for v in value:
        _check_finite(v, name)
    return np.asarray(value, dtype=float)


def _per_pair(value, rows, cols, name) -> np.ndarray:
    if _is_scalar(value):
        _check_finite(value, name)
        return np.full((rows, cols), float(value))
    arr = np.asarray(value, dtype=object)
    if arr.shape != (rows, cols):
        raise ConfigInvariantError(f"{name} must be {rows}x{cols}, got shape {arr.shape}", name)
    for v in arr.ravel():
        _check_finite(v, name)
    return arr.astype(float)


@dataclass(frozen=True)
class LinkBudget:
    """Received SNRs in linear units.

    ``rho_dl_k`` and ``rho_ul_k`` hold one entry per user, ``rho_uu_kk`` is
    ``k_dl x k_ul``. ``rho_u_dl`` is the downlink pilot SNR (transmit side).
    """

    rho_dl_k: np.ndarray
    rho_ul_k: np.ndarray
    rho_si: float
    rho_uu_kk: np.ndarray
    rho_u_dl: float
    beta_dl_k: np.ndarray = field(repr=False)
    alpha_anc: float = 1.0
    alpha_tx: float = 0.0

    @property
    def si_snr(self) -> float:
        """SI-to-noise ratio after passive cancellation, rho_SI / alpha_anc."""
        return self.rho_si / self.alpha_anc


def derive_link_budget(cfg: SystemConfig) -> LinkBudget:
    """Multiply transmit SNRs by propagation gains (all in linear units)."""
    rho_d = cfg.rho_d
    rho_u = cfg.rho_u
    beta_dl = db_to_linear(_per_user(cfg.beta_dl_db, cfg.k_dl, "beta_dl_db"))
    beta_uu = db_to_linear(_per_pair(cfg.beta_uu_db, cfg.k_dl, cfg.k_ul, "beta_uu_db"))
    if cfg.rho_ul_db is not None:
        rho_ul = np.full(cfg.k_ul, db_to_linear(cfg.rho_ul_db))
    else:
        rho_ul = rho_u * db_to_linear(_per_user(cfg.beta_ul_db, cfg.k_ul, "beta_ul_db"))
    rho_u_dl = db_to_linear(cfg.rho_u_dl_db) if cfg.rho_u_dl_db is not None else rho_u
    return LinkBudget(
        rho_dl_k=np.atleast_1d(rho_d * beta_dl),
        rho_ul_k=np.atleast_1d(rho_ul),
        rho_si=rho_d * cfg.beta_si,
        rho_uu_kk=np.atleast_2d(rho_u * beta_uu),
        rho_u_dl=rho_u_dl,
        beta_dl_k=np.atleast_1d(beta_dl),
        alpha_anc=cfg.alpha_anc,
        alpha_tx=cfg.alpha_tx,
    )


_FIELDS = {f.name for f in dataclasses.fields(SystemConfig)}


def config_from_mapping(data: Mapping[str, Any], base: Optional[SystemConfig] = None,
                        explicit=None) -> SystemConfig:
    """Build a config from ``data`` layered over ``base`` (defaults if None).

    Unknown keys raise :class:`ConfigParseError`. Setting only one of
    ``rho_u_db``/``rho_ul_db`` clears the other so they cannot disagree with
    a default.
    """
    if not isinstance(data, Mapping):
        raise ConfigParseError("config must be a JSON object")
    for key in data:
        if key not in _FIELDS:
            raise ConfigParseError(f"unknown config key {key!r}", key)
    explicit = set(data) if explicit is None else set(explicit)
    merged = (base or SystemConfig()).to_dict()
    merged.update(data)
    if "rho_u_db" in explicit and "rho_ul_db" not in explicit:
        merged["rho_ul_db"] = None
    elif "rho_ul_db" in explicit and "rho_u_db" not in explicit:
        merged["rho_u_db"] = None
    try:
        return SystemConfig(**merged)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigParseError(str(exc)) from exc


def read_config_file(path) -> dict:
    """Parse a JSON config file into a plain dict without validating keys."""
    p = Path(path)
    if not p.is_file():
        raise ConfigFileMissing(f"config file not found: {p}", "path")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{p}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigParseError(f"{p}: top level must be an object")
    return data


def load_config(path, overrides: Optional[Mapping[str, Any]] = None) -> SystemConfig:
    """Read a JSON config file; ``overrides`` (e.g. CLI flags) win over the file."""
    data = read_config_file(path)
    if overrides:
        data = {**data, **overrides}
    return config_from_mapping(data)
