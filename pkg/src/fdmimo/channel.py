"""Spatial correlation models and channel synthesis.

Channels are complex numpy arrays. Every drawing function accepts a leading
``batch`` size so that Monte Carlo trials are generated as one stacked
array; ``batch=None`` returns a single matrix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import j0

from .errors import DimensionError, InputFileError

__all__ = [
    "CorrelationModel", "RayTap", "PatternTable", "AntennaGeometry",
    "exp_correlation", "bessel_correlation", "matrix_principal_sqrt",
    "ula_positions", "draw_iid", "draw_kronecker", "synth_ray_si_channel",
    "normalize_channel_power", "empirical_correlation", "load_rays",
    "load_pattern",
]

SPEED_OF_LIGHT = 299_792_458.0
CARRIER_HZ = 2.52e9


def exp_correlation(r: float, n: int) -> np.ndarray:
    """Toeplitz matrix with entries ``r**|i-j|``."""
    if not 0.0 <= r < 1.0:
        raise ValueError(f"correlation coefficient must lie in [0, 1), got {r}")
    if n < 1:
        raise ValueError("n must be positive")
    idx = np.arange(n)
    return np.power(float(r), np.abs(idx[:, None] - idx[None, :])).astype(float)


def ula_positions(n: int, spacing: float) -> np.ndarray:
    """Positions (n, 3) of a uniform linear array along the x axis."""
    return np.column_stack([np.arange(n) * spacing, np.zeros(n), np.zeros(n)])


def bessel_correlation(positions, wavelength: float) -> np.ndarray:
    """Correlation ``J0(2 pi d_ij / wavelength)`` for antennas at ``positions``.

    ``positions`` may be a 1-D sequence of coordinates on a line or an
    ``(n, 3)`` array.
    """
    if not wavelength > 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    pos = np.asarray(positions, dtype=float)
    if pos.ndim == 1:
        pos = pos[:, None]
    d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    return j0(2.0 * np.pi * d / wavelength)


def matrix_principal_sqrt(r, herm_tol: float = 1e-12, eig_tol: float = 1e-10) -> np.ndarray:
    """Hermitian PSD square root ``S`` with ``S @ S.conj().T == r``.

    Eigenvalues down to ``-eig_tol`` (relative to the largest magnitude) are
    clamped to zero; anything more negative is rejected.
    """
    r = np.asarray(r)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {r.shape}")
    scale = max(1.0, float(np.max(np.abs(r)))) if r.size else 1.0
    if np.max(np.abs(r - r.conj().T), initial=0.0) > herm_tol * scale:
        raise ValueError("matrix is not Hermitian")
    w, v = np.linalg.eigh((r + r.conj().T) / 2)
    if w.size and w.min() < -eig_tol * scale:
        raise ValueError(f"matrix is indefinite (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    s = (v * np.sqrt(w)) @ v.conj().T
    if np.isrealobj(r):
        s = s.real
    return s


@dataclass(frozen=True)
class CorrelationModel:
    """Receive/transmit correlation pair for one link, with cached roots."""

    r_rx: np.ndarray
    r_tx: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r_rx_sqrt", matrix_principal_sqrt(self.r_rx))
        object.__setattr__(self, "r_tx_sqrt", matrix_principal_sqrt(self.r_tx))

    @classmethod
    def identity(cls, rows: int, cols: int) -> "CorrelationModel":
        return cls(np.eye(rows), np.eye(cols))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.r_rx.shape[0], self.r_tx.shape[0]

    @property
    def is_identity(self) -> bool:
        return (np.array_equal(self.r_rx, np.eye(self.r_rx.shape[0]))
                and np.array_equal(self.r_tx, np.eye(self.r_tx.shape[0])))


def draw_iid(rows: int, cols: int, rng: np.random.Generator,
             batch: Optional[int] = None) -> np.ndarray:
    """Matrix of i.i.d. CN(0, 1) entries (real and imaginary variance 1/2)."""
    if rows < 0 or cols < 0:
        raise ValueError("dimensions must be non-negative")
    shape = (rows, cols) if batch is None else (batch, rows, cols)
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def draw_kronecker(corr: CorrelationModel, rows: int, cols: int,
                   rng: np.random.Generator, batch: Optional[int] = None) -> np.ndarray:
    """Kronecker-correlated Rayleigh channel ``R_rx^1/2 H_iid R_tx^1/2``."""
    if corr.shape != (rows, cols):
        raise DimensionError(
            f"correlation model is {corr.shape[0]}x{corr.shape[1]}, channel is {rows}x{cols}")
    h = draw_iid(rows, cols, rng, batch)
    if corr.is_identity:
        return h
    return corr.r_rx_sqrt @ h @ corr.r_tx_sqrt


def empirical_correlation(samples) -> dict:
    """Average ``H^H H`` (transmit side) and ``H H^H`` (receive side).

    Returns a dict with the raw averages (``r_tx_raw``, ``r_rx_raw``) and
    versions scaled to unit diagonal (``r_tx``, ``r_rx``).
    """
    h = np.asarray(samples)
    if h.ndim == 2:
        h = h[None]
    if h.ndim != 3 or h.shape[0] == 0:
        raise ValueError("need at least one channel sample")
    r_tx_raw = np.einsum("bnm,bnk->mk", h.conj(), h) / h.shape[0]
    r_rx_raw = np.einsum("bnm,bkm->nk", h, h.conj()) / h.shape[0]
    return {
        "r_tx": _unit_diagonal(r_tx_raw),
        "r_rx": _unit_diagonal(r_rx_raw),
        "r_tx_raw": r_tx_raw,
        "r_rx_raw": r_rx_raw,
    }


def _unit_diagonal(r: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.real(np.diag(r)))
    if np.any(d <= 0):
        raise ValueError("correlation has a zero diagonal entry")
    out = r / np.outer(d, d)
    return (out + out.conj().T) / 2


# -- ray-based SI channel -----------------------------------------------------

@dataclass(frozen=True)
class RayTap:
    """One propagation path: linear power, angles and polarization phases (radians).

    ``phases`` is ``(hh, vh, hv, vv)`` or None to draw them uniformly.
    """

    power: float
    aoa_az: float
    aod_az: float
    zoa: float
    zod: float
    phases: Optional[Tuple[float, float, float, float]] = None

    def __post_init__(self):
        if not self.power >= 0:
            raise ValueError(f"ray power must be non-negative, got {self.power}")
        for v in (self.aoa_az, self.aod_az, self.zoa, self.zod):
            if not np.isfinite(v):
                raise ValueError("ray angles must be finite")


@dataclass(frozen=True)
class PatternTable:
    """Dual-polarization amplitude patterns on a regular (zenith, azimuth) grid.

    ``g_h``/``g_v`` have shape ``(len(zenith_deg), len(azimuth_deg))`` and
    hold linear field amplitudes. Lookup snaps to the nearest grid point.
    """

    zenith_deg: np.ndarray
    azimuth_deg: np.ndarray
    g_h: np.ndarray
    g_v: np.ndarray

    @classmethod
    def constant(cls, g_h: float, g_v: float) -> "PatternTable":
        zen = np.arange(0.0, 181.0, 1.0)
        az = np.arange(-180.0, 180.0, 1.0)
        shape = (zen.size, az.size)
        return cls(zen, az, np.full(shape, float(g_h)), np.full(shape, float(g_v)))

    def lookup(self, zenith: float, azimuth: float) -> Tuple[float, float]:
        """Return (G^H, G^V) at angles given in radians."""
        iz = _nearest(self.zenith_deg, np.degrees(zenith), periodic=False, what="zenith")
        ia = _nearest(self.azimuth_deg, np.degrees(azimuth), periodic=True, what="azimuth")
        return float(self.g_h[iz, ia]), float(self.g_v[iz, ia])


def _grid_step(grid: np.ndarray) -> float:
    return float(np.min(np.diff(grid))) if grid.size > 1 else 0.0


def _nearest(grid: np.ndarray, value: float, periodic: bool, what: str) -> int:
    step = _grid_step(grid)
    lo, hi = grid[0], grid[-1]
    if periodic and grid.size > 1 and hi - lo + step >= 360.0 - 1e-9:
        dist = np.abs((grid - value + 180.0) % 360.0 - 180.0)
        return int(np.argmin(dist))
    if periodic:
        # Partial azimuth coverage: bring the value into the grid's window first.
        value = lo + (value - lo) % 360.0
    if value < lo - step / 2 - 1e-9 or value > hi + step / 2 + 1e-9:
        raise ValueError(f"pattern grid does not cover {what} {value:.3f} deg")
    return int(np.argmin(np.abs(grid - value)))


@dataclass(frozen=True)
class AntennaGeometry:
    """Array positions in meters, carrier wavelength and element patterns."""

    tx_positions: np.ndarray
    rx_positions: np.ndarray
    wavelength: float
    pattern_tx: PatternTable
    pattern_rx: PatternTable

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        for name in ("tx_positions", "rx_positions"):
            pos = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if pos.shape[-1] != 3 or not np.all(np.isfinite(pos)):
                raise ValueError(f"{name} must be finite 3-vectors")
            object.__setattr__(self, name, pos)

    @classmethod
    def default_ula(cls, m_tx: int, n_rx: int, pattern_tx=None, pattern_rx=None,
                    carrier_hz: float = CARRIER_HZ, spacing_wl: float = 1.0):
        """Separate linear transmit and receive arrays with ``spacing_wl`` spacing."""
        lam = SPEED_OF_LIGHT / carrier_hz
        tx = ula_positions(m_tx, spacing_wl * lam)
        rx = ula_positions(n_rx, spacing_wl * lam)
        # default ports: transmit co-polarized on H, receive co-polarized on V
        return cls(tx, rx, lam,
                   pattern_tx or PatternTable.constant(1.0, 0.0),
                   pattern_rx or PatternTable.constant(0.0, 1.0))


def _unit_vector(zenith: float, azimuth: float) -> np.ndarray:
    return np.array([np.sin(zenith) * np.cos(azimuth),
                     np.sin(zenith) * np.sin(azimuth),
                     np.cos(zenith)])


def synth_ray_si_channel(rays: Sequence[RayTap], geom: AntennaGeometry,
                         rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Clustered SI channel (N x M) summed over ray taps.

    Each tap contributes its power times the receive pattern row, the 2x2
    polarization phase matrix, the transmit pattern column and the two array
    steering phasors. Taps without phases need ``rng``.
    """
    if len(rays) == 0:
        raise ValueError("ray list is empty")
    k = 2.0 * np.pi / geom.wavelength
    h = np.zeros((geom.rx_positions.shape[0], geom.tx_positions.shape[0]), dtype=complex)
    for ray in rays:
        if ray.phases is None:
            if rng is None:
                raise ValueError("ray has no polarization phases and no rng was given")
            phases = rng.uniform(0.0, 2.0 * np.pi, size=4)
        else:
            phases = np.asarray(ray.phases, dtype=float)
        pol = np.exp(1j * phases).reshape(2, 2)  # [[HH, VH], [HV, VV]]
        g_rx = np.array(geom.pattern_rx.lookup(ray.zoa, ray.aoa_az))
        g_tx = np.array(geom.pattern_tx.lookup(ray.zod, ray.aod_az))
        gain = ray.power * (g_rx @ pol @ g_tx)
        a_rx = np.exp(1j * k * geom.rx_positions @ _unit_vector(ray.zoa, ray.aoa_az))
        a_tx = np.exp(1j * k * geom.tx_positions @ _unit_vector(ray.zod, ray.aod_az))
        h += gain * np.outer(a_rx, a_tx)
    return h


def normalize_channel_power(h: np.ndarray) -> np.ndarray:
    """Scale so that the mean entry power is one."""
    p = np.mean(np.abs(h) ** 2)
    if p <= 0:
        raise ValueError("channel has zero power")
    return h / np.sqrt(p)


# -- file formats -------------------------------------------------------------

RAY_COLUMNS = ("power_db", "aoa_deg", "aod_deg", "zoa_deg", "zod_deg",
               "phi_hh_deg", "phi_vh_deg", "phi_hv_deg", "phi_vv_deg")
PATTERN_COLUMNS = ("zenith_deg", "azimuth_deg", "g_copol_db", "g_crosspol_db")


def _read_rows(path, required, optional=()):
    p = Path(path)
    try:
        fh = p.open(newline="")
    except OSError as exc:
        raise InputFileError(f"cannot open {p}: {exc}") from exc
    with fh:
        reader = csv.DictReader(line for line in fh if not line.lstrip().startswith("#"))
        header = [c.strip() for c in (reader.fieldnames or [])]
        missing = [c for c in required if c not in header]
        if missing:
            raise InputFileError(f"{p}: missing columns {missing}", line=1)
        extra = [c for c in header if c not in required and c not in optional]
        if extra:
            raise InputFileError(f"{p}: unknown columns {extra}", line=1)
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            row = {}
            for key, val in raw.items():
                key = key.strip() if key else key
                if key is None or val is None:
                    raise InputFileError("wrong number of fields", line=lineno)
                val = val.strip()
                if val == "" and key in optional:
                    row[key] = None
                    continue
                try:
                    num = float(val)
                except ValueError:
                    raise InputFileError(f"{key}={val!r} is not a number", line=lineno) from None
                if not np.isfinite(num):
                    raise InputFileError(f"{key} is not finite", line=lineno)
                row[key] = num
            rows.append(row)
    if not rows:
        raise InputFileError(f"{p}: no data rows")
    return rows


def load_rays(path) -> list:
    """Parse a ray CSV. Phase columns are optional (blank or absent -> random)."""
    rows = _read_rows(path, RAY_COLUMNS[:5], RAY_COLUMNS[5:])
    rays = []
    for row in rows:
        ph = [row.get(c) for c in RAY_COLUMNS[5:]]
        phases = None if any(v is None for v in ph) else tuple(np.radians(ph))
        rays.append(RayTap(
            power=10.0 ** (row["power_db"] / 10.0),
            aoa_az=np.radians(row["aoa_deg"]), aod_az=np.radians(row["aod_deg"]),
            zoa=np.radians(row["zoa_deg"]), zod=np.radians(row["zod_deg"]),
            phases=phases))
    return rays


def load_pattern(path, port: str) -> PatternTable:
    """Parse a pattern CSV for one port.

    ``port="rx"`` maps co-polarization to V and cross-polarization to H,
    ``port="tx"`` maps co-polarization to H and cross-polarization to V.
    Gains in dB are converted to field amplitudes, ``10**(g/20)``.
    """
    if port not in ("tx", "rx"):
        raise ValueError("port must be 'tx' or 'rx'")
    rows = _read_rows(path, PATTERN_COLUMNS)
    zen = np.unique([r["zenith_deg"] for r in rows])
    az = np.unique([r["azimuth_deg"] for r in rows])
    co = np.full((zen.size, az.size), np.nan)
    cross = np.full_like(co, np.nan)
    for r in rows:
        i = np.searchsorted(zen, r["zenith_deg"])
        j = np.searchsorted(az, r["azimuth_deg"])
        co[i, j] = 10.0 ** (r["g_copol_db"] / 20.0)
        cross[i, j] = 10.0 ** (r["g_crosspol_db"] / 20.0)
    if np.isnan(co).any():
        raise InputFileError(f"{path}: pattern is not a full zenith x azimuth grid")
    if port == "rx":
        return PatternTable(zen, az, g_h=cross, g_v=co)
    return PatternTable(zen, az, g_h=co, g_v=cross)
