"""Zero-forcing precoders and combiner.

All functions accept a single matrix or a stack with leading batch axes.
Inverses are never formed explicitly: every ZF solution is obtained from a
linear solve against the Gram matrix, after a conditioning check.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, SingularChannelError

__all__ = [
    "Method", "BeamformerSet", "zf_precoder", "extended_zf_precoder",
    "normalize_columns", "zf_combiner", "build_beamformers", "RCOND_MIN",
]

RCOND_MIN = 1e-12


class Method(enum.Enum):
    """Digital self-interference cancellation strategy."""

    NO_SIC = "nosic"
    SUBTRACTION = "stt"
    SPATIAL_SUPPRESSION = "sps"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"nosic": cls.NO_SIC, "none": cls.NO_SIC, "stt": cls.SUBTRACTION,
                   "subtraction": cls.SUBTRACTION, "sps": cls.SPATIAL_SUPPRESSION,
                   "suppression": cls.SPATIAL_SUPPRESSION}
        if key not in aliases:
            raise ValueError(f"unknown method {value!r}; choose from nosic, stt, sps")
        return aliases[key]


def _gram_solve(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``gram @ x = rhs`` after rejecting ill-conditioned Gram matrices."""
    eig = np.linalg.eigvalsh(gram)
    top = eig[..., -1]
    if np.any(top <= 0) or np.any(eig[..., 0] < RCOND_MIN * top):
        raise SingularChannelError("channel Gram matrix is singular or ill-conditioned")
    return np.linalg.solve(gram, rhs)


def zf_precoder(h_dl_hat: np.ndarray) -> np.ndarray:
    """Right pseudo-inverse ``H^H (H H^H)^-1`` of a ``K x M`` channel (K <= M)."""
    h = np.asarray(h_dl_hat)
    k, m = h.shape[-2:]
    if k > m:
        raise DimensionError(f"need at least as many antennas as users ({k} > {m})")
    h_herm = np.swapaxes(h.conj(), -1, -2)
    gram = h @ h_herm
    # F = H^H Gram^-1  <=>  F^H = Gram^-1 H  (Gram is Hermitian)
    return np.swapaxes(_gram_solve(gram, h).conj(), -1, -2)


def extended_zf_precoder(h_dl_hat: np.ndarray, h_si_hat: np.ndarray) -> np.ndarray:
    """ZF over the stacked ``[H_DL; H_SI]`` channel, keeping the first K columns.

    The result inverts the downlink channel and lies in the null space of
    the estimated SI channel.
    """
    h_dl = np.asarray(h_dl_hat)
    h_si = np.asarray(h_si_hat)
    k, m = h_dl.shape[-2:]
    n = h_si.shape[-2]
    if h_si.shape[-1] != m:
        raise DimensionError("downlink and SI channels must share the transmit dimension")
    if m < n + k:
        raise DimensionError(f"spatial suppression needs M >= N + K ({m} < {n} + {k})")
    if n == 0:
        return zf_precoder(h_dl)
    h_si = np.broadcast_to(h_si, h_dl.shape[:-2] + h_si.shape[-2:])
    g = zf_precoder(np.concatenate([h_dl, h_si], axis=-2))
    return g[..., :k]


def normalize_columns(f: np.ndarray) -> np.ndarray:
    """Scale each column to squared norm ``1/K`` so the total power is one."""
    f = np.asarray(f)
    k = f.shape[-1]
    norms = np.linalg.norm(f, axis=-2, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot normalize a zero column")
    return f / (np.sqrt(k) * norms)


def zf_combiner(h_ul_hat: np.ndarray) -> np.ndarray:
    """Left pseudo-inverse ``(H^H H)^-1 H^H`` of an ``N x K`` channel; rows are w_k^T."""
    h = np.asarray(h_ul_hat)
    n, k = h.shape[-2:]
    if k > n:
        raise DimensionError(f"need at least as many receive chains as users ({k} > {n})")
    h_herm = np.swapaxes(h.conj(), -1, -2)
    return _gram_solve(h_herm @ h, h_herm)


@dataclass(frozen=True)
class BeamformerSet:
    """Precoder (raw and normalized) and combiner for one SIC method."""

    precoder_raw: np.ndarray
    precoder: np.ndarray
    combiner: np.ndarray
    method: Method


def build_beamformers(method, h_dl_hat: np.ndarray, h_ul_hat: np.ndarray,
                      h_si_hat: Optional[np.ndarray] = None) -> BeamformerSet:
    """Form the precoder/combiner pair used by ``method``.

    Spatial suppression nulls the estimated SI channel; the other two methods
    use plain ZF. All methods share the ZF combiner.
    """
    method = Method.parse(method)
    if method is Method.SPATIAL_SUPPRESSION:
        if h_si_hat is None:
            raise ValueError("spatial suppression needs the estimated SI channel")
        raw = extended_zf_precoder(h_dl_hat, h_si_hat)
    else:
        raw = zf_precoder(h_dl_hat)
    return BeamformerSet(raw, normalize_columns(raw), zf_combiner(h_ul_hat), method)
