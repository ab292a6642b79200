"""
Rayleigh MIMO channel, SVD beamforming gains, Gray constellations and max-log
bit metrics.

Labels are read most significant bit first. A label bit of 0 maps to the
positive side of its axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class SvdError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Constellation:
    name: str
    points: np.ndarray  # indexed by integer label
    bits_per_symbol: int

    @property
    def order(self) -> int:
        return self.points.size

    @property
    def labels(self) -> np.ndarray:
        """(M, B) label bits, MSB first."""
        B = self.bits_per_symbol
        m = np.arange(self.order)
        return ((m[:, None] >> np.arange(B - 1, -1, -1)[None, :]) & 1).astype(np.uint8)


def _gray_pam(bits: int) -> np.ndarray:
    """Amplitude for each Gray label on one axis; label 0 is the largest positive level."""
    M = 1 << bits
    levels = np.arange(M - 1, -M, -2, dtype=float)  # +M-1 ... -(M-1)
    amp = np.empty(M)
    for pos in range(M):
        amp[pos ^ (pos >> 1)] = levels[pos]
    return amp


def _build(name: str) -> Constellation:
    if name == "bpsk":
        pts = np.array([1.0 + 0j, -1.0 + 0j])
        B = 1
    elif name == "qpsk":
        B = 2
        a = _gray_pam(1)
        m = np.arange(4)
        pts = (a[m >> 1] + 1j * a[m & 1]) / np.sqrt(2)
    elif name == "qam16":
        B = 4
        a = _gray_pam(2)
        m = np.arange(16)
        pts = (a[m >> 2] + 1j * a[m & 3]) / np.sqrt(10)
    else:
        raise ValueError(f"unknown constellation {name!r}; expected bpsk, qpsk or qam16")
    pts.setflags(write=False)
    return Constellation(name, pts, B)


CONSTELLATIONS = {n: _build(n) for n in ("bpsk", "qpsk", "qam16")}


def get_constellation(name: str) -> Constellation:
    try:
        return CONSTELLATIONS[name]
    except KeyError:
        raise ValueError(f"unknown constellation {name!r}; expected bpsk, qpsk or qam16") from None


def modulate(bits, c: Constellation) -> np.ndarray:
    b = np.asarray(bits, dtype=np.int64)
    B = c.bits_per_symbol
    if b.shape[-1] % B:
        raise ValueError(f"bit count {b.shape[-1]} is not a multiple of {B}")
    groups = b.reshape(*b.shape[:-1], -1, B)
    labels = groups @ (1 << np.arange(B - 1, -1, -1))
    return c.points[labels]


def bit_metrics(y, sigma, c: Constellation) -> np.ndarray:
    """Max-log costs, shape ``y.shape + (B, 2)``.

    ``cost[..., b, v]`` is the smallest ``|y - sigma*x|**2`` over points ``x``
    whose label bit ``b`` equals ``v``.
    """
    y = np.asarray(y, dtype=complex)
    sig = np.asarray(sigma, dtype=float)
    if np.any(sig < 0):
        raise ValueError("sigma must be nonnegative")
    d = np.abs(y[..., None] - sig[..., None] * c.points) ** 2
    lab = c.labels
    B = c.bits_per_symbol
    out = np.empty(y.shape + (B, 2))
    for b in range(B):
        for v in (0, 1):
            out[..., b, v] = d[..., lab[:, b] == v].min(axis=-1)
    return out


def hard_demap(y, sigma, c: Constellation) -> np.ndarray:
    y = np.asarray(y, dtype=complex)
    sig = np.asarray(sigma, dtype=float)
    d = np.abs(y[..., None] - sig[..., None] * c.points) ** 2
    return c.labels[d.argmin(axis=-1)].reshape(*y.shape[:-1], -1)


def sample_channel(nt: int, nr: int, rng: np.random.Generator) -> np.ndarray:
    """(nr, nt) matrix of i.i.d. CN(0, 1) entries."""
    if nt < 1 or nr < 1:
        raise ValueError("nt and nr must be >= 1")
    return (rng.standard_normal((nr, nt)) + 1j * rng.standard_normal((nr, nt))) / np.sqrt(2)


class SvdResult(NamedTuple):
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray


def svd_decompose(H) -> SvdResult:
    """H = U diag(sigma) V^H with sigma descending."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2:
        raise ValueError("H must be a matrix")
    if not np.all(np.isfinite(H)):
        raise ValueError("H has non-finite entries")
    try:
        U, s, Vh = np.linalg.svd(H)
    except np.linalg.LinAlgError as exc:
        raise SvdError(f"SVD did not converge for {H.shape} matrix: {exc}") from exc
    return SvdResult(U, s, Vh.conj().T)


def stream_gains(H: np.ndarray, streams: int) -> np.ndarray:
    """Largest ``streams`` singular values of each matrix in a (..., nr, nt) stack."""
    try:
        s = np.linalg.svd(H, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise SvdError(f"SVD did not converge: {exc}") from exc
    return s[..., :streams]
