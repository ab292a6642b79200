"""
Monte Carlo link simulation of coded, bit-interleaved transmission over the
parallel subchannels of an SVD-beamformed MIMO channel.

Equivalent channel per stream s: y = sigma_s * x + n with n ~ CN(0, N0) and
N0 = S / 10**(snr_db/10), i.e. SNR is the total transmit energy of the S unit
energy streams over the per-antenna noise power. The channel matrix is drawn
once per frame.

Every frame draws its randomness from ``SeedSequence([master_seed, key(snr_db),
frame_index])``, so results do not depend on batching or on worker count.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .convcode import CodeSpec, build_trellis, encode_batch, viterbi_decode_batch
from .interleaver import InterleaverSpec, build_map
from .mimo_phy import bit_metrics, get_constellation, sample_channel, stream_gains

SNR_CONVENTION = "snr_db = 10*log10(S/N0): S unit-energy streams, CN(0,N0) noise per stream after combining"
CHANNELS = ("rayleigh", "awgn")


class ConfigError(ValueError):
    pass


class InsufficientPointsError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    code: CodeSpec
    interleaver: InterleaverSpec
    constellation: str = "qpsk"
    nt: int = 2
    nr: int = 2
    streams: int = 2
    snr_db: tuple[float, ...] = (0.0,)
    info_bits_per_frame: int = 1024
    max_frames: int = 10_000
    target_bit_errors: int = 500
    master_seed: int = 0
    channel: str = "rayleigh"  # "awgn" bypasses the MIMO channel: every sigma_s = 1
    coded: bool = True
    batch_frames: int = 64

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        il = self.interleaver
        c = get_constellation(self.constellation)
        if self.channel not in CHANNELS:
            raise ConfigError(f"channel must be one of {CHANNELS}")
        if self.streams < 1 or self.streams > min(self.nt, self.nr):
            raise ConfigError(f"need 1 <= S <= min(Nt, Nr), got S={self.streams}")
        if il.num_streams != self.streams:
            raise ConfigError("interleaver stream count differs from S")
        if il.bits_per_symbol != c.bits_per_symbol:
            raise ConfigError(f"interleaver B={il.bits_per_symbol} but {c.name} carries "
                              f"{c.bits_per_symbol} bits per symbol")
        if il.mode != "sc":
            raise ConfigError("the link simulator runs single-carrier maps only")
        if not self.snr_db:
            raise ConfigError("snr_db list is empty")
        if any(b <= a for a, b in zip(self.snr_db, self.snr_db[1:])):
            raise ConfigError("snr_db must be strictly ascending")
        if self.info_bits_per_frame < 1 or self.max_frames < 1 or self.batch_frames < 1:
            raise ConfigError("frame sizes and counts must be positive")
        if self.target_bit_errors < 1:
            raise ConfigError("target_bit_errors must be positive")
        if self.master_seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.coded_bits_per_frame % il.period:
            raise ConfigError(f"{self.coded_bits_per_frame} coded bits per frame do not fill a "
                              f"whole number of interleaver periods (P={il.period})")

    @property
    def coded_bits_per_frame(self) -> int:
        if not self.coded:
            return self.info_bits_per_frame
        return self.code.n_out * (self.info_bits_per_frame + self.code.constraint_length - 1)

    @cached_property
    def _plan(self):
        imap = build_map(self.interleaver)
        n = self.coded_bits_per_frame
        s, t, b, _ = imap.locate(np.arange(n))
        times = (n // imap.period) * imap.symbols_per_period
        B = self.interleaver.bits_per_symbol
        flat = (s * times + t) * B + b
        return flat, times, build_trellis(self.code), get_constellation(self.constellation)


def _snr_key(snr_db: float) -> int:
    return int(np.float64(snr_db).view(np.uint64))


def noise_variance(snr_db: float, streams: int) -> float:
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return streams / 10 ** (snr_db / 10)


@dataclass(frozen=True)
class FrameResult:
    bit_errors: int
    frame_error: bool


def simulate_frames(cfg: SimConfig, snr_db: float, frame_indices: Sequence[int]) -> np.ndarray:
    """Bit errors for each listed frame."""
    flat, times, trellis, const = cfg._plan
    S, B = cfg.streams, const.bits_per_symbol
    F = len(frame_indices)
    n_info = cfg.info_bits_per_frame
    info = np.empty((F, n_info), dtype=np.uint8)
    H = np.empty((F, cfg.nr, cfg.nt), dtype=complex)
    noise = np.empty((F, S, times), dtype=complex)
    key = _snr_key(snr_db)
    for i, fi in enumerate(frame_indices):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, key, int(fi)]))
        info[i] = rng.integers(0, 2, n_info, dtype=np.uint8)
        H[i] = sample_channel(cfg.nt, cfg.nr, rng)
        noise[i] = (rng.standard_normal((S, times)) + 1j * rng.standard_normal((S, times))) / np.sqrt(2)

    coded = encode_batch(cfg.code, info, terminate=True) if cfg.coded else info
    grid = np.zeros((F, S * times * B), dtype=np.uint8)
    grid[:, flat] = coded
    labels = grid.reshape(F, S, times, B) @ (1 << np.arange(B - 1, -1, -1))
    x = const.points[labels]

    if cfg.channel == "rayleigh":
        sigma = stream_gains(H, S)
    else:
        sigma = np.ones((F, S))
    y = sigma[:, :, None] * x + math.sqrt(noise_variance(snr_db, S)) * noise

    metrics = bit_metrics(y, np.broadcast_to(sigma[:, :, None], y.shape), const)
    metrics = metrics.reshape(F, S * times * B, 2)[:, flat]
    if cfg.coded:
        decoded = viterbi_decode_batch(trellis, metrics.reshape(F, -1, cfg.code.n_out, 2))
    else:
        decoded = (metrics[..., 1] < metrics[..., 0]).astype(np.uint8)
    return np.count_nonzero(decoded != info, axis=1)


def run_frame(cfg: SimConfig, snr_db: float, frame_index: int) -> FrameResult:
    errors = int(simulate_frames(cfg, snr_db, [frame_index])[0])
    return FrameResult(errors, errors > 0)


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    bits: int
    bit_errors: int
    frames: int
    frame_errors: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames


@dataclass(frozen=True)
class BerCurve:
    points: tuple[BerPoint, ...]

    def to_csv(self, comments: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in comments:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["snr_db", "bits", "bit_errors", "frames", "frame_errors", "ber", "fer"])
        for p in self.points:
            w.writerow([f"{p.snr_db:g}", p.bits, p.bit_errors, p.frames, p.frame_errors,
                        f"{p.ber:.6e}", f"{p.fer:.6e}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "BerCurve":
        rows = csv.DictReader(line for line in text.splitlines() if not line.startswith("#"))
        return cls(tuple(BerPoint(float(r["snr_db"]), int(r["bits"]), int(r["bit_errors"]),
                                  int(r["frames"]), int(r["frame_errors"])) for r in rows))


def _simulate_point(cfg: SimConfig, snr_db: float, workers: int) -> BerPoint:
    chunk = cfg.batch_frames
    errors = frames = frame_errors = 0
    starts = range(0, cfg.max_frames, chunk)

    def work(start):
        return simulate_frames(cfg, snr_db, range(start, min(start + chunk, cfg.max_frames)))

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for i in range(0, len(starts), max(workers, 1)):
            wave = starts[i:i + max(workers, 1)]
            results = list(pool.map(work, wave)) if pool else [work(s) for s in wave]
            # consume in frame order; stop exactly where a serial run would
            for res in results:
                errors += int(res.sum())
                frame_errors += int(np.count_nonzero(res))
                frames += res.size
                if errors >= cfg.target_bit_errors or frames >= cfg.max_frames:
                    return BerPoint(snr_db, frames * cfg.info_bits_per_frame, errors, frames, frame_errors)
    finally:
        if pool:
            pool.shutdown()
    return BerPoint(snr_db, frames * cfg.info_bits_per_frame, errors, frames, frame_errors)


def sweep_snr(cfg: SimConfig, workers: int = 1) -> BerCurve:
    """Simulate every SNR point until ``target_bit_errors`` or ``max_frames``.

    Frames run in chunks of ``batch_frames``; the stopping rule is checked
    after each chunk, so the result is the same for any ``workers``.
    """
    return BerCurve(tuple(_simulate_point(cfg, s, workers) for s in cfg.snr_db))


@dataclass(frozen=True)
class DiversityEstimate:
    slope: float
    order: float
    window: tuple[float, float]
    residual: float
    snr_used: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"slope": self.slope, "order": self.order, "window": list(self.window),
                "residual": self.residual, "snr_used": list(self.snr_used)}


def estimate_diversity(curve: BerCurve, window: Optional[tuple[float, float]] = None,
                       min_errors: int = 100) -> DiversityEstimate:
    """Least-squares slope of log10(BER) against SNR in dB; order = -10 * slope.

    Points outside ``window`` or with fewer than ``min_errors`` bit errors are
    left out of the fit.
    """
    lo, hi = window if window is not None else (-math.inf, math.inf)
    pts = [p for p in curve.points
           if lo <= p.snr_db <= hi and math.isfinite(p.snr_db) and p.bit_errors >= min_errors]
    if len(pts) < 3:
        raise InsufficientPointsError(
            f"{len(pts)} points with >= {min_errors} errors in window [{lo}, {hi}]; need 3")
    x = np.array([p.snr_db for p in pts])
    y = np.log10([p.ber for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return DiversityEstimate(float(slope), float(-10 * slope), (lo, hi), resid,
                             tuple(float(v) for v in x))
