"""Iterative masked sampling: schedules, confidence scores, masks and the channel drivers.

One channel's symbols are coded over ``T`` iterations. In each iteration
the estimator predicts a PMF for every still-unknown position. A value is
sampled from that PMF and scored by its log-probability plus Gaussian noise.
The ``k`` lowest scores stay masked and every other unknown position is
coded now. The encoder and decoder repeat the same computation draw for
draw, so the decoder sees the same masks without any side information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import OutOfRangeIteration, PmfDigestMismatch
from .estimator import ContextState, EstimatorParams, activity, context_features, logistic_pmf, quantize_pmf, zero_symbol
from .rangecoder import PROB_BITS, PROB_TOTAL, RangeDecoder, RangeEncoder
from .rng import MASK64, SplitMix64

SCHEDULERS = ("cosine", "linear", "square")
NOISE_TERMS = 12

# ln(f / 65536) for every representable frequency; index 0 is never used
with np.errstate(divide="ignore"):
    LN_FREQ = np.log(np.arange(PROB_TOTAL + 1, dtype=np.float64) / PROB_TOTAL)

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


@dataclass(frozen=True)
class MaskSchedule:
    scheduler: str = "cosine"
    T: int = 12
    beta: float = 10.5
    seed: int = 42

    def __post_init__(self):
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if not 1 <= self.T <= 64:
            raise ValueError(f"T must be in [1, 64], got {self.T}")
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be finite and >= 0, got {self.beta}")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass
class IterationTrace:
    masked: list[int] = field(default_factory=list)
    coded: list[int] = field(default_factory=list)
    bits: list[float] = field(default_factory=list)
    pmf_digest: int = 0

    @property
    def bpsp(self) -> list[float]:
        """Bits per symbol coded at each iteration (0 where nothing was coded)."""
        return [b / c if c else 0.0 for b, c in zip(self.bits, self.coded)]

    @property
    def total_bits(self) -> float:
        return float(sum(self.bits))


def tau(schedule: MaskSchedule, t: int) -> float:
    """Fraction of positions still masked after iteration ``t``."""
    T = schedule.T
    if not 1 <= t <= T:
        raise OutOfRangeIteration(f"iteration {t} outside [1, {T}]")
    if t == T:
        return 0.0
    if schedule.scheduler == "cosine":
        return math.cos(t * math.pi / (2 * T))
    if schedule.scheduler == "linear":
        return 1.0 - t / T
    return 1.0 - (t / T) ** 2


def masked_count(ratio: float, n: int) -> int:
    return int(math.floor(ratio * n + 0.5))


@numba.njit(cache=True)
def _fnv1a_u16(values, h):
    prime = np.uint64(FNV_PRIME)
    for v in values:
        h = (h ^ np.uint64(v & 0xFF)) * prime
        h = (h ^ np.uint64((v >> 8) & 0xFF)) * prime
    return h


def fnv1a64(data: bytes, h: int = FNV_OFFSET) -> int:
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


def table_digest(qrows: np.ndarray) -> int:
    """FNV-1a 64 over the tables, each bin as a little-endian u16, rows then bins."""
    flat = np.ascontiguousarray(qrows, dtype=np.int64).ravel()
    return int(_fnv1a_u16(flat, np.uint64(FNV_OFFSET)))


@numba.njit(cache=True)
def _inverse_cdf(qrows, u):
    n, m = qrows.shape
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        acc = 0
        s = 0
        while s < m - 1:
            acc += qrows[i, s]
            if acc > u[i]:
                break
            s += 1
        out[i] = s
    return out


@numba.njit(cache=True)
def _starts(qrows, symbols):
    out = np.empty(symbols.shape[0], dtype=np.int64)
    for i in range(symbols.shape[0]):
        acc = 0
        for s in range(symbols[i]):
            acc += qrows[i, s]
        out[i] = acc
    return out


def _draw_values(qrows: np.ndarray, rng: SplitMix64) -> np.ndarray:
    """Smallest symbol whose cumulative frequency exceeds ``word mod 65536``."""
    u = (rng.words(qrows.shape[0]) % np.uint64(PROB_TOTAL)).astype(np.int64)
    return _inverse_cdf(np.ascontiguousarray(qrows, dtype=np.int64), u)


def _draw_noise(n: int, rng: SplitMix64) -> np.ndarray:
    words = rng.words(NOISE_TERMS * n).reshape(n, NOISE_TERMS).astype(np.float64) * 2.0 ** -64
    z = np.zeros(n)
    for i in range(NOISE_TERMS):
        z += words[:, i]
    return z - NOISE_TERMS / 2


def _draw_scores(qrows: np.ndarray, values: np.ndarray, beta: float, rng: SplitMix64) -> np.ndarray:
    freq = qrows[np.arange(qrows.shape[0]), values]
    return LN_FREQ[freq] + beta * _draw_noise(qrows.shape[0], rng)


def _lowest(scores: np.ndarray, k: int) -> np.ndarray:
    """Boolean mask of the ``k`` smallest entries, ties to the earlier index."""
    out = np.zeros(scores.shape[0], dtype=bool)
    k = min(k, scores.shape[0])
    if k > 0:
        out[np.argsort(scores, kind="stable")[:k]] = True
    return out


def sample_values(qpmf: np.ndarray, anchor: np.ndarray, known: np.ndarray, rng: SplitMix64) -> np.ndarray:
    """Sample a value at every unanchored position (row-major draw order); anchored ones keep ``known``."""
    anchor = np.asarray(anchor, dtype=bool)
    values = np.array(known, dtype=np.int64, copy=True)
    free = ~anchor
    if free.any():
        values[free] = _draw_values(np.asarray(qpmf)[free], rng)
    return values


def compute_scores(qpmf: np.ndarray, values: np.ndarray, anchor: np.ndarray, beta: float, rng: SplitMix64) -> np.ndarray:
    anchor = np.asarray(anchor, dtype=bool)
    scores = np.full(anchor.shape, np.inf)
    free = ~anchor
    if free.any():
        scores[free] = _draw_scores(np.asarray(qpmf)[free], np.asarray(values)[free], beta, rng)
    return scores


def build_mask(scores: np.ndarray, k: int) -> np.ndarray:
    """M=1 at the ``k`` lowest finite scores (clamped to how many are finite)."""
    scores = np.asarray(scores, dtype=np.float64)
    flat = scores.ravel()
    finite = np.flatnonzero(np.isfinite(flat))
    mask = np.zeros(flat.shape[0], dtype=bool)
    mask[finite[_lowest(flat[finite], k)]] = True
    return mask.reshape(scores.shape)


class _ChannelState:
    """State both drivers advance in lockstep."""

    def __init__(self, recon, prev_channel, schedule: MaskSchedule, params: EstimatorParams, r_min: int, channel: int):
        self.recon = np.asarray(recon, dtype=np.float64)
        self.shape = self.recon.shape
        self.n = self.recon.size
        self.prev = None if prev_channel is None else np.asarray(prev_channel, dtype=np.int64)
        self.schedule = schedule
        self.params = params
        self.zero = zero_symbol(r_min)
        self.rng = SplitMix64(schedule.seed ^ channel)
        self.act = activity(self.recon)
        self.anchor = np.zeros(self.n, dtype=bool)
        self.known = np.zeros(self.n, dtype=np.int64)

    def step(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        """Run P and M for iteration ``t``; returns positions to code now and their tables."""
        ctx = ContextState(self.known.reshape(self.shape), self.anchor.reshape(self.shape), self.recon, self.zero, self.prev)
        mu, scale = context_features(ctx, self.params, act=self.act)
        free = np.flatnonzero(~self.anchor)
        qrows = quantize_pmf(logistic_pmf(mu.ravel()[free], scale.ravel()[free], self.params.floor_mass))
        values = _draw_values(qrows, self.rng)
        scores = _draw_scores(qrows, values, self.schedule.beta, self.rng)
        masked = _lowest(scores, masked_count(tau(self.schedule, t), self.n))
        self.last_free_tables = qrows
        return free[~masked], qrows[~masked]

    def commit(self, positions: np.ndarray, symbols: np.ndarray) -> None:
        self.anchor[positions] = True
        self.known[positions] = symbols


def encode_channel(lsb, recon, prev_channel, schedule: MaskSchedule, params: EstimatorParams, r_min: int, channel: int = 0) -> tuple[bytes, IterationTrace]:
    lsb = np.asarray(lsb, dtype=np.int64).ravel()
    state = _ChannelState(recon, prev_channel, schedule, params, r_min, channel)
    enc = RangeEncoder()
    trace = IterationTrace()
    for t in range(1, schedule.T + 1):
        n_free = state.n - int(state.anchor.sum())
        positions, tables = state.step(t)
        if t == 1:
            trace.pmf_digest = table_digest(state.last_free_tables)
        symbols = lsb[positions]
        rows = np.arange(len(positions))
        freqs = tables[rows, symbols]
        starts = _starts(tables, symbols)
        for start, freq in zip(starts.tolist(), freqs.tolist()):
            enc.encode(start, freq)
        state.commit(positions, symbols)
        trace.masked.append(n_free - len(positions))
        trace.coded.append(len(positions))
        trace.bits.append(float(np.sum(PROB_BITS - np.log2(freqs))) if len(freqs) else 0.0)
    assert sum(trace.coded) == state.n and state.anchor.all()
    return enc.finish(), trace


def decode_channel(stream: bytes, recon, prev_channel, schedule: MaskSchedule, params: EstimatorParams, r_min: int, channel: int = 0, expected_digest: int | None = None) -> np.ndarray:
    state = _ChannelState(recon, prev_channel, schedule, params, r_min, channel)
    dec = RangeDecoder(stream)
    for t in range(1, schedule.T + 1):
        positions, tables = state.step(t)
        if t == 1 and expected_digest is not None:
            digest = table_digest(state.last_free_tables)
            if digest != expected_digest:
                raise PmfDigestMismatch(f"PMF digest {digest:016x} != stored {expected_digest:016x}")
        cum = np.zeros((len(positions), tables.shape[1] + 1), dtype=np.int64)
        np.cumsum(tables, axis=1, out=cum[:, 1:])
        symbols = [dec.decode(row) for row in cum.tolist()]
        state.commit(positions, np.array(symbols, dtype=np.int64))
    return state.known.reshape(state.shape)
