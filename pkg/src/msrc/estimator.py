"""Closed-form context model producing a 64-bin PMF per residual position.

Each position's distribution is a discretized logistic whose centre blends
anchored neighbours in a 5x5 window, the co-located symbol of the previous
channel and the symbol a zero residual maps to. Its scale grows with local
activity in the lossy reconstruction and with disagreement between the
anchored neighbours. A uniform floor keeps every bin strictly positive.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import InvalidParams
from .residual import ALPHABET

OFFSETS: tuple[tuple[int, int], ...] = tuple(
    (di, dj) for di in range(-2, 3) for dj in range(-2, 3) if (di, dj) != (0, 0)
)
_RING = tuple((di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0))

PARAM_MAGIC = b"MSRPARAM"
N_PARAMS = len(OFFSETS) + 6
SCALAR_FIELDS = ("w_ch", "w_zero", "b0", "c_act", "c_dis", "floor_mass")

# projection box used by the fitter; parsing only enforces the open bounds
LOWER = np.array([0.0] * len(OFFSETS) + [0.0, 0.0, 0.02, 0.0, 0.0, 1e-6])
UPPER = np.array([50.0] * len(OFFSETS) + [50.0, 50.0, 64.0, 256.0, 16.0, 0.1])


def _default_offsets() -> tuple[float, ...]:
    return tuple(1.0 / (di * di + dj * dj) for di, dj in OFFSETS)


@dataclass(frozen=True)
class EstimatorParams:
    w_off: tuple[float, ...] = field(default_factory=_default_offsets)
    w_ch: float = 2.0
    w_zero: float = 0.5
    b0: float = 1.0
    c_act: float = 8.0
    c_dis: float = 1.0
    floor_mass: float = 1.0 / 1024

    def __post_init__(self):
        object.__setattr__(self, "w_off", tuple(float(w) for w in self.w_off))
        values = self.to_vector()
        if len(self.w_off) != len(OFFSETS):
            raise InvalidParams(f"expected {len(OFFSETS)} offset weights, got {len(self.w_off)}")
        if not np.all(np.isfinite(values)):
            raise InvalidParams("parameters must be finite")
        if min(self.w_off) < 0 or self.w_ch < 0 or self.w_zero < 0:
            raise InvalidParams("weights must be non-negative")
        if not (self.w_zero > 0 or self.w_ch > 0 or max(self.w_off) > 0):
            raise InvalidParams("at least one context weight must be positive")
        if self.b0 <= 0 or self.c_act < 0 or self.c_dis < 0:
            raise InvalidParams("scale parameters out of range")
        if not 0 < self.floor_mass <= 0.1:
            raise InvalidParams("floor_mass must lie in (0, 0.1]")

    def to_vector(self) -> np.ndarray:
        return np.array(list(self.w_off) + [getattr(self, f) for f in SCALAR_FIELDS], dtype=np.float64)

    @classmethod
    def from_vector(cls, v) -> "EstimatorParams":
        v = [float(x) for x in v]
        if len(v) != N_PARAMS:
            raise InvalidParams(f"expected {N_PARAMS} values, got {len(v)}")
        n = len(OFFSETS)
        return cls(tuple(v[:n]), **dict(zip(SCALAR_FIELDS, v[n:])))

    def to_bytes(self) -> bytes:
        v = self.to_vector()
        return PARAM_MAGIC + struct.pack("<H", len(v)) + struct.pack(f"<{len(v)}d", *v)

    @classmethod
    def from_bytes(cls, data: bytes) -> "EstimatorParams":
        if data[:8] != PARAM_MAGIC:
            raise InvalidParams("bad parameter file magic")
        if len(data) < 10:
            raise InvalidParams("parameter file truncated")
        (count,) = struct.unpack_from("<H", data, 8)
        if count != N_PARAMS or len(data) != 10 + 8 * count:
            raise InvalidParams(f"parameter file holds {count} values / {len(data)} bytes")
        return cls.from_vector(struct.unpack_from(f"<{count}d", data, 10))


DEFAULT_PARAMS = EstimatorParams()
PARAMS_BLOB_SIZE = 10 + 8 * N_PARAMS


@dataclass(eq=False)
class ContextState:
    """What the model may look at for one channel at one iteration.

    ``lsb_partial`` is only read where ``anchor`` is set.
    """

    lsb_partial: np.ndarray
    anchor: np.ndarray
    recon: np.ndarray
    zero_symbol: int
    prev_channel: np.ndarray | None = None


def zero_symbol(r_min: int) -> int:
    return min(max((0 - r_min) % ALPHABET, 0), ALPHABET - 1)


def _shift(padded: np.ndarray, di: int, dj: int, h: int, w: int) -> np.ndarray:
    return padded[2 + di : 2 + di + h, 2 + dj : 2 + dj + w]


def activity(recon: np.ndarray) -> np.ndarray:
    """Mean absolute difference to the in-bounds 8-neighbourhood, divided by 255."""
    h, w = recon.shape
    r = np.zeros((h + 4, w + 4))
    inside = np.zeros((h + 4, w + 4))
    r[2:-2, 2:-2] = recon
    inside[2:-2, 2:-2] = 1.0
    centre = r[2:-2, 2:-2]
    total = np.zeros((h, w))
    count = np.zeros((h, w))
    for di, dj in _RING:
        m = _shift(inside, di, dj, h, w)
        total += m * np.abs(_shift(r, di, dj, h, w) - centre)
        count += m
    return np.divide(total, count * 255.0, out=np.zeros((h, w)), where=count > 0)


_DI = np.array([o[0] for o in OFFSETS], dtype=np.int64)
_DJ = np.array([o[1] for o in OFFSETS], dtype=np.int64)


@numba.njit(cache=True)
def _features(anchor, sym, prev, has_prev, w_off, w_ch, w_zero, zero, act, b0, c_act, c_dis):
    h, w = anchor.shape
    n_off = w_off.shape[0]
    mu = np.empty((h, w))
    scale = np.empty((h, w))
    for i in range(h):
        for j in range(w):
            num = 0.0
            den = 0.0
            count = 0
            for o in range(n_off):
                y = i + _DI[o]
                x = j + _DJ[o]
                if 0 <= y < h and 0 <= x < w and anchor[y, x]:
                    num += w_off[o] * sym[y, x]
                    den += w_off[o]
                    count += 1
            if has_prev:
                num += w_ch * prev[i, j]
                den += w_ch
            num += w_zero * zero
            den += w_zero
            m = num / den if den > 0 else float(zero)
            sigma = 0.0
            if count >= 2:
                spread = 0.0
                weight = 0.0
                for o in range(n_off):
                    y = i + _DI[o]
                    x = j + _DJ[o]
                    if 0 <= y < h and 0 <= x < w and anchor[y, x]:
                        d = sym[y, x] - m
                        spread += w_off[o] * d * d
                        weight += w_off[o]
                if weight > 0:
                    sigma = np.sqrt(spread / weight)
            mu[i, j] = m
            scale[i, j] = b0 + c_act * act[i, j] + c_dis * sigma
    return mu, scale


def context_features(ctx: ContextState, params: EstimatorParams, act: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-position logistic centre and scale, both ``(H, W)`` float64.

    The centre is the weighted mean of the anchored neighbour symbols, the
    previous channel's symbol and the zero-residual symbol. The scale adds
    reconstruction activity and the weighted spread of the anchored neighbours
    (two or more of them) around that centre. ``act`` may carry a precomputed
    :func:`activity` plane.
    """
    anchor = np.ascontiguousarray(ctx.anchor, dtype=np.bool_)
    sym = np.ascontiguousarray(ctx.lsb_partial, dtype=np.int64)
    has_prev = ctx.prev_channel is not None
    prev = np.ascontiguousarray(ctx.prev_channel if has_prev else np.zeros((1, 1)), dtype=np.float64)
    if act is None:
        act = activity(np.asarray(ctx.recon, dtype=np.float64))
    return _features(
        anchor, sym, prev, has_prev, np.array(params.w_off), params.w_ch, params.w_zero,
        ctx.zero_symbol, np.ascontiguousarray(act, dtype=np.float64), params.b0, params.c_act, params.c_dis,
    )


@numba.njit(cache=True)
def _logistic_rows(mu, scale, floor_mass):
    n = mu.shape[0]
    out = np.empty((n, 64))
    keep = 1.0 - floor_mass
    base = floor_mass / 64.0
    for i in range(n):
        m = mu[i]
        b = scale[i]
        prev = 0.0
        for s in range(63):
            cdf = 1.0 / (1.0 + np.exp((m - (s + 0.5)) / b))
            out[i, s] = keep * (cdf - prev) + base
            prev = cdf
        out[i, 63] = keep * (1.0 - prev) + base
    return out


def logistic_pmf(mu: np.ndarray, scale: np.ndarray, floor_mass: float) -> np.ndarray:
    """Discretized logistic over 64 bins with open outer bins, mixed with a uniform floor.

    ``mu`` and ``scale`` are 1-D; returns ``(n, 64)``.
    """
    mu = np.ascontiguousarray(mu, dtype=np.float64).ravel()
    scale = np.ascontiguousarray(scale, dtype=np.float64).ravel()
    return _logistic_rows(mu, scale, float(floor_mass))


def predict_pmf(ctx: ContextState, params: EstimatorParams) -> np.ndarray:
    """Full ``(H, W, 64)`` PMF plane, anchored positions included."""
    mu, scale = context_features(ctx, params)
    h, w = mu.shape
    return logistic_pmf(mu.ravel(), scale.ravel(), params.floor_mass).reshape(h, w, ALPHABET)


@numba.njit(cache=True)
def _quantize_rows(p):
    n, m = p.shape
    q = np.empty((n, m), dtype=np.int64)
    for i in range(n):
        total = 0
        top = 0
        for s in range(m):
            f = np.int64(np.floor(p[i, s] * 65536.0))
            if f < 1:
                f = 1
            q[i, s] = f
            total += f
            if f > q[i, top]:
                top = s
        q[i, top] += 65536 - total
    return q


def quantize_pmf(p: np.ndarray) -> np.ndarray:
    """Integer tables totalling 65536 with every bin >= 1 (last axis is the bin axis).

    The rounding surplus goes to the largest bin, lowest index on ties.
    """
    p = np.asarray(p, dtype=np.float64)
    flat = np.ascontiguousarray(p.reshape(-1, p.shape[-1]))
    return _quantize_rows(flat).reshape(p.shape)


def masked_cross_entropy(p: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> float:
    """Mean code length in bits of the true symbols at masked positions."""
    mask = np.asarray(mask, dtype=bool)
    n = int(mask.sum())
    if n == 0:
        return 0.0
    probs = np.take_along_axis(p[mask], np.asarray(truth)[mask].reshape(-1, 1).astype(np.int64), axis=1)
    return float(-np.log2(probs).sum() / n)


def describe(params: EstimatorParams) -> str:
    w = ", ".join(f"{x:.3g}" for x in params.w_off)
    return (
        f"w_off=[{w}] w_ch={params.w_ch:.4g} w_zero={params.w_zero:.4g} b0={params.b0:.4g} "
        f"c_act={params.c_act:.4g} c_dis={params.c_dis:.4g} floor_mass={params.floor_mass:.3g}"
    )
