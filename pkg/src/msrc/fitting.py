"""Derivative-free fitting of :class:`EstimatorParams` by masked cross-entropy.

Each step draws one random mask for a corpus item: a ratio ``cos(eps*pi/2)``
with ``eps ~ U(0, 1)`` selects the positions holding the smallest values of
an i.i.d. uniform matrix. The unmasked rest is the context. Coordinates are
then updated one at a time from central differences evaluated on that same
mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyCorpus
from .estimator import LOWER, UPPER, ContextState, EstimatorParams, activity, context_features, logistic_pmf, zero_symbol
from .lossy import LossyBackend, lossy_encode, residual_compute
from .pixio import Image
from .residual import decompose
from .rng import SplitMix64

REL_STEP = 1e-3
LR0 = 0.5
LR_HALF_LIFE = 50
MAX_REL_MOVE = 0.5
EVAL_MASKS = 4


@dataclass(eq=False)
class _Plane:
    lsb: np.ndarray
    recon: np.ndarray
    act: np.ndarray
    zero: int
    prev: np.ndarray | None


@dataclass
class FitResult:
    params: EstimatorParams
    losses: list[float] = field(default_factory=list)
    initial: float = 0.0
    final: float = 0.0
    heldout_initial: float = 0.0
    heldout_final: float = 0.0

    @property
    def improvement(self) -> float:
        return 1.0 - self.final / self.initial if self.initial > 0 else 0.0


def prepare(img: Image, backend: LossyBackend) -> list[_Plane]:
    recon, _ = lossy_encode(img, backend)
    planes = []
    prev = None
    for c, r in enumerate(residual_compute(img, recon)):
        d = decompose(r)
        rc = recon[c].astype(np.float64)
        planes.append(_Plane(d.lsb, rc, activity(rc), zero_symbol(d.r_min), prev))
        prev = d.lsb
    return planes


def draw_masks(planes: list[_Plane], rng: SplitMix64) -> list[np.ndarray]:
    """One training mask per channel; True marks positions the model must predict."""
    eps = float(rng.uniform(1)[0])
    ratio = math.cos(eps * math.pi / 2)
    masks = []
    for p in planes:
        n = p.lsb.size
        k = int(math.floor(ratio * n + 0.5))
        u = rng.uniform(n)
        m = np.zeros(n, dtype=bool)
        m[np.argsort(u, kind="stable")[:k]] = True
        masks.append(m.reshape(p.lsb.shape))
    return masks


def masked_bits(vec: np.ndarray, planes: list[_Plane], masks: list[np.ndarray]) -> tuple[float, int]:
    params = EstimatorParams.from_vector(vec)
    bits = 0.0
    count = 0
    for p, m in zip(planes, masks):
        if not m.any():
            continue
        ctx = ContextState(p.lsb, ~m, p.recon, p.zero, p.prev)
        mu, scale = context_features(ctx, params, act=p.act)
        pmf = logistic_pmf(mu[m], scale[m], params.floor_mass)
        truth = p.lsb[m]
        bits -= float(np.log2(pmf[np.arange(truth.size), truth]).sum())
        count += truth.size
    return bits, count


def _loss(vec, planes, masks) -> float:
    bits, count = masked_bits(vec, planes, masks)
    return bits / count if count else 0.0


def evaluate(params: EstimatorParams, items: list[list[_Plane]], seed: int, n_masks: int = EVAL_MASKS) -> float:
    """Masked cross-entropy (bits/symbol) pooled over items and a fixed set of masks."""
    vec = params.to_vector()
    rng = SplitMix64(seed ^ 0x5EED)
    bits = 0.0
    count = 0
    for planes in items:
        for _ in range(n_masks):
            b, c = masked_bits(vec, planes, draw_masks(planes, rng))
            bits += b
            count += c
    return bits / count if count else 0.0


def _project(vec: np.ndarray) -> np.ndarray:
    vec = np.clip(vec, LOWER, UPPER)
    n_w = len(vec) - 4
    if not np.any(vec[:n_w] > 0):
        vec[n_w - 1] = 1e-6
    return vec


def fit_params(
    corpus: Sequence[tuple[Image, LossyBackend]],
    init: EstimatorParams,
    steps: int,
    seed: int = 0,
) -> FitResult:
    """Fit by coordinate-wise central-difference descent; never returns worse than ``init`` on the held-out item."""
    if not corpus:
        raise EmptyCorpus("fit corpus is empty")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    items = [prepare(img, backend) for img, backend in corpus]
    train = items[:-1] if len(items) > 1 else items
    heldout = items[-1:]
    rng = SplitMix64(seed)
    vec = _project(init.to_vector())
    losses = []
    for step in range(steps):
        planes = train[step % len(train)]
        masks = draw_masks(planes, rng)
        lr = LR0 / (1.0 + step / LR_HALF_LIFE)
        current = _loss(vec, planes, masks)
        losses.append(current)
        for i in range(len(vec)):
            h = REL_STEP * max(abs(vec[i]), 1e-2)
            hi = vec.copy()
            lo = vec.copy()
            hi[i] = min(vec[i] + h, UPPER[i])
            lo[i] = max(vec[i] - h, LOWER[i])
            if hi[i] == lo[i]:
                continue
            grad = (_loss(hi, planes, masks) - _loss(lo, planes, masks)) / (hi[i] - lo[i])
            s = max(abs(vec[i]), 1e-2)
            move = float(np.clip(-lr * s * s * grad, -MAX_REL_MOVE * s, MAX_REL_MOVE * s))
            trial = vec.copy()
            trial[i] += move
            trial = _project(trial)
            value = _loss(trial, planes, masks)
            if value <= current:
                vec, current = trial, value
    fitted = EstimatorParams.from_vector(vec)
    result = FitResult(
        fitted, losses,
        initial=evaluate(init, train, seed), final=evaluate(fitted, train, seed),
        heldout_initial=evaluate(init, heldout, seed), heldout_final=evaluate(fitted, heldout, seed),
    )
    if result.heldout_final > result.heldout_initial:
        result.params, result.final, result.heldout_final = init, result.initial, result.heldout_initial
    return result


def adapt_to_image(img: Image, backend: LossyBackend, init: EstimatorParams, steps: int, seed: int = 0, crop: int = 64) -> EstimatorParams:
    """Fit on a centred crop of the image being encoded (the result travels in the container)."""
    top = max(0, (img.height - crop) // 2)
    left = max(0, (img.width - crop) // 2)
    window = Image(img.planes[:, top : top + crop, left : left + crop])
    return fit_params([(window, backend)], init, steps, seed).params
