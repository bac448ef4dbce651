"""Lossy reconstruction backends and their order-0 coded substream."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CorruptSubstream, InvalidBackendParam, ShapeMismatch, StreamExhausted
from .pixio import Image
from .rangecoder import adaptive_o0_decode, adaptive_o0_encode, min_code_bits

BACKEND_KINDS = ("quantize", "down2x")


@dataclass(frozen=True)
class LossyBackend:
    kind: str = "quantize"
    param: int = 16

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise InvalidBackendParam(f"unknown lossy backend {self.kind!r}")
        if self.kind == "quantize" and not 2 <= self.param <= 128:
            raise InvalidBackendParam(f"quantizer step must be in [2, 128], got {self.param}")

    @property
    def code(self) -> int:
        return BACKEND_KINDS.index(self.kind)

    @classmethod
    def from_code(cls, code: int, param: int) -> "LossyBackend":
        if not 0 <= code < len(BACKEND_KINDS):
            raise InvalidBackendParam(f"unknown backend code {code}")
        return cls(BACKEND_KINDS[code], param)

    def __str__(self) -> str:
        return f"quantize{self.param}" if self.kind == "quantize" else "down2x"


def _quantize_recon(index: np.ndarray, q: int) -> np.ndarray:
    return np.minimum(index * q + q // 2, 255)


def _down2x(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    padded = np.zeros((h + h % 2, w + w % 2), dtype=np.int64)
    counts = np.zeros_like(padded)
    padded[:h, :w] = plane
    counts[:h, :w] = 1
    sums = padded[0::2, 0::2] + padded[1::2, 0::2] + padded[0::2, 1::2] + padded[1::2, 1::2]
    n = counts[0::2, 0::2] + counts[1::2, 0::2] + counts[0::2, 1::2] + counts[1::2, 1::2]
    return sums // n


def _up2x(small: np.ndarray, h: int, w: int) -> np.ndarray:
    return np.repeat(np.repeat(small, 2, axis=0), 2, axis=1)[:h, :w]


def _alphabet(backend: LossyBackend) -> int:
    return 255 // backend.param + 1 if backend.kind == "quantize" else 256


def lossy_encode(img: Image, backend: LossyBackend) -> tuple[np.ndarray, bytes]:
    """Return the reconstruction (int64, shape ``(C, H, W)``) and its coded substream."""
    x = img.planes.astype(np.int64)
    if backend.kind == "quantize":
        index = x // backend.param
        recon = _quantize_recon(index, backend.param)
        symbols = index.ravel()
    else:
        small = np.stack([_down2x(p) for p in x])
        recon = np.stack([_up2x(s, img.height, img.width) for s in small])
        symbols = small.ravel()
    return recon, adaptive_o0_encode(symbols.tolist(), _alphabet(backend))


def _symbol_shape(backend: LossyBackend, width: int, height: int, channels: int) -> tuple[int, int, int]:
    if backend.kind == "quantize":
        return channels, height, width
    return channels, (height + 1) // 2, (width + 1) // 2


def min_substream_bits(backend: LossyBackend, width: int, height: int, channels: int) -> float:
    """Lower bound on the coded size of any lossy substream for these dimensions."""
    c, h, w = _symbol_shape(backend, width, height, channels)
    return min_code_bits(c * h * w, _alphabet(backend))


def lossy_decode(backend: LossyBackend, substream: bytes, width: int, height: int, channels: int) -> np.ndarray:
    shape = _symbol_shape(backend, width, height, channels)
    count = shape[0] * shape[1] * shape[2]
    try:
        symbols = adaptive_o0_decode(substream, count, _alphabet(backend))
    except StreamExhausted as exc:
        raise CorruptSubstream(f"lossy substream: {exc}") from exc
    values = np.array(symbols, dtype=np.int64).reshape(shape)
    if backend.kind == "quantize":
        return _quantize_recon(values, backend.param)
    return np.stack([_up2x(s, height, width) for s in values])


def residual_compute(img: Image, recon: np.ndarray) -> np.ndarray:
    recon = np.asarray(recon)
    if recon.shape != img.planes.shape:
        raise ShapeMismatch(f"reconstruction shape {recon.shape} != image shape {img.planes.shape}")
    return img.planes.astype(np.int64) - recon.astype(np.int64)
