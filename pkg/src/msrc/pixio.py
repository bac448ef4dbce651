"""Binary PGM/PPM reading and writing, plus the synthetic test corpus."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ChannelFormatMismatch, MalformedHeader, TruncatedPayload, UnsupportedMaxval
from .rng import SplitMix64

_MAGIC_CHANNELS = {b"P5": 1, b"P6": 3}
_FORMAT_MAGIC = {"PGM": b"P5", "PPM": b"P6"}

SYNTHETIC_KINDS = ("constant", "uniform_noise", "gradient", "checker", "natural")


@dataclass(frozen=True, eq=False)
class Image:
    """An 8-bit image held as a ``(channels, height, width)`` uint8 array."""

    planes: np.ndarray

    def __post_init__(self):
        planes = np.asarray(self.planes)
        if planes.ndim != 3 or planes.shape[0] not in (1, 3):
            raise ValueError(f"planes must have shape (1|3, H, W), got {planes.shape}")
        if planes.shape[1] < 1 or planes.shape[2] < 1:
            raise ValueError("image dimensions must be positive")
        if planes.dtype != np.uint8:
            if planes.size and (planes.min() < 0 or planes.max() > 255):
                raise ValueError("samples must lie in [0, 255]")
            planes = planes.astype(np.uint8)
        object.__setattr__(self, "planes", np.ascontiguousarray(planes))

    @property
    def channels(self) -> int:
        return self.planes.shape[0]

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @property
    def pixels(self) -> int:
        return self.width * self.height

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return self.planes.shape == other.planes.shape and bool(np.array_equal(self.planes, other.planes))

    def __repr__(self) -> str:
        return f"Image({self.width}x{self.height}x{self.channels})"


def _read_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments.

    Returns the tokens and the offset of the first payload byte (just past the
    single whitespace byte that terminates the last token).
    """
    tokens: list[bytes] = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and (data[pos : pos + 1].isspace() or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                while pos < n and data[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos] != ord("#"):
            pos += 1
        if start == pos:
            raise MalformedHeader("header ended early")
        tokens.append(data[start:pos])
    if pos >= n or not data[pos : pos + 1].isspace():
        raise MalformedHeader("missing whitespace after maxval")
    return tokens, pos + 1


def load_image(data: bytes, format: str | None = None) -> Image:
    """Parse a binary PGM (P5) or PPM (P6) file with maxval 255."""
    if len(data) < 2 or data[:2] not in _MAGIC_CHANNELS:
        raise MalformedHeader("not a binary PGM/PPM file")
    if format is not None and _FORMAT_MAGIC.get(format.upper()) != data[:2]:
        raise MalformedHeader(f"file magic {data[:2]!r} does not match format {format}")
    channels = _MAGIC_CHANNELS[data[:2]]
    (_, w_tok, h_tok, max_tok), offset = _read_tokens(data, 4)
    try:
        width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
    except ValueError as exc:
        raise MalformedHeader("non-numeric header field") from exc
    if width < 1 or height < 1:
        raise MalformedHeader("image dimensions must be positive")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} not supported (only 255)")
    size = width * height * channels
    payload = data[offset : offset + size]
    if len(payload) < size:
        raise TruncatedPayload(f"expected {size} payload bytes, found {len(payload)}")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return Image(np.transpose(pixels, (2, 0, 1)).copy())


def save_image(img: Image, format: str | None = None) -> bytes:
    """Serialize to P5/P6; ``format`` defaults to the one matching the channel count."""
    if format is None:
        format = "PGM" if img.channels == 1 else "PPM"
    magic = _FORMAT_MAGIC.get(format.upper())
    if magic is None or _MAGIC_CHANNELS[magic] != img.channels:
        raise ChannelFormatMismatch(f"{img.channels}-channel image cannot be written as {format}")
    header = b"%s\n%d %d\n255\n" % (magic, img.width, img.height)
    return header + np.transpose(img.planes, (1, 2, 0)).tobytes()


def read_image_file(path: str | Path) -> Image:
    return load_image(Path(path).read_bytes())


def write_image_file(path: str | Path, img: Image) -> None:
    Path(path).write_bytes(save_image(img))


def generate_synthetic(kind: str, width: int, height: int, channels: int = 1, seed: int = 0) -> Image:
    """Deterministic synthetic image.

    ``natural`` is a smooth random field with mild texture, used where a test
    needs something closer to photographic content than the four basic kinds.
    """
    if width < 1 or height < 1:
        raise ValueError("width and height must be >= 1")
    if channels not in (1, 3):
        raise ValueError("channels must be 1 or 3")
    shape = (channels, height, width)
    if kind == "constant":
        planes = np.full(shape, 128, dtype=np.uint8)
    elif kind == "uniform_noise":
        words = SplitMix64(seed).words(channels * height * width)
        planes = (words >> np.uint64(56)).astype(np.uint8).reshape(shape)
    elif kind == "gradient":
        j = np.arange(width)
        row = np.zeros(width, dtype=np.int64) if width == 1 else (255 * j) // (width - 1)
        planes = np.broadcast_to(row.astype(np.uint8), shape).copy()
    elif kind == "checker":
        i, j = np.indices((height, width))
        planes = np.broadcast_to(np.where((i + j) % 2 == 0, 0, 255).astype(np.uint8), shape).copy()
    elif kind == "natural":
        planes = _natural(width, height, channels, seed)
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    return Image(planes)


def _natural(width: int, height: int, channels: int, seed: int) -> np.ndarray:
    rng = SplitMix64(seed)
    y, x = np.indices((height, width), dtype=np.float64)
    base = np.zeros((height, width))
    for _ in range(4):
        fx, fy, phase, amp = rng.uniform(4)
        base += (18 + 30 * amp) * np.cos(2 * math.pi * ((0.5 + 3 * fx) * x / max(width, 8) + (0.5 + 3 * fy) * y / max(height, 8)) + 2 * math.pi * phase)
    slope = 60 * (x / max(width - 1, 1)) + 40 * (y / max(height - 1, 1))
    out = np.empty((channels, height, width), dtype=np.uint8)
    for c in range(channels):
        offset = 96 + 16 * c
        texture = (rng.uniform(height * width).reshape(height, width) - 0.5) * 8
        out[c] = np.clip(np.floor(offset + base * (1 - 0.15 * c) + slope + texture), 0, 255).astype(np.uint8)
    return out
