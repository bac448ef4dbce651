"""Residual offset/split into flag, 3-bit MSB plane and 6-bit LSB symbols, and MSB run-length coding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RunLengthOverflow, TruncatedStream

LSB_BITS = 6
ALPHABET = 1 << LSB_BITS


@dataclass(eq=False)
class DecomposedResidual:
    r_min: int
    flag: int
    lsb: np.ndarray
    msb: np.ndarray | None = None

    def __post_init__(self):
        if self.flag and self.msb is None:
            raise ValueError("flag=1 requires an MSB plane")
        if not self.flag and self.msb is not None:
            raise ValueError("flag=0 forbids an MSB plane")


def decompose(residual: np.ndarray) -> DecomposedResidual:
    r = np.asarray(residual, dtype=np.int64)
    r_min = int(r.min())
    offset = r - r_min
    lsb = offset & (ALPHABET - 1)
    if int(offset.max()) < ALPHABET:
        return DecomposedResidual(r_min, 0, lsb)
    return DecomposedResidual(r_min, 1, lsb, offset >> LSB_BITS)


def recompose(d: DecomposedResidual) -> np.ndarray:
    offset = np.asarray(d.lsb, dtype=np.int64)
    if d.flag:
        offset = offset + (np.asarray(d.msb, dtype=np.int64) << LSB_BITS)
    return offset + d.r_min


def _uleb128(value: int) -> bytes:
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def rle_encode(msb: np.ndarray) -> bytes:
    """Row-major maximal runs as (value byte, ULEB128 run length) pairs."""
    flat = np.asarray(msb, dtype=np.int64).ravel()
    if flat.size == 0:
        return b""
    breaks = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.concatenate(([0], breaks))
    lengths = np.diff(np.concatenate((starts, [flat.size])))
    out = bytearray()
    for value, length in zip(flat[starts].tolist(), lengths.tolist()):
        out.append(value)
        out += _uleb128(length)
    return bytes(out)


def rle_decode(data: bytes, width: int, height: int) -> np.ndarray:
    total = width * height
    values: list[int] = []
    lengths: list[int] = []
    filled = 0
    pos = 0
    n = len(data)
    while pos < n:
        value = data[pos]
        pos += 1
        length = 0
        shift = 0
        while True:
            if pos >= n:
                raise TruncatedStream("run length cut off")
            byte = data[pos]
            pos += 1
            length |= (byte & 0x7F) << shift
            shift += 7
            if not byte & 0x80:
                break
            if shift > 63:
                raise RunLengthOverflow("run length varint too long")
        if value > 7:
            raise RunLengthOverflow(f"MSB value {value} out of range")
        filled += length
        if filled > total:
            raise RunLengthOverflow(f"runs cover more than {total} positions")
        values.append(value)
        lengths.append(length)
    if filled != total:
        raise RunLengthOverflow(f"runs cover {filled} positions, expected {total}")
    return np.repeat(np.array(values, dtype=np.int64), lengths).reshape(height, width)
