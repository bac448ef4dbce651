"""MSRC container, version 1.

Layout (little endian)::

    magic "MSRC" | version u8 | width u32 | height u32 | channels u8
    backend kind u8 | backend param u8 | scheduler u8 | T u8
    beta f64 | seed u64 | params length u16 | params blob
    per channel: r_min i16 | flag u8 | msb_len u32 | lsb_len u32
    lossy_len u32 | pmf_digest u64 | crc u32
    lossy substream | per channel: msb RLE bytes, lsb stream

The CRC-32 covers every byte before the CRC field and every substream byte.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, field

from .errors import BadMagic, CodecError, CrcMismatch, InvalidHeader, LengthMismatch, UnsupportedVersion
from .estimator import EstimatorParams
from .lossy import LossyBackend, min_substream_bits
from .rangecoder import min_code_bits
from .residual import ALPHABET
from .sampler import SCHEDULERS, MaskSchedule

MAGIC = b"MSRC"
VERSION = 1
MAX_PIXELS = 1 << 26

_FIXED = struct.Struct("<4sBIIBBBBBdQ")
_BLOB_LEN = struct.Struct("<H")
_CHANNEL = struct.Struct("<hBII")
_TAIL = struct.Struct("<IQI")


@dataclass
class ChannelStreams:
    r_min: int
    flag: int
    lsb: bytes
    msb: bytes = b""


@dataclass
class Container:
    width: int
    height: int
    backend: LossyBackend
    schedule: MaskSchedule
    params: EstimatorParams
    lossy: bytes
    channels: list[ChannelStreams] = field(default_factory=list)
    pmf_digest: int = 0

    @property
    def header_size(self) -> int:
        return _FIXED.size + _BLOB_LEN.size + len(self.params.to_bytes()) + _CHANNEL.size * len(self.channels) + _TAIL.size


def write_container(c: Container) -> bytes:
    if not c.channels:
        raise ValueError("container needs at least one channel")
    for ch in c.channels:
        if not ch.flag and ch.msb:
            raise ValueError("flag=0 channel cannot carry MSB bytes")
    blob = c.params.to_bytes()
    head = bytearray(
        _FIXED.pack(
            MAGIC, VERSION, c.width, c.height, len(c.channels), c.backend.code,
            c.backend.param if c.backend.kind == "quantize" else 0,
            SCHEDULERS.index(c.schedule.scheduler), c.schedule.T, c.schedule.beta, c.schedule.seed,
        )
    )
    head += _BLOB_LEN.pack(len(blob)) + blob
    for ch in c.channels:
        head += _CHANNEL.pack(ch.r_min, ch.flag, len(ch.msb), len(ch.lsb))
    payload = c.lossy + b"".join(ch.msb + ch.lsb for ch in c.channels)
    head += struct.pack("<IQ", len(c.lossy), c.pmf_digest)
    crc = zlib.crc32(payload, zlib.crc32(bytes(head)))
    return bytes(head) + struct.pack("<I", crc) + payload


def read_container(data: bytes) -> Container:
    """Parse and validate; any malformed input raises a :class:`ContainerError`."""
    data = bytes(data)
    if data[:4] != MAGIC:
        raise BadMagic("not an MSRC container")
    if len(data) < 5:
        raise LengthMismatch("header truncated")
    if data[4] != VERSION:
        raise UnsupportedVersion(f"container version {data[4]} (expected {VERSION})")
    pos = _FIXED.size + _BLOB_LEN.size
    if len(data) < pos:
        raise LengthMismatch("header truncated")
    _, _, width, height, n_ch, kind, param, sched, T, beta, seed = _FIXED.unpack_from(data, 0)
    (blob_len,) = _BLOB_LEN.unpack_from(data, _FIXED.size)
    blob = data[pos : pos + blob_len]
    pos += blob_len
    if len(blob) != blob_len or len(data) < pos + _CHANNEL.size * n_ch + _TAIL.size:
        raise LengthMismatch("header truncated")
    raw_channels = []
    for _ in range(n_ch):
        raw_channels.append(_CHANNEL.unpack_from(data, pos))
        pos += _CHANNEL.size
    lossy_len, digest, crc = _TAIL.unpack_from(data, pos)
    crc_pos = pos + 12
    pos += _TAIL.size
    declared = lossy_len + sum(m + l for _, _, m, l in raw_channels)
    if declared != len(data) - pos:
        raise LengthMismatch(f"substreams declare {declared} bytes, file holds {len(data) - pos}")
    if zlib.crc32(data[pos:], zlib.crc32(data[:crc_pos])) != crc:
        raise CrcMismatch("container checksum mismatch")

    if n_ch not in (1, 3):
        raise InvalidHeader(f"unsupported channel count {n_ch}")
    if width < 1 or height < 1 or width * height > MAX_PIXELS:
        raise InvalidHeader(f"unsupported dimensions {width}x{height}")
    try:
        backend = LossyBackend.from_code(kind, param)
        if sched >= len(SCHEDULERS) or not math.isfinite(beta):
            raise InvalidHeader("bad scheduler or beta")
        schedule = MaskSchedule(SCHEDULERS[sched], T, beta, seed)
        params = EstimatorParams.from_bytes(blob)
    except InvalidHeader:
        raise
    except (CodecError, ValueError) as exc:
        raise InvalidHeader(str(exc)) from exc

    # streams too short for the declared size would only fail after large allocations
    if 8 * lossy_len < min_substream_bits(backend, width, height, n_ch):
        raise InvalidHeader("lossy substream too short for the declared dimensions")
    if any(8 * lsb_len < min_code_bits(width * height, ALPHABET) for _, _, _, lsb_len in raw_channels):
        raise InvalidHeader("LSB substream too short for the declared dimensions")

    lossy = data[pos : pos + lossy_len]
    pos += lossy_len
    channels = []
    for r_min, flag, msb_len, lsb_len in raw_channels:
        if flag not in (0, 1) or (flag == 0 and msb_len) or not -255 <= r_min <= 255:
            raise InvalidHeader("bad channel record")
        msb = data[pos : pos + msb_len]
        pos += msb_len
        lsb = data[pos : pos + lsb_len]
        pos += lsb_len
        channels.append(ChannelStreams(r_min, flag, lsb, msb))
    return Container(width, height, backend, schedule, params, lossy, channels, digest)
