"""Carry-less 64-bit range coder over 16-bit frequency tables.

Every table handed to the coder totals exactly ``1 << 16`` and has no zero
entries, so the per-symbol division reduces to a shift. Only integer
arithmetic is used here.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from typing import Iterable, Sequence

import numpy as np

from .errors import StreamExhausted, SymbolOutOfAlphabet

PROB_BITS = 16
PROB_TOTAL = 1 << PROB_BITS
MASK64 = (1 << 64) - 1
TOP = 1 << 56
BOT = 1 << 48

O0_INCREMENT = 32
O0_LIMIT = 60000
O0_MAX_ALPHABET = 256


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = MASK64
        self.out = bytearray()

    def encode(self, start: int, freq: int) -> None:
        r = self.range >> PROB_BITS
        low = self.low + start * r
        rng = r * freq
        out = self.out
        while True:
            if (low ^ (low + rng)) < TOP:
                pass
            elif rng < BOT:
                rng = -low & (BOT - 1)
            else:
                break
            out.append(low >> 56)
            low = (low << 8) & MASK64
            rng = (rng << 8) & MASK64
        self.low = low
        self.range = rng

    def finish(self) -> bytes:
        low = self.low
        for _ in range(8):
            self.out.append(low >> 56)
            low = (low << 8) & MASK64
        self.low = low
        return bytes(self.out)


class RangeDecoder:
    """Mirror of :class:`RangeEncoder`. Reads past the end raise ``StreamExhausted``."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.low = 0
        self.range = MASK64
        if len(data) < 8:
            raise StreamExhausted("stream shorter than the 8-byte preamble")
        self.code = int.from_bytes(data[:8], "big")
        self.pos = 8

    def target(self) -> int:
        """Scaled position of the code value inside the current range, in [0, 65535]."""
        t = ((self.code - self.low) & MASK64) // (self.range >> PROB_BITS)
        return t if t < PROB_TOTAL else PROB_TOTAL - 1

    def consume(self, start: int, freq: int) -> None:
        r = self.range >> PROB_BITS
        low = self.low + start * r
        rng = r * freq
        code = self.code
        data = self.data
        pos = self.pos
        while True:
            if (low ^ (low + rng)) < TOP:
                pass
            elif rng < BOT:
                rng = -low & (BOT - 1)
            else:
                break
            if pos >= len(data):
                raise StreamExhausted("range decoder ran past the end of the stream")
            code = ((code << 8) | data[pos]) & MASK64
            pos += 1
            low = (low << 8) & MASK64
            rng = (rng << 8) & MASK64
        self.low = low
        self.range = rng
        self.code = code
        self.pos = pos

    def decode(self, cum: Sequence[int]) -> int:
        """Decode one symbol given a cumulative table ``cum`` (len alphabet+1, cum[-1] == 65536)."""
        s = bisect_right(cum, self.target()) - 1
        self.consume(cum[s], cum[s + 1] - cum[s])
        return s


def cumulative(table: Sequence[int]) -> list[int]:
    cum = [0]
    acc = 0
    for f in table:
        acc += int(f)
        cum.append(acc)
    if acc != PROB_TOTAL:
        raise ValueError(f"frequency table totals {acc}, expected {PROB_TOTAL}")
    return cum


def ac_encode(symbols: Sequence[int], tables: Sequence[Sequence[int]]) -> bytes:
    """Code ``symbols[i]`` against ``tables[i]``."""
    if len(symbols) != len(tables):
        raise ValueError("symbols and tables differ in length")
    enc = RangeEncoder()
    for sym, table in zip(symbols, tables):
        sym = int(sym)
        if not 0 <= sym < len(table):
            raise SymbolOutOfAlphabet(f"symbol {sym} outside alphabet of size {len(table)}")
        cum = cumulative(table)
        enc.encode(cum[sym], cum[sym + 1] - cum[sym])
    return enc.finish()


def ac_decode(stream: bytes, tables: Iterable[Sequence[int]], out: list[int] | None = None) -> list[int]:
    """Decode one symbol per table.

    ``tables`` is consumed lazily, one table per symbol, so it may be a
    generator whose next table depends on the symbols already appended to
    ``out`` (returned, and created if not given).
    """
    dec = RangeDecoder(stream)
    out = [] if out is None else out
    for table in tables:
        out.append(dec.decode(cumulative(table)))
    return out


def ideal_bits(freqs: np.ndarray) -> float:
    """Self-information in bits of coding symbols with the given frequencies."""
    freqs = np.asarray(freqs, dtype=np.float64)
    return float(np.sum(PROB_BITS - np.log2(freqs))) if freqs.size else 0.0


def min_code_bits(count: int, alphabet_size: int) -> float:
    """Fewest bits any ``count`` symbols can cost when every bin holds frequency >= 1.

    The coder never emits fewer bits than the self-information, so a stream
    shorter than this cannot hold ``count`` symbols.
    """
    top = PROB_TOTAL - (alphabet_size - 1)
    return count * (PROB_BITS - math.log2(top))


class AdaptiveModel:
    """Order-0 counts shared in lockstep by encoder and decoder.

    Counts start at 1, grow by 32 per coded symbol and are halved (floor 1)
    once their total passes 60000. Before each symbol the counts are rescaled
    to a 65536-total table: ``max(1, c * 65536 // total)`` with the rounding
    surplus folded into the largest bin (lowest index on ties).
    """

    def __init__(self, alphabet_size: int):
        if not 1 <= alphabet_size <= O0_MAX_ALPHABET:
            raise ValueError(f"alphabet size must be in [1, {O0_MAX_ALPHABET}], got {alphabet_size}")
        self.counts = np.ones(alphabet_size, dtype=np.int64)
        self.total = alphabet_size

    def table(self) -> np.ndarray:
        scaled = np.maximum(1, self.counts * PROB_TOTAL // self.total)
        scaled[int(np.argmax(scaled))] += PROB_TOTAL - int(scaled.sum())
        return scaled

    def update(self, sym: int) -> None:
        self.counts[sym] += O0_INCREMENT
        self.total += O0_INCREMENT
        if self.total > O0_LIMIT:
            self.counts = np.maximum(1, self.counts >> 1)
            self.total = int(self.counts.sum())


def adaptive_o0_encode(symbols: Sequence[int], alphabet_size: int) -> bytes:
    model = AdaptiveModel(alphabet_size)
    enc = RangeEncoder()
    for sym in symbols:
        sym = int(sym)
        if not 0 <= sym < alphabet_size:
            raise SymbolOutOfAlphabet(f"symbol {sym} outside alphabet of size {alphabet_size}")
        table = model.table()
        enc.encode(int(table[:sym].sum()), int(table[sym]))
        model.update(sym)
    return enc.finish()


def adaptive_o0_decode(stream: bytes, count: int, alphabet_size: int) -> list[int]:
    model = AdaptiveModel(alphabet_size)
    dec = RangeDecoder(stream)
    out = []
    for _ in range(count):
        cum = np.cumsum(model.table())
        sym = int(np.searchsorted(cum, dec.target(), side="right"))
        start = int(cum[sym - 1]) if sym else 0
        dec.consume(start, int(cum[sym]) - start)
        model.update(sym)
        out.append(sym)
    return out
