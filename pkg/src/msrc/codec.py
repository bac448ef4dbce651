"""Whole-image encode/decode: lossy layer, residual split, per-channel masked sampling, container."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import ChannelStreams, Container, read_container, write_container
from .errors import CorruptSubstream
from .estimator import DEFAULT_PARAMS, EstimatorParams
from .fitting import adapt_to_image
from .lossy import LossyBackend, lossy_decode, lossy_encode, residual_compute
from .pixio import Image
from .residual import DecomposedResidual, decompose, recompose, rle_decode, rle_encode
from .sampler import IterationTrace, MaskSchedule, decode_channel, encode_channel


@dataclass
class EncodeResult:
    data: bytes
    container: Container
    traces: list[IterationTrace]

    @property
    def pixels(self) -> int:
        return self.container.width * self.container.height

    def bpp(self, nbytes: int) -> float:
        return 8.0 * nbytes / self.pixels

    @property
    def total_bpp(self) -> float:
        return self.bpp(len(self.data))

    @property
    def lossy_bpp(self) -> float:
        return self.bpp(len(self.container.lossy))

    @property
    def msb_bpp(self) -> float:
        return self.bpp(sum(len(ch.msb) for ch in self.container.channels))

    @property
    def lsb_bpp(self) -> float:
        return self.bpp(sum(len(ch.lsb) for ch in self.container.channels))

    @property
    def header_bpp(self) -> float:
        return self.bpp(self.container.header_size)


def encode_image(
    img: Image,
    schedule: MaskSchedule | None = None,
    backend: LossyBackend | None = None,
    params: EstimatorParams | None = None,
    fit_steps: int = 0,
) -> EncodeResult:
    """Encode ``img``; ``fit_steps > 0`` first adapts ``params`` to a crop of the image."""
    schedule = schedule or MaskSchedule()
    backend = backend or LossyBackend()
    params = params or DEFAULT_PARAMS
    if fit_steps > 0:
        params = adapt_to_image(img, backend, params, fit_steps, seed=schedule.seed)
    recon, lossy = lossy_encode(img, backend)
    residual = residual_compute(img, recon)
    parts = [decompose(r) for r in residual]
    channels = []
    traces = []
    prev = None
    for c, part in enumerate(parts):
        stream, trace = encode_channel(part.lsb, recon[c], prev, schedule, params, part.r_min, channel=c)
        msb = rle_encode(part.msb) if part.flag else b""
        channels.append(ChannelStreams(part.r_min, part.flag, stream, msb))
        traces.append(trace)
        prev = part.lsb
    container = Container(img.width, img.height, backend, schedule, params, lossy, channels, traces[0].pmf_digest)
    return EncodeResult(write_container(container), container, traces)


def decode_image(data: bytes) -> Image:
    c = read_container(data)
    recon = lossy_decode(c.backend, c.lossy, c.width, c.height, len(c.channels))
    planes = []
    prev = None
    for idx, ch in enumerate(c.channels):
        msb = rle_decode(ch.msb, c.width, c.height) if ch.flag else None
        lsb = decode_channel(
            ch.lsb, recon[idx], prev, c.schedule, c.params, ch.r_min, channel=idx,
            expected_digest=c.pmf_digest if idx == 0 else None,
        )
        plane = recon[idx] + recompose(DecomposedResidual(ch.r_min, ch.flag, lsb, msb))
        if plane.min() < 0 or plane.max() > 255:
            raise CorruptSubstream(f"channel {idx} decodes outside [0, 255]")
        planes.append(plane.astype(np.uint8))
        prev = lsb
    return Image(np.stack(planes))
