"""Benchmark grid: encode, decode, verify and record one CSV row per (image, config)."""

from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable

from .codec import EncodeResult, decode_image, encode_image
from .estimator import EstimatorParams
from .lossy import LossyBackend
from .pixio import Image, read_image_file
from .sampler import IterationTrace, MaskSchedule

IMAGE_SUFFIXES = (".pgm", ".ppm")


class CellFailure(RuntimeError):
    pass


@dataclass
class BenchRecord:
    image: str
    width: int
    height: int
    channels: int
    scheduler: str
    T: int
    beta: float
    seed: int
    backend: str
    total_bpp: float
    lossy_bpp: float
    msb_bpp: float
    lsb_bpp: float
    header_bpp: float
    iter_bpsp: str
    encode_ms: float
    decode_ms: float

    @property
    def bpsp(self) -> list[float]:
        return [float(x) for x in self.iter_bpsp.split(";")] if self.iter_bpsp else []


def pooled_bpsp(traces: list[IterationTrace]) -> list[float]:
    """Per-iteration bits over symbols coded at that iteration, pooled across channels."""
    out = []
    for t in range(len(traces[0].bits)):
        bits = sum(tr.bits[t] for tr in traces)
        coded = sum(tr.coded[t] for tr in traces)
        out.append(bits / coded if coded else 0.0)
    return out


def run_cell(name: str, img: Image, schedule: MaskSchedule, backend: LossyBackend, params: EstimatorParams | None = None) -> tuple[BenchRecord, EncodeResult]:
    t0 = time.perf_counter()
    result = encode_image(img, schedule, backend, params)
    t1 = time.perf_counter()
    decoded = decode_image(result.data)
    t2 = time.perf_counter()
    if decoded != img:
        raise CellFailure(f"round trip mismatch: image={name} scheduler={schedule.scheduler} T={schedule.T} seed={schedule.seed} backend={backend}")
    record = BenchRecord(
        image=name, width=img.width, height=img.height, channels=img.channels,
        scheduler=schedule.scheduler, T=schedule.T, beta=schedule.beta, seed=schedule.seed, backend=str(backend),
        total_bpp=result.total_bpp, lossy_bpp=result.lossy_bpp, msb_bpp=result.msb_bpp,
        lsb_bpp=result.lsb_bpp, header_bpp=result.header_bpp,
        iter_bpsp=";".join(f"{x:.6f}" for x in pooled_bpsp(result.traces)),
        encode_ms=1000 * (t1 - t0), decode_ms=1000 * (t2 - t1),
    )
    return record, result


def load_corpus(directory: str | Path) -> list[tuple[str, Image]]:
    paths = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    return [(p.name, read_image_file(p)) for p in paths]


def run_grid(
    images: Iterable[tuple[str, Image]],
    t_values: Iterable[int],
    schedulers: Iterable[str],
    seeds: Iterable[int] = (42,),
    backend: LossyBackend | None = None,
    beta: float = 10.5,
    params: EstimatorParams | None = None,
) -> list[BenchRecord]:
    backend = backend or LossyBackend()
    records = []
    for name, img in images:
        for scheduler in schedulers:
            for T in t_values:
                for seed in seeds:
                    record, _ = run_cell(name, img, MaskSchedule(scheduler, T, beta, seed), backend, params)
                    records.append(record)
    return records


def write_csv(path: str | Path, records: list[BenchRecord]) -> None:
    names = [f.name for f in fields(BenchRecord)]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=names)
        writer.writeheader()
        for r in records:
            writer.writerow(asdict(r))


def read_csv(path: str | Path) -> list[BenchRecord]:
    types = {f.name: f.type for f in fields(BenchRecord)}
    casts = {"int": int, "float": float, "str": str}
    with open(path, newline="") as fh:
        return [BenchRecord(**{k: casts[types[k]](v) for k, v in row.items()}) for row in csv.DictReader(fh)]
