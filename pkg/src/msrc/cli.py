"""Command line front end: ``msrc {encode,decode,inspect,bench,fit,generate}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench
from .codec import decode_image, encode_image
from .container import read_container
from .errors import CodecError
from .estimator import DEFAULT_PARAMS, EstimatorParams, describe
from .fitting import fit_params
from .lossy import BACKEND_KINDS, LossyBackend
from .pixio import SYNTHETIC_KINDS, generate_synthetic, read_image_file, write_image_file
from .sampler import SCHEDULERS, MaskSchedule


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _load_params(path: str | None) -> EstimatorParams:
    return EstimatorParams.from_bytes(Path(path).read_bytes()) if path else DEFAULT_PARAMS


def _backend(args) -> LossyBackend:
    return LossyBackend(args.lossy, args.q if args.lossy == "quantize" else 0)


def _add_backend_flags(p):
    p.add_argument("--lossy", choices=BACKEND_KINDS, default="quantize")
    p.add_argument("--q", type=int, default=16, help="quantizer step for --lossy quantize")


def cmd_encode(args) -> int:
    img = read_image_file(args.input)
    schedule = MaskSchedule(args.scheduler, args.T, args.beta, args.seed)
    result = encode_image(img, schedule, _backend(args), _load_params(args.params), fit_steps=args.fit_steps)
    Path(args.output).write_bytes(result.data)
    print(f"{args.output}: {len(result.data)} bytes, {result.total_bpp:.4f} bpp")
    print(
        f"  lossy {result.lossy_bpp:.4f}  msb {result.msb_bpp:.4f}  lsb {result.lsb_bpp:.4f}  "
        f"header {result.header_bpp:.4f} bpp"
    )
    return 0


def cmd_decode(args) -> int:
    img = decode_image(Path(args.input).read_bytes())
    write_image_file(args.output, img)
    print(f"{args.output}: {img.width}x{img.height}x{img.channels}")
    return 0


def cmd_inspect(args) -> int:
    data = Path(args.input).read_bytes()
    c = read_container(data)
    pixels = c.width * c.height
    fields = {
        "size_bytes": len(data),
        "width": c.width,
        "height": c.height,
        "channels": len(c.channels),
        "backend": str(c.backend),
        "scheduler": c.schedule.scheduler,
        "T": c.schedule.T,
        "beta": c.schedule.beta,
        "seed": c.schedule.seed,
        "pmf_digest": f"{c.pmf_digest:016x}",
        "header_bytes": c.header_size,
        "lossy_bytes": len(c.lossy),
        "total_bpp": f"{8 * len(data) / pixels:.6f}",
        "lossy_bpp": f"{8 * len(c.lossy) / pixels:.6f}",
        "header_bpp": f"{8 * c.header_size / pixels:.6f}",
    }
    for i, ch in enumerate(c.channels):
        fields[f"ch{i}.r_min"] = ch.r_min
        fields[f"ch{i}.flag"] = ch.flag
        fields[f"ch{i}.msb_bytes"] = len(ch.msb)
        fields[f"ch{i}.lsb_bytes"] = len(ch.lsb)
        fields[f"ch{i}.lsb_bpp"] = f"{8 * len(ch.lsb) / pixels:.6f}"
    if args.machine:
        for key, value in fields.items():
            print(f"{key}={value}")
    else:
        width = max(len(k) for k in fields)
        for key, value in fields.items():
            print(f"{key:<{width}}  {value}")
        print(f"{'params':<{width}}  {describe(c.params)}")
    return 0


def cmd_bench(args) -> int:
    images = bench.load_corpus(args.corpus)
    if not images:
        print(f"no PGM/PPM files in {args.corpus}", file=sys.stderr)
        return 1
    for s in args.schedulers:
        if s not in SCHEDULERS:
            print(f"unknown scheduler {s!r}", file=sys.stderr)
            return 1
    try:
        records = bench.run_grid(
            images, args.T_sweep, args.schedulers, args.seeds, _backend(args), args.beta, _load_params(args.params)
        )
    except bench.CellFailure as exc:
        print(f"FAIL {exc}", file=sys.stderr)
        return 1
    bench.write_csv(args.csv, records)
    for r in records:
        print(f"{r.image:<24} {r.scheduler:<7} T={r.T:<3} seed={r.seed:<6} {r.total_bpp:8.4f} bpp  lsb {r.lsb_bpp:7.4f}  enc {r.encode_ms:8.1f} ms  dec {r.decode_ms:8.1f} ms")
    print(f"{len(records)} cells verified lossless -> {args.csv}")
    return 0


def cmd_fit(args) -> int:
    images = bench.load_corpus(args.corpus)
    backend = _backend(args)
    result = fit_params([(img, backend) for _, img in images], _load_params(args.init), args.iters, args.seed)
    Path(args.out).write_bytes(result.params.to_bytes())
    print(f"initial masked cross-entropy {result.initial:.6f} bits/symbol")
    print(f"final masked cross-entropy   {result.final:.6f} bits/symbol ({100 * result.improvement:.2f}% lower)")
    print(f"held-out {result.heldout_initial:.6f} -> {result.heldout_final:.6f}")
    print(f"wrote {args.out}")
    return 0


def cmd_generate(args) -> int:
    img = generate_synthetic(args.kind, args.width, args.height, args.channels, args.seed)
    write_image_file(args.output, img)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="msrc", description="Lossless image codec: lossy layer + iteratively masked residual coding.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="compress a PGM/PPM file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--T", type=_positive, default=12)
    p.add_argument("--beta", type=float, default=10.5)
    p.add_argument("--scheduler", choices=SCHEDULERS, default="cosine")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--params", help="estimator parameter file (MSRPARAM)")
    p.add_argument("--fit-steps", type=int, default=0, help="adapt the parameters to the image before coding")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decompress to PGM/PPM")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("inspect", help="print container fields")
    p.add_argument("--input", required=True)
    p.add_argument("--machine", action="store_true", help="key=value lines")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("bench", help="run an encode/decode grid and write a CSV")
    p.add_argument("--corpus", required=True)
    p.add_argument("--T-sweep", dest="T_sweep", type=_int_list, default=[1, 2, 5, 8, 12])
    p.add_argument("--schedulers", type=_str_list, default=list(SCHEDULERS))
    p.add_argument("--seeds", type=_int_list, default=[42])
    p.add_argument("--csv", required=True)
    p.add_argument("--beta", type=float, default=10.5)
    p.add_argument("--params")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fit", help="fit estimator parameters on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iters", type=_positive, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", help="starting parameter file (defaults if omitted)")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("generate", help="write a synthetic test image")
    p.add_argument("--kind", choices=SYNTHETIC_KINDS, required=True)
    p.add_argument("--width", type=_positive, required=True)
    p.add_argument("--height", type=_positive, required=True)
    p.add_argument("--channels", type=int, choices=(1, 3), default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CodecError, ValueError, OSError) as exc:
        print(f"msrc {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
