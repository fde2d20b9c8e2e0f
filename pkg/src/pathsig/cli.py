"""Command-line front end: ``pathsig {sig,logsig,query,gradcheck,bench,basis-info}``.

Input files are CSV (rows are time steps, columns channels; ``--header``
skips the first row) or JSON ``{"streams": [[[x, ...], ...], ...]}``.
Results are JSON with floats written to 17 significant digits.

Exit codes: 0 success, 1 check failure, 2 usage error, 3 bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import bench as bench_mod
from .backward import signature_backward
from .gradcheck import GRAD_TOL, gradient_check
from .logsignature import LOGSIG_MODES, logsignature, logsignature_backward
from .lyndon import basis_index, witt_dimension
from .path import PathIndex
from .signature import PARALLELISM, signature
from .tensor_algebra import FreeTensor, TruncationSpec

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_INPUT = 0, 1, 2, 3

SIG_LAYOUT = "level-major word-lex"
LOGSIG_LAYOUTS = {
    "expanded": SIG_LAYOUT,
    "words": "lyndon words (length, lex)",
    "brackets": "lyndon brackets (length, lex)",
}


class InputError(Exception):
    """Malformed or unusable input file."""


# --------------------------------------------------------------------------
# I/O
# --------------------------------------------------------------------------


def read_streams(path: str, header: bool = False) -> np.ndarray:
    """Load a CSV or JSON stream file as a ``(b, L, d)`` array."""
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if path.endswith(".json") or text.lstrip().startswith("{"):
        try:
            obj = json.loads(text)
            streams = obj["streams"]
        except (ValueError, KeyError, TypeError) as exc:
            raise InputError(f"{path}: expected JSON object with a 'streams' key") from exc
    else:
        rows = [r for r in csv.reader(text.splitlines()) if r and any(c.strip() for c in r)]
        if header:
            rows = rows[1:]
        try:
            streams = [[[float(c) for c in r] for r in rows]]
        except ValueError as exc:
            raise InputError(f"{path}: non-numeric CSV entry ({exc})") from exc
    try:
        arr = np.array(streams, dtype=np.float64)
    except (ValueError, TypeError) as exc:
        raise InputError(f"{path}: streams are not rectangular") from exc
    if arr.ndim != 3 or arr.shape[1] == 0 or arr.shape[2] == 0:
        raise InputError(f"{path}: expected a batch of L x d streams, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InputError(f"{path}: non-finite values")
    return arr


def _fmt(x) -> str:
    if isinstance(x, float):
        if not np.isfinite(x):
            raise ValueError("cannot serialise non-finite float to JSON")
        return format(x, ".17g")
    return json.dumps(x)


def dumps(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if isinstance(obj, np.generic):
        return dumps(obj.item())
    return _fmt(obj)


def _emit(obj, output):
    text = dumps(obj)
    if output:
        with open(output, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _read_initial(path: str, spec: TruncationSpec) -> FreeTensor:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read initial tensor from {path}: {exc}") from exc
    data = obj.get("data", obj) if isinstance(obj, dict) else obj
    arr = np.asarray(data, dtype=np.float64)
    if arr.shape[-1:] != (spec.size,):
        raise InputError(f"initial tensor must have trailing length {spec.size}, got shape {arr.shape}")
    if arr.ndim == 2 and arr.shape[0] == 1:
        arr = arr[0]
    return FreeTensor(spec, arr)


def _basepoint(values):
    if values is None:
        return False
    if len(values) == 0:
        return True
    return np.asarray(values, dtype=np.float64)


def _transform_options(args, channels):
    spec = TruncationSpec(channels, args.depth)
    basepoint = _basepoint(args.basepoint)
    if basepoint is not False and basepoint is not True and basepoint.shape != (channels,):
        raise InputError(f"--basepoint needs {channels} values, got {basepoint.size}")
    initial = _read_initial(args.initial, spec) if args.initial else None
    return dict(
        stream=args.stream,
        basepoint=basepoint,
        initial=initial,
        inverse=args.inverse,
        parallelism=args.parallel,
    )


def _check_length(streams, basepoint_flag):
    minimum = 1 if basepoint_flag is not None else 2
    if streams.shape[1] < minimum:
        raise InputError(f"streams of length {streams.shape[1]} are too short (need {minimum})")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_sig(args) -> int:
    streams = read_streams(args.input, args.header)
    _check_length(streams, args.basepoint)
    out = signature(streams, args.depth, **_transform_options(args, streams.shape[2]))
    _emit({"shape": list(out.data.shape), "layout": SIG_LAYOUT, "data": out.data}, args.output)
    return EXIT_OK


def cmd_logsig(args) -> int:
    streams = read_streams(args.input, args.header)
    _check_length(streams, args.basepoint)
    out = logsignature(streams, args.depth, args.mode, **_transform_options(args, streams.shape[2]))
    _emit({"shape": list(out.shape), "layout": LOGSIG_LAYOUTS[args.mode], "mode": args.mode, "data": out}, args.output)
    return EXIT_OK


def cmd_query(args) -> int:
    streams = read_streams(args.input, args.header)
    if streams.shape[0] != 1:
        raise InputError("query takes a single stream")
    if streams.shape[1] < 2:
        raise InputError("query needs a stream of at least 2 points")
    index = PathIndex(streams[0], args.depth)
    start, end = args.interval
    try:
        if args.log:
            data = index.query_logsignature(start, end, args.mode)
            layout = LOGSIG_LAYOUTS[args.mode]
        else:
            data = index.query_signature(start, end).data
            layout = SIG_LAYOUT
    except (IndexError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _emit({"interval": [start, end], "shape": list(data.shape), "layout": layout, "data": data}, args.output)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    backward = logsignature_backward if args.logsig else signature_backward
    err = gradient_check(
        args.channels,
        args.depth,
        args.length,
        args.seed,
        logsig=args.logsig,
        mode=args.mode,
        backward=backward,
    )
    passed = err <= GRAD_TOL
    what = f"logsignature[{args.mode}]" if args.logsig else "signature"
    print(
        f"gradcheck {what} d={args.channels} N={args.depth} L={args.length} seed={args.seed}: "
        f"max relative error {err:.3e} (tol {GRAD_TOL:g}) {'PASS' if passed else 'FAIL'}"
    )
    return EXIT_OK if passed else EXIT_CHECK


def _parse_range(text: str) -> range:
    try:
        lo, _, hi = text.partition("..")
        lo, hi = int(lo), int(hi or lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a range like 2..7, got {text!r}") from None
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"invalid range {text!r}")
    return range(lo, hi + 1)


def cmd_bench(args) -> int:
    if args.depth_range is not None:
        cases = [(args.channels, n) for n in args.depth_range]
    else:
        channels = args.channels_range if args.channels_range is not None else range(2, 8)
        cases = [(d, args.depth) for d in channels]
    rows = []
    for d, n in cases:
        rows.extend(
            bench_mod.run_case(d, n, length=args.length, batch=args.batch, repeats=args.repeats, seed=args.seed)
        )
    header = f"{'d':>3} {'N':>3} {'L':>5} {'b':>4} {'strategy':<15} {'seconds':>12} {'mults/step':>12} {'C(d,N)':>12} {'F(d,N)':>12} {'C/F':>7}"
    print(header)
    for r in rows:
        secs = f"{r.seconds:12.6f}" if r.seconds is not None else f"{'UNVERIFIED':>12}"
        print(
            f"{r.channels:>3} {r.depth:>3} {r.length:>5} {r.batch:>4} {r.strategy:<15} {secs} "
            f"{r.mults_per_step:>12} {r.conventional_formula:>12} {r.fused_formula:>12} {r.formula_ratio:>7.3f}"
        )
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(dumps({"repeats": args.repeats, "rows": [r.as_dict() for r in rows]}) + "\n")
    return EXIT_OK if all(r.verified for r in rows) else EXIT_CHECK


def cmd_basis_info(args) -> int:
    spec = TruncationSpec(args.channels, args.depth)
    index = basis_index(spec)
    w = witt_dimension(spec)
    if args.json:
        words = [[c - 1 for c in word] for word in index.words]
        _emit({"channels": spec.channels, "depth": spec.depth, "witt_dimension": w,
               "words": words, "offsets": index.offsets.tolist()}, None)
        return EXIT_OK
    print(f"channels={spec.channels} depth={spec.depth} signature_length={spec.size} witt_dimension={w}")
    print(f"{'#':>5} {'offset':>8}  word (0-based channels)")
    for i, (word, off) in enumerate(zip(index.words, index.offsets)):
        print(f"{i:>5} {int(off):>8}  {','.join(str(c - 1) for c in word)}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def _positive(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _add_transform_args(p):
    p.add_argument("input", help="CSV or JSON stream file")
    p.add_argument("--depth", "-N", type=_positive, required=True)
    p.add_argument("--header", action="store_true", help="skip the first CSV row")
    p.add_argument("--stream", action="store_true", help="emit expanding-prefix results")
    p.add_argument("--basepoint", nargs="*", type=float, default=None, metavar="V",
                   help="prepend the origin, or the given point")
    p.add_argument("--inverse", action="store_true")
    p.add_argument("--initial", metavar="FILE", help="JSON flat vector left-multiplying the result")
    p.add_argument("--parallel", choices=PARALLELISM, default="serial")
    p.add_argument("--output", "-o", help="write JSON here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathsig", description="Signature and logsignature transforms.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sig", help="signature transform")
    _add_transform_args(p)
    p.set_defaults(func=cmd_sig)

    p = sub.add_parser("logsig", help="logsignature transform")
    _add_transform_args(p)
    p.add_argument("--mode", choices=LOGSIG_MODES, default="words")
    p.set_defaults(func=cmd_logsig)

    p = sub.add_parser("query", help="interval query through a precomputed path index")
    p.add_argument("input")
    p.add_argument("--depth", "-N", type=_positive, required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--interval", nargs=2, type=int, required=True, metavar=("I", "J"),
                   help="0-based, both ends inclusive")
    p.add_argument("--log", action="store_true", help="query the logsignature")
    p.add_argument("--mode", choices=LOGSIG_MODES, default="words")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("gradcheck", help="compare backward against finite differences")
    p.add_argument("--channels", "-d", type=_positive, required=True)
    p.add_argument("--depth", "-N", type=_positive, required=True)
    p.add_argument("--length", "-L", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--logsig", action="store_true")
    p.add_argument("--mode", choices=LOGSIG_MODES, default="words")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench", help="time naive vs fused reductions")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--channels-range", type=_parse_range, metavar="A..B")
    group.add_argument("--depth-range", type=_parse_range, metavar="A..B")
    p.add_argument("--channels", type=_positive, default=4, help="fixed channels for --depth-range")
    p.add_argument("--depth", type=_positive, default=7, help="fixed depth for --channels-range")
    p.add_argument("--length", type=_positive, default=128)
    p.add_argument("--batch", type=_positive, default=32)
    p.add_argument("--repeats", type=_positive, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", metavar="FILE", help="also write rows as JSON")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("basis-info", help="list the Lyndon basis")
    p.add_argument("--channels", "-d", type=_positive, required=True)
    p.add_argument("--depth", "-N", type=_positive, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_basis_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "command", None) == "gradcheck" and args.length < 2:
        print("error: --length must be >= 2", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
