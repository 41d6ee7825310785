"""Command-line entry point: ``gea fit|apply|analyze|register|benchmark``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical/degeneracy error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .anchoring import AnchorMatrix, Family, apply_anchor, diagnostics, fit_anchor, fit_residual
from .benchmark import (BenchmarkConfig, ReportInvariantError, analyze_pair, discover_pairs,
                        report_csv, run_benchmark)
from .errors import (DegenerateFitError, DegenerateInputError, EmptyRegionError, InvalidInputError)
from .imgcore import check_same_shape
from .io import load_image, save_image
from .registration import DEFAULT_EPS, DEFAULT_MARGIN, DEFAULT_MAX_ITERS, register_pair
from .serialize import SerializationError, format_float, read_json, write_json
from .wavelet import DEFAULT_GAMMA_L

log = logging.getLogger("gea")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

FALLBACK = {
    Family.AFFINE12: "diagbias",
    Family.LINEAR9: "diagbias",
    Family.DIAG_BIAS: "scalar",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _family_list(text: str) -> list[Family]:
    try:
        return [Family.parse(t) for t in text.split(",") if t.strip()]
    except InvalidInputError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _load_pair(low_path, gt_path):
    low = load_image(low_path)
    gt = load_image(gt_path)
    check_same_shape(low, gt, names=("low", "gt"))
    return low, gt


def _degenerate_hint(exc: DegenerateFitError) -> str:
    fam = Family.parse(exc.family)
    alt = FALLBACK.get(fam)
    return f"{exc}; try --family {alt}" if alt else str(exc)


def cmd_fit(args) -> int:
    low, gt = _load_pair(args.low, args.gt)
    m = fit_anchor(low, gt, args.family)
    write_json(args.out, m.to_dict())
    print(f"family: {m.family.value}")
    print(f"fit_residual: {format_float(fit_residual(m, low, gt))}")
    for k, v in diagnostics(m, low).to_dict().items():
        print(f"{k}: {format_float(v) if isinstance(v, float) else str(v).lower()}")
    return EXIT_OK


def cmd_apply(args) -> int:
    low = load_image(args.low)
    try:
        m = AnchorMatrix.from_dict(read_json(args.matrix))
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"cannot read matrix {args.matrix}: {exc}") from None
    out = apply_anchor(m, low)
    outside = int(np.count_nonzero(np.any((out < 0) | (out > 1), axis=-1)))
    raw = Path(args.out).suffix.lower() == ".npy"
    if outside and not args.clamp:
        what = "written unclamped" if raw else "clipped to [0,1] for 8-bit export"
        log.warning("%d pixels out of range, %s", outside, what)
    if args.clamp:
        out = np.clip(out, 0.0, 1.0)
    if raw:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        np.save(args.out, out)
    else:
        save_image(args.out, out)
    print(f"out_of_range_pixels: {outside}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    low, gt = _load_pair(args.low, args.gt)
    result = analyze_pair(low, gt, args.family, args.gamma_l, args.bins,
                          (args.range[0], args.range[1]))
    write_json(args.out, result)
    print(f"luminance_error_ratio: {format_float(result['luminance_error_ratio'])}")
    print(f"f_lum pre/post: {format_float(result['energy_pre']['f_lum'])} "
          f"{format_float(result['energy_post']['f_lum'])}")
    print(f"psnr pre/post: {format_float(result['score_pre']['psnr_db'])} "
          f"{format_float(result['score_post']['psnr_db'])}")
    return EXIT_OK


def cmd_register(args) -> int:
    low, gt = _load_pair(args.low, args.gt)
    reg = register_pair(low, gt, margin=args.margin, model=args.model,
                        max_iters=args.max_iters, eps=args.eps)
    out_dir = Path(args.out_dir)
    save_image(out_dir / "low.png", reg.low)
    save_image(out_dir / "gt.png", reg.gt)
    write_json(out_dir / "warp.json", {
        "warp": reg.warp.to_dict(),
        "crop": reg.crop.to_dict(),
        "final_ecc": reg.ecc.final_ecc,
        "iterations": reg.ecc.iterations,
        "converged": reg.ecc.converged,
    })
    print(f"final_ecc: {format_float(reg.ecc.final_ecc)}")
    print(f"iterations: {reg.ecc.iterations}")
    print("crop: " + " ".join(str(v) for v in reg.crop.as_tuple()))
    if not reg.ecc.converged:
        log.error("ECC did not converge; best-seen warp written to %s", out_dir / "warp.json")
        return EXIT_NUMERIC
    return EXIT_OK


def _threads(value) -> int:
    if value is None:
        env = os.environ.get("GEA_THREADS")
        if env:
            try:
                value = int(env)
            except ValueError:
                raise UsageError(f"GEA_THREADS must be an integer, got {env!r}") from None
        else:
            value = os.cpu_count() or 1
    if value < 1:
        raise UsageError("thread count must be >= 1")
    return value


def cmd_benchmark(args) -> int:
    threads = _threads(args.threads)
    config = BenchmarkConfig(families=tuple(args.families), register=args.register,
                             gamma_l=args.gamma_l, margin=args.margin, model=args.model)
    records, dup = discover_pairs(args.dataset_dir, args.manifest)
    report = run_benchmark(records, config, threads, discovery_skipped=dup)
    out = Path(args.out)
    csv_path = Path(args.csv) if args.csv else out.with_suffix(".csv")
    write_json(out, report)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(report_csv(report))
    c = report["counts"]
    print(f"pairs: {c['rows']} evaluated, {c['skipped']} skipped, {c['discovered']} discovered")
    if c["rows"] == 0:
        log.error("no usable pairs in %s", args.dataset_dir)
        return EXIT_DATA
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gea", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fams = ", ".join(f.value for f in Family)

    p = sub.add_parser("fit", help="fit the least-squares anchor matrix of a pair")
    p.add_argument("low")
    p.add_argument("gt")
    p.add_argument("-o", "--out", required=True, help="matrix JSON to write")
    p.add_argument("--family", type=Family.parse, default=Family.AFFINE12, help=fams)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("apply", help="apply an anchor matrix to an image")
    p.add_argument("low")
    p.add_argument("matrix", help="matrix JSON")
    p.add_argument("-o", "--out", required=True, help="output PNG (or .npy for float data)")
    p.add_argument("--clamp", action="store_true", help="clamp to [0,1] before writing")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("analyze", help="ideal-GEA energy analysis of a pair")
    p.add_argument("low")
    p.add_argument("gt")
    p.add_argument("-o", "--out", required=True, help="analysis JSON to write")
    p.add_argument("--family", type=Family.parse, default=Family.AFFINE12, help=fams)
    p.add_argument("--gamma-l", type=float, default=DEFAULT_GAMMA_L)
    p.add_argument("--bins", type=int, default=201)
    p.add_argument("--range", type=float, nargs=2, default=(-1.0, 1.0), metavar=("LO", "HI"))
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("register", help="ECC-register a pair and crop the shared valid region")
    p.add_argument("low")
    p.add_argument("gt")
    p.add_argument("out_dir")
    p.add_argument("--margin", type=int, default=DEFAULT_MARGIN)
    p.add_argument("--model", choices=["translation", "euclidean", "affine"], default="affine")
    p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("benchmark", help="ideal-GEA report over a dataset directory")
    p.add_argument("dataset_dir")
    p.add_argument("-o", "--out", required=True, help="report JSON to write")
    p.add_argument("--csv", help="report CSV (default: next to the JSON)")
    p.add_argument("--manifest", help="CSV with columns id,low,gt")
    p.add_argument("--families", type=_family_list, default=[Family.AFFINE12],
                   help=f"comma-separated subset of: {fams}")
    p.add_argument("--register", action="store_true", help="ECC-register each pair first")
    p.add_argument("--margin", type=int, default=DEFAULT_MARGIN)
    p.add_argument("--model", choices=["translation", "euclidean", "affine"], default="affine")
    p.add_argument("--gamma-l", type=float, default=DEFAULT_GAMMA_L)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $GEA_THREADS or CPU count)")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except DegenerateFitError as exc:
        log.error("%s", _degenerate_hint(exc))
        return EXIT_NUMERIC
    except (DegenerateInputError, EmptyRegionError, ReportInvariantError,
            SerializationError, FloatingPointError) as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except (InvalidInputError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
