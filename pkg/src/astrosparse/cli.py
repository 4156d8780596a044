"""Command-line front end.

Exit codes: 0 success, 1 I/O or usage error, 2 a block did not converge,
3 chirp results outside the reference bands.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import time
from pathlib import Path


from . import blockcodec as bc
from .dictionary import parse_dict_spec
from .experiments import (
    corpus,
    default_method,
    failed_row,
    parse_method,
    run_cell,
    run_chirp,
    CHIRP_EPS_REL,
)
from .imageio import PGMFormatError, load_image, synth_starfield, write_pgm
from .metrics import REPORT_COLUMNS, mssim, psnr

EXIT_OK, EXIT_IO, EXIT_NOCONV, EXIT_BAND = 0, 1, 2, 3
TIMING_NOTE = "seconds: pursuit time only (dictionary construction and I/O excluded)"


def _err(msg: str) -> None:
    print(f"astrosparse: {msg}", file=sys.stderr)


def _write_report(rows, path: str | None, append: bool = False) -> None:
    if path is None or path == "-":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        w.writerows(rows)
        return
    p = Path(path)
    new = not (append and p.exists() and p.stat().st_size > 0)
    with open(p, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(REPORT_COLUMNS)
        w.writerows(rows)


def _dict_spec(args) -> str:
    spec = args.dict
    if spec == "rr":
        spec = f"rr:{args.seed}"
    parse_dict_spec(spec)
    return spec


def cmd_approximate(args) -> int:
    try:
        image = load_image(args.input)
    except (OSError, PGMFormatError) as exc:
        _err(f"cannot read {args.input}: {exc}")
        return EXIT_IO
    spec = _dict_spec(args)
    name = Path(args.input).stem
    out = Path(args.output) if args.output else Path(args.input).with_suffix(".spd")
    recon = Path(args.recon) if args.recon else out.with_suffix(".recon.pgm")
    if spec == "dct":
        method, p = "dct", 1
    elif args.method:
        method, p = args.method, args.p
    else:
        method, p = default_method(args.block)
    t0 = time.perf_counter()
    try:
        if method == "dct":
            dec = bc.dct_threshold(image, args.block, args.psnr)
        else:
            dec = bc.encode(image, spec, method, args.block, args.psnr,
                            eps=args.eps, p=p, threads=args.threads)
    except bc.ConvergenceError as exc:
        _err(str(exc))
        return EXIT_NOCONV
    seconds = time.perf_counter() - t0
    report = bc.quality_report(image, dec, seconds, name)
    if method == "spmp2d":
        report.method = f"spmp2d:{p}"
    try:
        out.write_bytes(bc.serialize(dec))
        write_pgm(recon, bc.decode(dec, clip=True))
        _write_report([report.row()], args.report, append=True)
    except OSError as exc:
        _err(f"cannot write output: {exc}")
        return EXIT_IO
    print(report.text(), file=sys.stderr)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    try:
        dec = bc.deserialize(Path(args.input).read_bytes())
        write_pgm(args.output, bc.decode(dec, clip=True))
    except (OSError, bc.FormatError) as exc:
        _err(str(exc))
        return EXIT_IO
    return EXIT_OK


def cmd_metrics(args) -> int:
    try:
        a = load_image(args.reference)
        b = load_image(args.other)
    except (OSError, PGMFormatError) as exc:
        _err(str(exc))
        return EXIT_IO
    if a.shape != b.shape:
        _err("images differ in size")
        return EXIT_IO
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["psnr_db", "mssim"])
    ms = mssim(a, b) if min(a.shape) >= 11 else float("nan")
    w.writerow([f"{psnr(a, b):.4f}", f"{ms:.6f}"])
    if args.decomposition:
        try:
            dec = bc.deserialize(Path(args.decomposition).read_bytes())
        except (OSError, bc.FormatError) as exc:
            _err(str(exc))
            return EXIT_IO
        print(f"sr,{dec.n_pixels / max(dec.total_atoms, 1):.4f}")
    return EXIT_OK


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def cmd_bench(args) -> int:
    images = []
    for path in args.images:
        try:
            images.append((Path(path).stem, load_image(path)))
        except (OSError, PGMFormatError) as exc:
            _err(f"cannot read {path}: {exc}")
            return EXIT_IO
    if args.synthetic:
        images.extend(corpus(args.synthetic, args.size, args.seed))
    if not images:
        _err("no input images (give paths or --synthetic N)")
        return EXIT_IO
    methods = [parse_method(m) for m in args.methods.split(",")]
    dicts = [d.strip() for d in args.dicts.split(",")]
    for d in dicts:
        parse_dict_spec(d)
    rows = []
    for name, image in images:
        for spec in dicts:
            for method, p in methods:
                for Nh in _int_list(args.blocks):
                    try:
                        rep = run_cell(image, name, spec, method, p, Nh, args.psnr,
                                       args.repeats, args.threads, args.eps)
                        rows.append(rep.row())
                    except (bc.ConvergenceError, ValueError) as exc:
                        _err(f"{name} {spec} {method} {Nh}: {exc}")
                        rows.append(failed_row(name, spec, method, p, Nh))
    print(f"# {TIMING_NOTE}", file=sys.stderr)
    try:
        _write_report(rows, args.csv)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    return EXIT_OK


def cmd_chirp(args) -> int:
    rows = run_chirp(args.rho_scale, args.eps_rel)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["config", "method", "M", "p", "K", "residual", "iterations",
                "seconds", "band", "pass"])
    for r in rows:
        band = "" if r.band is None else f"{r.band[0]}-{r.band[1]}"
        ok = "" if r.in_band is None else str(r.in_band).lower()
        w.writerow([r.config, r.method, r.M, r.p, r.K, f"{r.residual:.6g}",
                    r.iterations, f"{r.seconds:.3f}", band, ok])
    sys.stdout.write(buf.getvalue())
    if args.csv:
        try:
            Path(args.csv).write_text(buf.getvalue())
        except OSError as exc:
            _err(str(exc))
            return EXIT_IO
    if any(r.in_band is False for r in rows):
        return EXIT_BAND
    return EXIT_OK


def cmd_synth(args) -> int:
    img = synth_starfield(args.rows, args.cols, args.stars, args.seed)
    try:
        write_pgm(args.output, img)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="astrosparse",
        description="Sparse block approximation of grayscale astronomical images.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def coding_opts(p):
        p.add_argument("--dict", default="mixed",
                       help="mixed | rdc | rdw | rr[:seed] | dct (default mixed)")
        p.add_argument("--psnr", type=float, default=45.0, help="target PSNR in dB")
        p.add_argument("--eps", type=float, default=None,
                       help="spmp2d projection tolerance relative to the block norm "
                            "(default 1e-9)")
        p.add_argument("--seed", type=int, default=0, help="seed for --dict rr")
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("approximate", help="encode one image")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="decomposition file (default <input>.spd)")
    p.add_argument("--recon", help="reconstructed PGM path")
    p.add_argument("--report", help="CSV report (appended; default stdout)")
    p.add_argument("--block", type=int, default=16)
    p.add_argument("--method", choices=["mp2d", "omp2d", "spmp2d"], default=None,
                   help="default: omp2d for blocks <= 24, spmp2d above")
    p.add_argument("-p", type=int, default=1, help="spmp2d projection step")
    coding_opts(p)
    p.set_defaults(func=cmd_approximate)

    p = sub.add_parser("reconstruct", help="decode a decomposition file to PGM")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("metrics", help="PSNR/MSSIM between two images")
    p.add_argument("reference")
    p.add_argument("other")
    p.add_argument("--decomposition", help="also report SR of this file")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="SR/time table over block sizes")
    p.add_argument("images", nargs="*")
    p.add_argument("--synthetic", type=int, default=0,
                   help="add N synthetic star-fields")
    p.add_argument("--size", type=int, default=256, help="synthetic image side")
    p.add_argument("--blocks", default="8,16,24,32,40,48")
    p.add_argument("--methods", default="omp2d,spmp2d,spmp2d:10,mp2d,dct")
    p.add_argument("--dicts", default="mixed")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--csv", help="output CSV (default stdout)")
    p.add_argument("--psnr", type=float, default=45.0)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--seed", type=int, default=0, help="first synthetic seed")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("chirp", help="1D chirp experiment (MP/OMP/SPMP)")
    p.add_argument("--rho-scale", type=float, default=1.0)
    p.add_argument("--eps-rel", type=float, default=CHIRP_EPS_REL)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_chirp)

    p = sub.add_parser("synth", help="write a synthetic star-field PGM")
    p.add_argument("output")
    p.add_argument("--rows", type=int, default=256)
    p.add_argument("--cols", type=int, default=256)
    p.add_argument("--stars", type=int, default=700)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) == 0:
        args.threads = os.cpu_count() or 1
    try:
        return args.func(args)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
