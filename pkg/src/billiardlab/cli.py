"""Command line: ``run``, ``validate`` and ``render``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import load_config
from .errors import BilliardError
from .experiments import run_experiment
from .geometry import curve_from_spec
from .output import curve_outline, emit_svg, read_csv


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="billiardlab", description="Billiard dynamics experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--threads", type=int)
    run.add_argument("--out-dir")
    val = sub.add_parser("validate", help="parse a config and print it with defaults filled")
    val.add_argument("config")
    ren = sub.add_parser("render", help="draw an id,x,y trajectory CSV as SVG")
    ren.add_argument("csv")
    ren.add_argument("--svg", required=True, help="output SVG path")
    ren.add_argument("--table", help="table kind to outline, e.g. circle")
    ren.add_argument("--table-params", default="", help="comma-separated curve parameters")
    return ap


def _render(args) -> int:
    with open(args.csv, encoding="utf-8") as fh:
        header, rows = read_csv(fh.read())
    try:
        ix, iy = header.index("x"), header.index("y")
    except ValueError:
        raise BilliardError("render needs x and y columns") from None
    ii = header.index("id") if "id" in header else None
    groups: dict = {}
    for r in rows:
        groups.setdefault(r[ii] if ii is not None else "0", []).append((float(r[ix]), float(r[iy])))
    outline = None
    if args.table:
        params = [float(v) for v in args.table_params.split(",") if v.strip()]
        outline = curve_outline(curve_from_spec(args.table, params))
    with open(args.svg, "w", encoding="utf-8") as fh:
        fh.write(emit_svg(outline, [np.array(g) for g in groups.values()]))
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            from .config import format_config

            sys.stdout.write(format_config(load_config(args.config)))
            return 0
        if args.command == "render":
            return _render(args)
        cfg = load_config(args.config)
        res = run_experiment(cfg, out_dir=args.out_dir, threads=args.threads, seed=args.seed)
        sys.stdout.write(res.summary)
        return res.status
    except (BilliardError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
