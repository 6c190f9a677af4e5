"""Run every config in configs/ (or the ones given) and report exit statuses."""

import argparse
import sys
from pathlib import Path

from billiardlab.config import load_config
from billiardlab.experiments import run_experiment

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("configs", nargs="*", type=Path)
    ap.add_argument("--out-root", type=Path, default=ROOT / "out")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args()
    paths = args.configs or sorted((ROOT / "configs").glob("*.cfg"))
    worst = 0
    for p in paths:
        res = run_experiment(load_config(p), out_dir=str(args.out_root / p.stem), threads=args.threads)
        print(f"{p.stem}: status {res.status}, {len(res.summary.splitlines()) - 1} summary rows")
        worst = max(worst, res.status)
    return worst


if __name__ == "__main__":
    sys.exit(main())
