#!/usr/bin/env python3
"""Drive the full pipeline over seeded phantom cases and print the
headline scores.

Stages: phantom (raw cases + stub model masks) -> preprocess -> segment
(fuse + screen) -> evaluate. Everything lands under one workspace
directory whose layout matches what the CLI expects case by case.
"""

import argparse
import sys
from pathlib import Path

from ktseg.cli import main as ktseg


def run(workspace: Path, n_cases: int, seed: int, jobs: int | None) -> int:
    raw = workspace / "raw"
    preproc = workspace / "preproc"
    masks = workspace / "masks"
    pred = workspace / "pred"
    report = workspace / "report"
    j = ["--jobs", str(jobs)] if jobs else []

    stages = [
        ["phantom", "--output", str(raw), "--masks", str(masks),
         "--cases", str(n_cases), "--seed", str(seed)],
        ["preprocess", "--input", str(raw), "--output", str(preproc)],
        ["segment", "--input", str(preproc), "--masks", str(masks),
         "--output", str(pred)],
        ["evaluate", "--input", str(preproc), "--pred", str(pred),
         "--output", str(report)],
    ]
    for argv in stages:
        print(f"==> ktseg {' '.join(argv)}")
        code = ktseg(argv + j)
        if code != 0:
            print(f"stage failed with exit code {code}", file=sys.stderr)
            return code

    print("\nsummary.csv:")
    print((report / "summary.csv").read_text(), end="")
    return 0


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("workspace", type=Path,
                        help="directory to build the pipeline tree in")
    parser.add_argument("--cases", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=None)
    return parser.parse_args()


if __name__ == "__main__":
    args = parse_args()
    sys.exit(run(args.workspace, args.cases, args.seed, args.jobs))
