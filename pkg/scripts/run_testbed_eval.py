#!/usr/bin/env python3
"""End-to-end testbed experiment.

Generates a seeded scenario suite, evaluates every strategy/scorer pair
over it, and prints the effectiveness table (Top-1/3/5/10, MFR, MAR,
runtime) plus the Top-n intersection partitions.  Results land in
--workdir for inspection.

Usage:
    python3 scripts/run_testbed_eval.py [--seed 42] [--count 30]
        [--workdir out/testbed-eval] [--granularity file]
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from bugsteps.cli import main as cli_main
from bugsteps.evalharness import evaluate_manifest, render_metrics_table
from bugsteps.isolate import STRATEGIES
from bugsteps.scoring import SCORERS
from bugsteps.util import canonical_json


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--count", type=int, default=30)
    parser.add_argument("--workdir", default="out/testbed-eval")
    parser.add_argument("--granularity", choices=("file", "function"), default="file")
    parser.add_argument("--repeat", type=int, default=5,
                        help="repeats for the rand strategy")
    args = parser.parse_args(argv)

    workdir = Path(args.workdir)
    testbed = workdir / "testbed"
    rc = cli_main(["testbed-gen", "--out", str(testbed),
                   "--seed", str(args.seed), "--count", str(args.count)])
    if rc != 0:
        return rc

    t0 = time.monotonic()
    doc = evaluate_manifest(
        testbed / "manifest.json",
        strategies=list(STRATEGIES),
        scorers=list(SCORERS),
        granularity=args.granularity,
        seed=args.seed,
        repeat=args.repeat,
    )
    elapsed = time.monotonic() - t0

    out_json = workdir / "metrics.json"
    out_json.write_text(canonical_json(doc), "utf-8")

    print()
    print(f"evaluated {args.count} scenarios x {len(STRATEGIES)} strategies "
          f"x {len(SCORERS)} scorers in {elapsed:.1f}s "
          f"({args.granularity} granularity)")
    print()
    print(render_metrics_table(doc["metrics"]))
    for level, counts in sorted(doc["intersections"].items()):
        print(f"intersection {level} (exact strategy subsets):")
        for key in sorted(counts, key=lambda k: (-counts[k], k)):
            print(f"  {counts[key]:>3}  {key}")
        print()
    if doc["errors"]:
        print(f"{len(doc['errors'])} per-bug errors recorded in {out_json}")
    print(f"full results: {out_json}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
