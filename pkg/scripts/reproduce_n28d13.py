#!/usr/bin/env python3
"""Reproduce the 28-channel depth-13 sorting network end to end.

Runs the full pipeline: enumerate reflection-symmetric 12-channel prefixes to
depth 5, stack the best of them under a 16-channel depth-5 prefix, extend one
greedy layer, and hand the best depth-6 prefixes to a SAT solver for the
remaining 7 layers. Every produced network is verified exhaustively over all
2^28 Boolean inputs before being written.

Artifacts (pools, stage log, CNF files, verified networks) land in
--output-dir. A cached 12-channel pool from a previous run is reused when the
seed and code version match.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from sortnet.evaluate import verify_sorting
from sortnet.network import is_reflection_symmetric, parse_network
from sortnet.pipeline import PipelineConfig, run_pipeline


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output-dir", default="artifacts/n28d13",
                        help="where pools, logs, and networks are written")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--solver", default=None,
                        help="solver command line, e.g. 'kissat -q {cnf}' "
                             "(default: first known solver on PATH)")
    parser.add_argument("--solver-timeout", type=float, default=1800.0,
                        help="per-instance solver timeout in seconds")
    parser.add_argument("--parallelism", type=int, default=1,
                        help="concurrent solver processes")
    parser.add_argument("--solve-all", action="store_true",
                        help="keep solving after the first verified network")
    parser.add_argument("--asymmetric", action="store_true",
                        help="do not constrain the SAT suffix to be "
                             "reflection symmetric")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    config = PipelineConfig(
        seed=args.seed,
        output_dir=args.output_dir,
        solver_command=tuple(args.solver.split()) if args.solver else None,
        solver_timeout=args.solver_timeout,
        parallelism=args.parallelism,
        stop_on_first=not args.solve_all,
        symmetric=not args.asymmetric,
    )
    t0 = time.perf_counter()
    report = run_pipeline(config)
    minutes = (time.perf_counter() - t0) / 60
    print(f"\npipeline finished in {minutes:.1f} min, status: {report.status}")
    if not report.solved:
        print("no network produced; see stage_log.json for per-stage detail")
        return 1
    for path in report.network_files:
        net = parse_network(Path(path).read_text())
        verdict = verify_sorting(net)
        sym = is_reflection_symmetric(net)
        print(f"  {path}: n={net.n} depth={net.depth} size={net.size} "
              f"sorts={verdict.sorts} symmetric={sym}")
        if not verdict.sorts:
            raise AssertionError(f"emitted network {path} fails re-verification")
    return 0


if __name__ == "__main__":
    sys.exit(main())
