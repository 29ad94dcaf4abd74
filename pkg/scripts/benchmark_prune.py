#!/usr/bin/env python3
"""Time the symmetric generate-and-prune enumeration and report pool sizes.

Example:
    python3 scripts/benchmark_prune.py --n 12 --depth 4 --save pools/d4.txt
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

from sortnet.search import generate_and_prune, save_pool


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=12)
    parser.add_argument("--depth", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--restarts", type=int, default=10)
    parser.add_argument("--save", help="write the final pool to this file")
    parser.add_argument("-q", "--quiet", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(message)s")
    t0 = time.perf_counter()
    pools = generate_and_prune(
        args.n, args.depth, seed=args.seed, restarts=args.restarts)
    seconds = time.perf_counter() - t0
    print(f"n={args.n} depth={args.depth}: {seconds:.1f}s")
    print("pool sizes per depth:", [len(p) for p in pools])
    sizes = sorted(pools[-1].out_sizes())
    print(f"final out sizes: min={sizes[0]} max={sizes[-1]} best8={sizes[:8]}")
    if args.save:
        save_pool(pools[-1], args.save, mode="symmetric", seed=args.seed)
        print(f"wrote {args.save}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
