"""Command-line entry points for building, checking, and drawing networks.

Exit codes are uniform across subcommands: 0 for success (the network sorts,
a solution was found), 1 for a negative result (a counterexample, an
unsatisfiable instance), 2 for usage or input-format errors, and 3 for
internal invariant violations.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from sortnet.evaluate import (
    remove_unused_comparators,
    verify_sorting,
)
from sortnet.network import (
    Network,
    NetworkFormatError,
    format_network,
    parse_network,
    project_drop_last_channel,
)
from sortnet.pipeline import PipelineConfig, PipelineError, run_pipeline
from sortnet.render import render_ascii, render_svg
from sortnet.satcomp import (
    CompletionProblem,
    EncodeOptions,
    SolverSpec,
    complete_prefix,
    default_solver,
    emit_dimacs,
    encode_completion,
    solve_batch,
)
from sortnet.search import (
    build_initial_pool_28,
    generate_and_prune,
    greedy_extend,
    load_pool,
    recompute_output,
    save_pool,
    select_best,
    van_voorhis_16_prefix,
)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3

logger = logging.getLogger(__name__)


def _read_network_file(path: str) -> tuple[Network, list[tuple[str, int, int]]]:
    """Parse a network file; '# region <name> layers <a>-<b>' comments survive."""
    text = Path(path).read_text()
    regions = []
    for line in text.splitlines():
        parts = line.split()
        if (len(parts) == 5 and parts[:2] == ["#", "region"]
                and parts[3] == "layers"):
            a, _, b = parts[4].partition("-")
            if a.isdigit() and b.isdigit():
                regions.append((parts[2], int(a), int(b)))
    return parse_network(text), regions


def _bit_pattern(word: int, n: int) -> str:
    return "".join(str((word >> i) & 1) for i in range(n))


def cmd_verify(args) -> int:
    net, _ = _read_network_file(args.network)
    verdict = verify_sorting(net)
    if verdict.sorts:
        print(f"SORTS n={net.n} depth={net.depth} size={net.size}")
        return EXIT_OK
    print(f"NOT-SORTING n={net.n} counterexample={_bit_pattern(verdict.counterexample, net.n)}")
    return EXIT_NEGATIVE


def cmd_project(args) -> int:
    net, _ = _read_network_file(args.network)
    verdict = verify_sorting(net)
    if not verdict.sorts:
        print(f"input does not sort: counterexample="
              f"{_bit_pattern(verdict.counterexample, net.n)}")
        return EXIT_NEGATIVE
    projected = project_drop_last_channel(net)
    check = verify_sorting(projected)
    if not check.sorts:
        raise AssertionError(
            "projection of a sorting network failed verification")
    out = args.output or str(Path(args.network).with_suffix("")) + (
        f"_n{projected.n}.net")
    Path(out).write_text(format_network(projected))
    print(f"SORTS n={projected.n} depth={projected.depth} size={projected.size}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_render(args) -> int:
    net, regions = _read_network_file(args.network)
    render = render_svg if args.format == "svg" else render_ascii
    text = render(net, regions=regions or None)
    if args.output:
        Path(args.output).write_text(text)
        print(f"wrote {args.output}")
    else:
        print(text, end="" if text.endswith("\n") else "\n")
    return EXIT_OK


def cmd_enumerate(args) -> int:
    pools = generate_and_prune(
        args.n, args.depth, seed=args.seed, restarts=args.restarts)
    print("pool sizes:", " ".join(str(len(p)) for p in pools))
    save_pool(pools[-1], args.output, mode="symmetric", seed=args.seed)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_extend(args) -> int:
    pool12 = load_pool(args.pool)
    if pool12.n != 12:
        raise NetworkFormatError(f"expected a 12-channel pool, got n={pool12.n}")
    best12 = select_best(pool12, min(args.best_k, len(pool12)))
    variants = [van_voorhis_16_prefix()]
    pool28 = build_initial_pool_28(best12, variants)
    extended = greedy_extend(
        pool28, pool_cap=args.pool_cap, seed=args.seed, restarts=args.restarts)
    save_pool(extended, args.output, mode="symmetric", seed=args.seed)
    print(f"extended pool: {len(extended)} entries, depth {extended.depth}, "
          f"out sizes {extended.out_sizes()[:8]}")
    print(f"wrote {args.output}")
    return EXIT_OK


def _encode_options(args) -> EncodeOptions:
    return EncodeOptions(
        last_layer_adjacent=args.last_layer_adjacent,
        second_last_distance=args.second_last_distance,
        window=args.window,
        one_up_down=args.one_up_down)


def _add_option_flags(sub) -> None:
    sub.add_argument("--total-depth", type=int, default=13)
    sub.add_argument("--asymmetric", dest="symmetric", action="store_false",
                     help="drop the reflection-symmetry constraint")
    sub.add_argument("--no-last-layer-adjacent", dest="last_layer_adjacent",
                     action="store_false")
    sub.add_argument("--second-last-distance", type=int, default=2,
                     help="max channel distance in the second-to-last layer; "
                          "negative disables")
    sub.add_argument("--no-window", dest="window", action="store_false")
    sub.add_argument("--no-one-up-down", dest="one_up_down", action="store_false")


def _normalize_distance(args) -> None:
    if args.second_last_distance is not None and args.second_last_distance < 0:
        args.second_last_distance = None


def cmd_encode(args) -> int:
    pool = load_pool(args.pool)
    indices = [args.index] if args.index is not None else range(len(pool))
    for i in indices:
        entry = pool.entries[i]
        d_r = args.total_depth - entry.net.depth
        problem = CompletionProblem(
            pool.n, entry.out, d_r, symmetric=args.symmetric,
            options=_encode_options(args))
        instance = encode_completion(problem)
        path = Path(args.output_dir) / f"prefix{i}_d{args.total_depth}.cnf"
        path.parent.mkdir(parents=True, exist_ok=True)
        emit_dimacs(instance, path)
        print(f"entry {i}: {instance.var_count} vars "
              f"{instance.clause_count} clauses -> {path}")
    return EXIT_OK


def _solver_from_args(args) -> SolverSpec:
    if args.solver:
        return SolverSpec("custom", tuple(args.solver.split()))
    return default_solver()


def cmd_solve(args) -> int:
    pool = load_pool(args.pool)
    best = select_best(pool, min(args.best_k, len(pool)))
    entries = [(e.net, e.out) for e in best]
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = solve_batch(
        entries, args.total_depth, symmetric=args.symmetric,
        options=_encode_options(args), solver=_solver_from_args(args),
        timeout=args.timeout, parallelism=args.parallelism,
        stop_on_first=args.stop_on_first,
        log_path=out_dir / "solve_log.jsonl")
    wrote = 0
    for r in results:
        print(f"entry {r.index}: {r.status} ({r.seconds:.1f}s)")
        if r.status == "sat":
            net = remove_unused_comparators(r.network)
            path = out_dir / f"n{pool.n}_d{args.total_depth}_{r.index}.net"
            path.write_text(format_network(net))
            print(f"wrote {path}")
            wrote += 1
    return EXIT_OK if wrote else EXIT_NEGATIVE


def cmd_complete(args) -> int:
    net, _ = _read_network_file(args.network)
    out = recompute_output(net)
    done = complete_prefix(
        net, out, args.total_depth, symmetric=args.symmetric,
        options=_encode_options(args), solver=_solver_from_args(args),
        timeout=args.timeout)
    if done is None:
        print("no completion found (unsat or undecided)")
        return EXIT_NEGATIVE
    path = args.output or str(Path(args.network).with_suffix("")) + (
        f"_d{args.total_depth}.net")
    Path(path).write_text(format_network(done))
    print(f"SORTS n={done.n} depth={done.depth} size={done.size}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    overrides = {}
    for name in ("seed", "total_depth", "output_dir", "parallelism",
                 "solver_timeout"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.solver:
        overrides["solver_command"] = tuple(args.solver.split())
    if args.config:
        config = PipelineConfig.from_json(args.config, **overrides)
    else:
        config = PipelineConfig(**overrides)
    report = run_pipeline(config)
    for path in report.network_files:
        print(f"verified network: {path}")
    print(f"pipeline status: {report.status}")
    return EXIT_OK if report.solved else EXIT_NEGATIVE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sortnet",
        description="Search for and check small-depth sorting networks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="exhaustively check a network file")
    p.add_argument("network")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("project", help="drop the last channel of a sorter")
    p.add_argument("network")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("render", help="draw a network as ASCII or SVG")
    p.add_argument("network")
    p.add_argument("--format", choices=("ascii", "svg"), default="ascii")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("enumerate",
                       help="generate-and-prune symmetric prefixes")
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("extend",
                       help="stack 16+12 prefixes and extend a layer greedily")
    p.add_argument("pool", help="12-channel pool file")
    p.add_argument("--best-k", type=int, default=4)
    p.add_argument("--pool-cap", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("encode", help="write completion instances as DIMACS")
    p.add_argument("pool")
    p.add_argument("--index", type=int)
    p.add_argument("--output-dir", default=".")
    _add_option_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("solve", help="solve completion instances for a pool")
    p.add_argument("pool")
    p.add_argument("--best-k", type=int, default=8)
    p.add_argument("--solver", help="solver command line with {cnf} placeholder")
    p.add_argument("--timeout", type=float)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--stop-on-first", action="store_true")
    p.add_argument("--output-dir", default=".")
    _add_option_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("complete", help="complete one prefix network file")
    p.add_argument("network")
    p.add_argument("--solver")
    p.add_argument("--timeout", type=float)
    p.add_argument("-o", "--output")
    _add_option_flags(p)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("pipeline", help="run the full 28-channel construction")
    p.add_argument("--config", help="JSON file of PipelineConfig fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--total-depth", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--parallelism", type=int)
    p.add_argument("--solver-timeout", type=float)
    p.add_argument("--solver", help="solver command line with {cnf} placeholder")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    if hasattr(args, "second_last_distance"):
        _normalize_distance(args)
    try:
        return args.func(args)
    except (NetworkFormatError, FileNotFoundError, IsADirectoryError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (AssertionError, RuntimeError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
