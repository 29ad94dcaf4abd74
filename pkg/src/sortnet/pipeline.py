"""End-to-end construction of reflection-symmetric 28-channel sorting networks.

The run has three phases: enumerate 12-channel symmetric prefixes to depth 5
and keep the best few; cross them with a 16-channel depth-5 prefix into
symmetric 28-channel prefixes and extend one more layer greedily; then hand
the best prefixes to a SAT solver to fill in the remaining layers, verifying
every solution exhaustively. Every stage writes its artifacts and timings
under the configured output directory so a run can be inspected or resumed
stage by stage.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import sortnet
from sortnet.evaluate import remove_unused_comparators, verify_sorting
from sortnet.network import Network, format_network
from sortnet.satcomp import (
    CompletionResult,
    EncodeOptions,
    SolverSpec,
    default_solver,
    solve_batch,
)
from sortnet.search import (
    PrefixPool,
    build_initial_pool_28,
    generate_and_prune,
    greedy_extend,
    load_pool,
    save_pool,
    select_best,
    van_voorhis_16_prefix,
)

logger = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """A stage failed; partial artifacts up to that stage are retained."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class PipelineConfig:
    """Tuning knobs for the full run; defaults reproduce the 28/13 result."""

    pool_cap: int = 64
    best_k_12ch: int = 4
    best_k_sat: int = 8
    heuristic_restarts: int = 10
    seed: int = 0
    solver_command: tuple[str, ...] | None = None
    total_depth: int = 13
    parallelism: int = 1
    symmetric: bool = True
    last_layer_adjacent: bool = True
    second_last_distance: int | None = 2
    window: bool = True
    one_up_down: bool = True
    solver_timeout: float | None = 1800.0
    stop_on_first: bool = True
    greedy_steps: int = 14
    exact_node_budget: int | None = 100_000
    dimension_orders: tuple[tuple[int, int, int, int], ...] = ((0, 1, 2, 3),)
    output_dir: str = "artifacts"

    def __post_init__(self):
        for name in ("pool_cap", "best_k_12ch", "best_k_sat",
                     "heuristic_restarts", "parallelism", "greedy_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.total_depth <= 6:
            raise ValueError(
                f"total_depth must exceed the depth-6 prefix, got {self.total_depth}")
        if not self.dimension_orders:
            raise ValueError("need at least one dimension order for the 16-channel prefix")

    def encode_options(self) -> EncodeOptions:
        return EncodeOptions(
            last_layer_adjacent=self.last_layer_adjacent,
            second_last_distance=self.second_last_distance,
            window=self.window,
            one_up_down=self.one_up_down)

    def solver(self) -> SolverSpec:
        if self.solver_command is None:
            return default_solver()
        return SolverSpec("custom", tuple(self.solver_command))

    @classmethod
    def from_json(cls, path, **overrides) -> "PipelineConfig":
        with open(path) as fh:
            data = json.load(fh)
        data.update(overrides)
        if "solver_command" in data and data["solver_command"] is not None:
            data["solver_command"] = tuple(data["solver_command"])
        if "dimension_orders" in data:
            data["dimension_orders"] = tuple(
                tuple(o) for o in data["dimension_orders"])
        return cls(**data)


@dataclass
class PipelineReport:
    """What a run produced: per-stage records plus verified network files."""

    status: str = "unsat"  # sat | unsat | unknown
    stages: list = field(default_factory=list)
    network_files: list = field(default_factory=list)
    networks: list = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.status == "sat"


class _StageLog:
    def __init__(self, path: Path):
        self.path = path
        self.records: list[dict] = []

    def add(self, stage: str, seconds: float, **details) -> dict:
        record = {"stage": stage, "seconds": round(seconds, 3), **details}
        self.records.append(record)
        self.path.write_text(json.dumps(self.records, indent=2) + "\n")
        logger.info("stage %s done in %.1fs %s", stage, seconds, details)
        return record


def _pool12_cached(config: PipelineConfig, out_dir: Path, log: _StageLog) -> PrefixPool:
    """The depth-5 12-channel pool, from cache when the key still matches."""
    cache = out_dir / f"pool12_d5_seed{config.seed}.txt"
    meta_path = out_dir / f"pool12_d5_seed{config.seed}.json"
    key = {"n": 12, "depth": 5, "mode": "symmetric", "seed": config.seed,
           "version": sortnet.__version__,
           "restarts": config.heuristic_restarts}
    if cache.exists() and meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text())
            if meta.get("key") == key:
                t0 = time.perf_counter()
                pool = load_pool(cache)
                log.add("pool12", time.perf_counter() - t0, cached=True,
                        counts=meta["counts"], entries=len(pool))
                return pool
        except (ValueError, OSError, KeyError) as exc:
            logger.warning("pool cache unusable (%s), regenerating", exc)
    t0 = time.perf_counter()
    pools = generate_and_prune(
        12, 5, seed=config.seed, restarts=config.heuristic_restarts)
    seconds = time.perf_counter() - t0
    counts = [len(p) for p in pools]
    pool = pools[-1]
    save_pool(pool, cache, mode="symmetric", seed=config.seed)
    meta_path.write_text(json.dumps({"key": key, "counts": counts}) + "\n")
    log.add("pool12", seconds, cached=False, counts=counts, entries=len(pool))
    return pool


def _region_header(config: PipelineConfig, index: int, solver_name: str) -> list[str]:
    return [
        f"# {config.total_depth}-layer sorting network on 28 channels, "
        "reflection symmetric",
        f"# seed={config.seed} solver={solver_name} prefix_index={index}",
        "# region stack_16_12 layers 1-5",
        "# region greedy layers 6-6",
        f"# region sat layers 7-{config.total_depth}",
    ]


def _run_solve_attempts(
    config: PipelineConfig,
    entries: Sequence,
    out_dir: Path,
    log: _StageLog,
) -> tuple[list[CompletionResult], str]:
    """Solve the batch, relaxing restrictions if everything comes back unsat.

    The layer restrictions only narrow the search space — solutions are
    re-verified regardless — so an unsat sweep may mean the restrictions were
    too strong. Retry without them, then without the symmetry constraint.
    """
    solver = config.solver()
    attempts = [("restricted", config.symmetric, config.encode_options())]
    relaxed = EncodeOptions(window=config.window, one_up_down=config.one_up_down)
    if config.last_layer_adjacent or config.second_last_distance is not None:
        attempts.append(("relaxed", config.symmetric, relaxed))
    if config.symmetric:
        attempts.append(("asymmetric", False, relaxed))
    all_results: list[CompletionResult] = []
    for name, symmetric, options in attempts:
        t0 = time.perf_counter()
        results = solve_batch(
            entries, config.total_depth, symmetric=symmetric, options=options,
            solver=solver, timeout=config.solver_timeout,
            parallelism=config.parallelism, stop_on_first=config.stop_on_first,
            log_path=out_dir / f"solve_{name}.jsonl")
        statuses = [r.status for r in results]
        log.add(f"solve_{name}", time.perf_counter() - t0,
                solver=solver.name, statuses=statuses)
        all_results.extend(results)
        if any(s == "sat" for s in statuses):
            return all_results, "sat"
        if not all(s == "unsat" for s in statuses):
            return all_results, "unknown"
    return all_results, "unsat"


def run_pipeline(config: PipelineConfig) -> PipelineReport:
    """Run every stage; raise PipelineError naming the first stage that fails.

    An unsatisfiable or undecided solve is an outcome, not a failure: the
    report's status says whether any network was produced.
    """
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = _StageLog(out_dir / "stage_log.json")
    report = PipelineReport()
    stage = "pool12"
    try:
        pool12 = _pool12_cached(config, out_dir, log)

        stage = "select12"
        best12 = select_best(pool12, config.best_k_12ch)

        stage = "initial28"
        t0 = time.perf_counter()
        variants = [van_voorhis_16_prefix(o) for o in config.dimension_orders]
        pool28 = build_initial_pool_28(best12, variants)
        log.add(stage, time.perf_counter() - t0, entries=len(pool28),
                out_sizes=pool28.out_sizes())

        stage = "greedy"
        t0 = time.perf_counter()
        extended = greedy_extend(
            pool28, pool_cap=config.pool_cap, max_steps=config.greedy_steps,
            seed=config.seed, restarts=config.heuristic_restarts,
            exact_node_budget=config.exact_node_budget)
        save_pool(extended, out_dir / "pool28_d6.txt",
                  mode="symmetric", seed=config.seed)
        log.add(stage, time.perf_counter() - t0, entries=len(extended),
                depth=extended.depth,
                out_sizes=extended.out_sizes()[: config.best_k_sat])

        stage = "select_sat"
        best = select_best(extended, min(config.best_k_sat, len(extended)))

        stage = "solve"
        entries = [(e.net, e.out) for e in best]
        results, status = _run_solve_attempts(config, entries, out_dir, log)
        report.status = status

        stage = "emit"
        solver_name = config.solver().name
        t0 = time.perf_counter()
        for r in results:
            if r.status != "sat":
                continue
            net = remove_unused_comparators(r.network)
            verdict = verify_sorting(net)
            if not verdict.sorts:
                raise AssertionError(
                    f"solver output for prefix {r.index} failed verification")
            path = out_dir / f"n28_d{config.total_depth}_{r.index}.net"
            header = "\n".join(_region_header(config, r.index, solver_name))
            path.write_text(header + "\n" + format_network(net))
            report.network_files.append(str(path))
            report.networks.append(net)
        if report.networks:
            log.add(stage, time.perf_counter() - t0, files=report.network_files)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(stage, str(exc)) from exc
    return report
