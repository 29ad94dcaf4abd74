"""SAT encoding of "complete this prefix to a sorting network in d_r layers".

One CNF variable per eligible comparator per remaining layer, plus value
variables tracing each unsorted prefix-output vector through the remaining
layers. The instance is satisfiable iff such a suffix exists; models decode
straight into layers. Decoded networks are always re-verified exhaustively —
the encoder is never trusted on its own.

Encoding notes (each an independent, off-by-default option):
  - window: on every channel below a vector's leading-zero run the value
    stays 0 through any comparator network, and dually for the trailing-one
    run, so those channels need no variables and comparators touching them
    act as the identity for that vector. Exact, not a restriction.
  - one_up_down: weight-1 and weight-(n-1) vectors are traced with monotone
    "the one/zero may be here" variables (forward implications plus negated
    final positions), which is equisatisfiable because any true trajectory
    satisfies the implications and the minimal model is the true trajectory.
  - last_layer_adjacent / second_last_distance: only adjacent comparators in
    the final layer, bounded span in the one before. These do restrict the
    search space; verification makes an over-restriction a missed solution,
    never a wrong network.

In symmetric mode, layers are constrained to equal their reflection, and
only one vector per {x, reflect(complement(x))} orbit is encoded: a
symmetric suffix sorts one iff it sorts the other.
"""

from __future__ import annotations

import json
import logging
import re
import shutil
import subprocess
import tempfile
import threading
import time
from array import array
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from sortnet.evaluate import (
    OutputSet,
    is_sorted,
    remove_unused_comparators,
    verify_sorting,
)
from sortnet.network import Comparator, Layer, Network, compose

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncodeOptions:
    """Encoder feature flags; all off by default."""

    last_layer_adjacent: bool = False
    second_last_distance: int | None = None
    window: bool = False
    one_up_down: bool = False


REPRODUCTION_OPTIONS = EncodeOptions(
    last_layer_adjacent=True, second_last_distance=2, window=True, one_up_down=True)


@dataclass(frozen=True)
class CompletionProblem:
    n: int
    prefix_out: OutputSet
    d_r: int
    symmetric: bool = False
    options: EncodeOptions = EncodeOptions()

    def __post_init__(self):
        if self.d_r < 1:
            raise ValueError(f"need at least one remaining layer, got {self.d_r}")
        if self.prefix_out.n != self.n:
            raise ValueError("prefix_out channel count disagrees with n")


@dataclass
class CnfInstance:
    """Flat clause store: literals with a 0 terminator after each clause."""

    var_count: int
    clause_count: int
    literals: array
    gate_var_map: dict[tuple[int, int, int], int]
    value_var_map: dict[tuple[int, int, int], int]

    def iter_clauses(self):
        clause: list[int] = []
        for lit in self.literals:
            if lit == 0:
                yield tuple(clause)
                clause = []
            else:
                clause.append(lit)


class _Builder:
    def __init__(self):
        self.nvars = 0
        self.count = 0
        self.buf = array("i")

    def new_var(self) -> int:
        self.nvars += 1
        return self.nvars

    def clause(self, lits) -> None:
        """Add a clause; literals True/False are folded away."""
        out = []
        for lit in lits:
            if lit is True:
                return
            if lit is False:
                continue
            out.append(lit)
        self.buf.extend(out)
        self.buf.append(0)
        self.count += 1


def _runs(word: int, n: int) -> tuple[int, int]:
    """(leading-zero run, trailing-one run) in channel order."""
    lz = 0
    while lz < n and not (word >> lz) & 1:
        lz += 1
    to = 0
    while to < n and (word >> (n - 1 - to)) & 1:
        to += 1
    return lz, to


def _reflect_complement(word: int, n: int) -> int:
    """reflect(complement(x)): the vector a symmetric network treats like x."""
    out = 0
    for i in range(n):
        out |= (((word >> i) & 1) ^ 1) << (n - 1 - i)
    return out


def _allowed_pairs(n: int, t: int, d_r: int, options: EncodeOptions):
    if options.last_layer_adjacent and t == d_r - 1:
        return [(i, i + 1) for i in range(n - 1)]
    if options.second_last_distance is not None and t == d_r - 2:
        dist = options.second_last_distance
        return [(i, j) for i in range(n) for j in range(i + 1, min(i + dist, n - 1) + 1)]
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def encode_completion(problem: CompletionProblem) -> CnfInstance:
    """Build the CNF; satisfiable iff a conforming d_r-layer suffix sorts
    every vector of prefix_out."""
    n = problem.n
    d_r = problem.d_r
    opts = problem.options
    b = _Builder()

    gate: dict[tuple[int, int, int], int] = {}
    pairs_by_layer = []
    for t in range(d_r):
        pairs = _allowed_pairs(n, t, d_r, opts)
        pairs_by_layer.append(pairs)
        for i, j in pairs:
            gate[(t, i, j)] = b.new_var()

    # At most one comparator per channel per layer (pairwise).
    for t, pairs in enumerate(pairs_by_layer):
        touching: list[list[int]] = [[] for _ in range(n)]
        for i, j in pairs:
            v = gate[(t, i, j)]
            touching[i].append(v)
            touching[j].append(v)
        for chan in range(n):
            vs = touching[chan]
            for x in range(len(vs)):
                for y in range(x + 1, len(vs)):
                    b.clause((-vs[x], -vs[y]))

    # Symmetric mode: each layer equals its reflection.
    if problem.symmetric:
        for t, pairs in enumerate(pairs_by_layer):
            for i, j in pairs:
                ri, rj = n - 1 - j, n - 1 - i
                if (ri, rj) <= (i, j):
                    continue
                g1, g2 = gate[(t, i, j)], gate[(t, ri, rj)]
                b.clause((-g1, g2))
                b.clause((-g2, g1))

    # Representative vectors: drop sorted ones; in symmetric mode keep one
    # per {x, reflect(complement(x))} orbit.
    words = [int(w) for w in problem.prefix_out.vectors]
    present = set(words)
    reps = []
    for idx, w in enumerate(words):
        if is_sorted(w, n):
            continue
        if problem.symmetric:
            partner = _reflect_complement(w, n)
            if partner in present and partner < w:
                continue
        reps.append((idx, w))

    value: dict[tuple[int, int, int], int] = {}

    def encode_vector(idx: int, w: int) -> None:
        lz, to = _runs(w, n)
        wl, wr = (lz, n - to) if opts.window else (0, n)

        if opts.one_up_down:
            weight = w.bit_count()
            if weight == 1:
                _encode_one_track(b, gate, value, pairs_by_layer, idx, w, n, d_r,
                                  wl, wr, down=True)
                return
            if weight == n - 1:
                _encode_one_track(b, gate, value, pairs_by_layer, idx, w, n, d_r,
                                  wl, wr, down=False)
                return

        def val(t: int, i: int):
            if i < wl:
                return False
            if i >= wr:
                return True
            if t == 0:
                return bool((w >> i) & 1)
            key = (idx, t, i)
            v = value.get(key)
            if v is None:
                v = value[key] = b.new_var()
            return v

        def lit(x, neg=False):
            if isinstance(x, bool):
                return x != neg
            return -x if neg else x

        for t, pairs in enumerate(pairs_by_layer):
            movers: list[list[int]] = [[] for _ in range(n)]
            for i, j in pairs:
                if not (wl <= i < wr and wl <= j < wr):
                    continue  # acts as the identity on this vector
                g = gate[(t, i, j)]
                vi, vj = val(t, i), val(t, j)
                ni, nj = val(t + 1, i), val(t + 1, j)
                movers[i].append(g)
                movers[j].append(g)
                # new lo = vi AND vj
                b.clause((-g, lit(ni, True), lit(vi)))
                b.clause((-g, lit(ni, True), lit(vj)))
                b.clause((-g, lit(vi, True), lit(vj, True), lit(ni)))
                # new hi = vi OR vj
                b.clause((-g, lit(vi, True), lit(nj)))
                b.clause((-g, lit(vj, True), lit(nj)))
                b.clause((-g, lit(nj, True), lit(vi), lit(vj)))
            for i in range(wl, wr):
                vi, ni = val(t, i), val(t + 1, i)
                b.clause([lit(ni, True), lit(vi)] + movers[i])
                b.clause([lit(ni), lit(vi, True)] + movers[i])

        for i in range(wl, wr - 1):
            b.clause((lit(val(d_r, i), True), lit(val(d_r, i + 1))))

    for idx, w in reps:
        encode_vector(idx, w)

    return CnfInstance(b.nvars, b.count, b.buf, gate, value)


def _encode_one_track(b, gate, value, pairs_by_layer, idx, w, n, d_r, wl, wr, down):
    """Reduced tracking for a lone 1 (down=True) or lone 0 (down=False).

    Variables mean "the tracked bit may sit on channel i after layer t";
    forward implications follow the chosen gates, and the final position is
    pinned by negative unit clauses. A lone 1 only ever moves to higher
    channels, a lone 0 to lower ones.
    """
    if down:
        pos = (w & -w).bit_length() - 1  # channel of the single 1
        goal = n - 1
    else:
        inv = (~w) & ((1 << n) - 1)
        pos = (inv & -inv).bit_length() - 1  # channel of the single 0
        goal = 0

    def val(t: int, i: int):
        if not wl <= i < wr:
            return i >= wr if down else i < wl
        if t == 0:
            return i == pos
        key = (idx, t, i)
        v = value.get(key)
        if v is None:
            v = value[key] = b.new_var()
        return v

    def lit(x, neg=False):
        if isinstance(x, bool):
            return x != neg
        return -x if neg else x

    for t, pairs in enumerate(pairs_by_layer):
        away: list[list[int]] = [[] for _ in range(n)]
        for i, j in pairs:
            if not (wl <= i < wr and wl <= j < wr):
                continue
            g = gate[(t, i, j)]
            if down:
                # 1 at the lo end moves to hi; at the hi end it stays.
                b.clause((-g, lit(val(t, i), True), lit(val(t + 1, j))))
                b.clause((-g, lit(val(t, j), True), lit(val(t + 1, j))))
                away[i].append(g)
            else:
                # 0 at the hi end moves to lo; at the lo end it stays.
                b.clause((-g, lit(val(t, j), True), lit(val(t + 1, i))))
                b.clause((-g, lit(val(t, i), True), lit(val(t + 1, i))))
                away[j].append(g)
        for i in range(wl, wr):
            b.clause([lit(val(t, i), True), lit(val(t + 1, i))] + away[i])
    for i in range(wl, wr):
        if i != goal:
            b.clause((lit(val(d_r, i), True),))


def emit_dimacs(instance: CnfInstance, path) -> None:
    """Standard DIMACS CNF, byte-deterministic for a given instance."""
    with open(path, "w") as fh:
        fh.write(f"p cnf {instance.var_count} {instance.clause_count}\n")
        buf = instance.literals
        start = 0
        chunk = 1 << 16
        while start < len(buf):
            end = min(start + chunk, len(buf))
            while end < len(buf) and buf[end - 1] != 0:
                end += 1
            if end == len(buf) and buf and buf[-1] != 0:
                raise ValueError("literal buffer does not end a clause")
            text = " ".join(map(str, buf[start:end]))
            fh.write(text.replace(" 0 ", " 0\n") + "\n")
            start = end


# ---------------------------------------------------------------------------
# External solvers


@dataclass(frozen=True)
class SolverSpec:
    """How to run one DIMACS solver and read its answer.

    command holds {cnf} and, for result_file parsing, {result} placeholders.
    parse is "solution_line" (s/v lines on stdout) or "result_file"
    (first line SAT/UNSAT, then literals, in the {result} file).
    """

    name: str
    command: tuple[str, ...]
    parse: str = "solution_line"


KNOWN_SOLVERS = (
    SolverSpec("splr", ("splr", "-q", "-C", "-r", "-", "{cnf}")),
    SolverSpec("kissat", ("kissat", "-q", "{cnf}")),
    SolverSpec("cadical", ("cadical", "-q", "{cnf}")),
    SolverSpec("cryptominisat5", ("cryptominisat5", "{cnf}")),
    SolverSpec("minisat", ("minisat", "-verb=0", "{cnf}", "{result}"), "result_file"),
)


def default_solver() -> SolverSpec:
    for spec in KNOWN_SOLVERS:
        if shutil.which(spec.command[0]):
            return spec
    raise RuntimeError(
        "no DIMACS SAT solver found on PATH; install one of: "
        + ", ".join(s.name for s in KNOWN_SOLVERS))


@dataclass
class SolverResult:
    status: str  # sat | unsat | unknown
    model: dict[int, bool] = field(default_factory=dict)
    seconds: float = 0.0


_ANSI_RE = re.compile(r"\x1b\[[0-9;]*[A-Za-z]|\r")


def _parse_solution_text(text: str) -> SolverResult:
    status = "unknown"
    model: dict[int, bool] = {}
    for raw in text.splitlines():
        line = _ANSI_RE.sub("", raw).strip()
        if line.startswith("s "):
            if "UNSATISFIABLE" in line:
                status = "unsat"
            elif "SATISFIABLE" in line:
                status = "sat"
        elif line.startswith("v "):
            for tok in line[2:].split():
                lit = int(tok)
                if lit:
                    model[abs(lit)] = lit > 0
        elif line and status == "unknown" and line.split()[0] in ("SAT", "UNSAT"):
            status = "sat" if line.split()[0] == "SAT" else "unsat"
    return SolverResult(status, model)


def run_solver(
    instance_path,
    solver: SolverSpec | None = None,
    timeout: float | None = None,
    cancel_event: threading.Event | None = None,
) -> SolverResult:
    """Run the solver process on a DIMACS file and parse its verdict.

    Timeout or cancellation yields status "unknown". Output that contains
    neither verdict raises, quoting the output.
    """
    solver = solver or default_solver()
    result_path = None
    if solver.parse == "result_file":
        fd = tempfile.NamedTemporaryFile(
            mode="w", suffix=".out", delete=False)
        fd.close()
        result_path = fd.name
    cmd = [
        part.format(cnf=str(instance_path), result=result_path or "")
        for part in solver.command
    ]
    t0 = time.perf_counter()
    proc = subprocess.Popen(
        cmd, stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
    deadline = None if timeout is None else t0 + timeout
    while True:
        try:
            out, _ = proc.communicate(timeout=0.5)
            break
        except subprocess.TimeoutExpired:
            now = time.perf_counter()
            if (deadline is not None and now > deadline) or (
                    cancel_event is not None and cancel_event.is_set()):
                proc.kill()
                out, _ = proc.communicate()
                return SolverResult("unknown", seconds=now - t0)
    seconds = time.perf_counter() - t0
    if solver.parse == "result_file":
        text = Path(result_path).read_text() if result_path else ""
        lines = text.split()
        if not lines:
            raise RuntimeError(
                f"{solver.name} produced no result file; stdout was:\n{out}")
        status = {"SAT": "sat", "UNSAT": "unsat"}.get(lines[0], "unknown")
        model = {abs(int(t)): int(t) > 0 for t in lines[1:] if int(t) != 0}
        result = SolverResult(status, model, seconds)
    else:
        result = _parse_solution_text(out)
        result.seconds = seconds
    if result.status == "unknown" and proc.returncode in (10, 20):
        result.status = "sat" if proc.returncode == 10 else "unsat"
    if result.status == "unknown" and proc.returncode not in (0, 10, 20):
        raise RuntimeError(
            f"{solver.name} exited {proc.returncode} without a verdict:\n{out}")
    return result


# ---------------------------------------------------------------------------
# Decode and end-to-end completion


def decode_suffix(instance: CnfInstance, model: dict[int, bool], n: int,
                  d_r: int) -> Network:
    """Read the chosen comparators out of a satisfying assignment."""
    layers: list[list[Comparator]] = [[] for _ in range(d_r)]
    for (t, i, j), var in instance.gate_var_map.items():
        if model.get(var, False):
            layers[t].append(Comparator(i, j))
    return Network(n, (Layer(comps) for comps in layers))


def complete_prefix(
    net: Network,
    prefix_out: OutputSet,
    total_depth: int,
    symmetric: bool = False,
    options: EncodeOptions = EncodeOptions(),
    solver: SolverSpec | None = None,
    timeout: float | None = None,
    workdir=None,
    cancel_event: threading.Event | None = None,
) -> Network | None:
    """Solve for a suffix bringing the prefix to total_depth; verify or die.

    Returns the cleaned, exhaustively verified network, or None when the
    instance is unsatisfiable or undecided. A decoded network that fails
    verification raises — that would be an encoder bug worth hearing about.
    """
    return _complete_with_status(
        net, prefix_out, total_depth, symmetric, options, solver, timeout,
        workdir, cancel_event)[1]


def _complete_with_status(
    net, prefix_out, total_depth, symmetric, options, solver, timeout,
    workdir=None, cancel_event=None,
) -> tuple[str, Network | None]:
    d_r = total_depth - net.depth
    if d_r < 1:
        if verify_sorting(net).sorts:
            return "sat", net
        return "unsat", None
    problem = CompletionProblem(net.n, prefix_out, d_r, symmetric, options)
    instance = encode_completion(problem)
    own_dir = None
    if workdir is None:
        own_dir = tempfile.TemporaryDirectory(prefix="sortnet-cnf-")
        workdir = own_dir.name
    try:
        cnf_path = Path(workdir) / f"completion_n{net.n}_d{d_r}.cnf"
        emit_dimacs(instance, cnf_path)
        logger.info(
            "solving %s: %d vars, %d clauses", cnf_path.name,
            instance.var_count, instance.clause_count)
        result = run_solver(cnf_path, solver, timeout, cancel_event)
        if result.status != "sat":
            logger.info("completion %s after %.1fs", result.status, result.seconds)
            return result.status, None
        suffix = decode_suffix(instance, result.model, net.n, d_r)
        full = remove_unused_comparators(compose(net, suffix))
        verdict = verify_sorting(full)
        if not verdict.sorts:
            raise RuntimeError(
                f"decoded network fails verification on input "
                f"{verdict.counterexample}; suffix was {suffix}")
        logger.info("completion sat after %.1fs, verified", result.seconds)
        return "sat", full
    finally:
        if own_dir is not None:
            own_dir.cleanup()


@dataclass
class CompletionResult:
    index: int
    status: str  # sat | unsat | unknown | cancelled | error
    seconds: float
    network: Network | None = None


def solve_batch(
    entries: Sequence[tuple[Network, OutputSet]],
    total_depth: int,
    symmetric: bool = False,
    options: EncodeOptions = EncodeOptions(),
    solver: SolverSpec | None = None,
    timeout: float | None = None,
    parallelism: int = 1,
    stop_on_first: bool = False,
    log_path=None,
) -> list[CompletionResult]:
    """Complete many prefixes with bounded solver parallelism.

    With stop_on_first, instances still waiting are cancelled after the
    first verified network; running solvers are told to stop via the shared
    cancel event. Results come back in entry order.
    """
    cancel = threading.Event()
    results: list[CompletionResult] = [
        CompletionResult(i, "cancelled", 0.0) for i in range(len(entries))]

    def work(i: int) -> None:
        if cancel.is_set():
            return
        t0 = time.perf_counter()
        net, out = entries[i]
        try:
            status, done = _complete_with_status(
                net, out, total_depth, symmetric, options, solver, timeout,
                cancel_event=cancel)
        except Exception:
            results[i] = CompletionResult(i, "error", time.perf_counter() - t0)
            raise
        took = time.perf_counter() - t0
        if done is not None:
            results[i] = CompletionResult(i, "sat", took, done)
            if stop_on_first:
                cancel.set()
        elif status == "unknown" and cancel.is_set():
            results[i] = CompletionResult(i, "cancelled", took)
        else:
            results[i] = CompletionResult(i, status, took)

    if parallelism <= 1:
        for i in range(len(entries)):
            if cancel.is_set():
                break
            work(i)
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            list(pool.map(work, range(len(entries))))
    if log_path is not None:
        with open(log_path, "w") as fh:
            for r in results:
                fh.write(json.dumps({
                    "entry": r.index, "status": r.status,
                    "seconds": round(r.seconds, 3),
                    "net": str(r.network) if r.network else None}) + "\n")
    return results
