"""Reflection-symmetry machinery and subsumption between output sets.

The channel reversal rho(i) = n-1-i generates the symmetry this package
exploits. Its centralizer in S_n — all channel relabelings that commute with
the reversal — permutes the n/2 reflected channel pairs and may swap the two
ends of each pair, so it has order 2^(n/2) * (n/2)!.

Subsumption is the pruning relation between prefixes: prefix A is redundant
given prefix B when some relabeling sigma maps out(A) (or its bitwise
complement) into out(B), because any completion of A then yields a completion
of B of the same depth. Three testers are provided, in increasing cost:
a necessary-condition profile filter, a randomized column-alignment
heuristic, and a complete backtracking matcher.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from sortnet.evaluate import (
    OutputSet,
    complement_output_set,
    contains_all,
    permute_words,
)
from sortnet.network import ChannelPermutation

FULL_SYMMETRIC = "full_symmetric"
REFLECTION_CENTRALIZER = "reflection_centralizer"


@dataclass(frozen=True)
class ReflectionPermutation:
    """An element of the centralizer of the channel reversal.

    Channels come in reflected pairs (i, n-1-i) for i < n/2. An element sends
    pair i to pair pair_perm[i], additionally swapping the two ends of the
    pair when flips[i] is set.
    """

    pair_perm: tuple[int, ...]
    flips: tuple[bool, ...]

    def __post_init__(self):
        if sorted(self.pair_perm) != list(range(len(self.pair_perm))):
            raise ValueError("pair_perm is not a bijection on the pair set")
        if len(self.flips) != len(self.pair_perm):
            raise ValueError("flips and pair_perm must have equal length")

    @property
    def n(self) -> int:
        return 2 * len(self.pair_perm)

    def to_channel_permutation(self) -> ChannelPermutation:
        n = self.n
        mapping = [0] * n
        for i, (target, flip) in enumerate(zip(self.pair_perm, self.flips)):
            image = n - 1 - target if flip else target
            mapping[i] = image
            mapping[n - 1 - i] = n - 1 - image
        return ChannelPermutation(mapping)


def group_order(n: int, group: str = FULL_SYMMETRIC) -> int:
    if group == FULL_SYMMETRIC:
        return math.factorial(n)
    if group == REFLECTION_CENTRALIZER:
        if n % 2:
            raise ValueError("reflection centralizer needs an even channel count")
        h = n // 2
        return (1 << h) * math.factorial(h)
    raise ValueError(f"unknown group {group!r}")


def enumerate_group(n: int, group: str = FULL_SYMMETRIC) -> Iterator[ChannelPermutation]:
    """Yield each group element once (test-scale only)."""
    if n > 12:
        raise ValueError(f"group enumeration limited to n <= 12, got {n}")
    if group == FULL_SYMMETRIC:
        for perm in itertools.permutations(range(n)):
            yield ChannelPermutation(perm)
    elif group == REFLECTION_CENTRALIZER:
        if n % 2:
            raise ValueError("reflection centralizer needs an even channel count")
        h = n // 2
        for pair_perm in itertools.permutations(range(h)):
            for flips in itertools.product((False, True), repeat=h):
                yield ReflectionPermutation(pair_perm, flips).to_channel_permutation()
    else:
        raise ValueError(f"unknown group {group!r}")


# ---------------------------------------------------------------------------
# Profiles and the necessary-condition filter


def column_sums(s: OutputSet) -> np.ndarray:
    """Per-channel count of vectors with that bit set."""
    shifts = np.arange(s.n, dtype=np.uint32)
    bits = (s.vectors[:, None] >> shifts[None, :]) & np.uint32(1)
    return bits.sum(axis=0, dtype=np.int64)


def row_weight_histogram(s: OutputSet) -> np.ndarray:
    """histogram[k] = number of vectors with exactly k ones."""
    weights = np.bitwise_count(s.vectors)
    return np.bincount(weights, minlength=s.n + 1).astype(np.int64)


def profile_filter(a: OutputSet, b: OutputSet) -> bool:
    """Cheap necessary condition for sigma(a) ⊆ b under any channel relabeling.

    True means "possible". A relabeling maps columns to columns and preserves
    row weights, so sorted column sums must be pointwise dominated and a's
    row-weight multiset must be contained in b's. Never rejects a pair for
    which a witness exists.
    """
    if a.n != b.n:
        raise ValueError(f"channel-count mismatch: {a.n} vs {b.n}")
    if len(a) > len(b):
        return False
    ca = np.sort(column_sums(a))
    cb = np.sort(column_sums(b))
    if np.any(ca > cb):
        return False
    return bool(np.all(row_weight_histogram(a) <= row_weight_histogram(b)))


# ---------------------------------------------------------------------------
# Precomputed per-set matcher state


class MatchSide:
    """Everything the matchers need about one output set, computed once.

    Subsumption pruning tests each candidate against many kept entries, so
    the per-set work (bit matrix, column sums, row weights, reflected-pair
    co-occurrence counts) is hoisted here and reused across pairs. The
    complemented side for the negated branch is derived lazily and cached.
    """

    __slots__ = ("set", "n", "size", "bitmat", "colsums", "hist",
                 "weights", "paircc", "vec_i64", "_comp")

    def __init__(self, s: OutputSet):
        self.set = s
        self.n = s.n
        self.size = len(s)
        shifts = np.arange(s.n, dtype=np.uint32)
        bits = ((s.vectors[:, None] >> shifts[None, :]) & np.uint32(1))
        self.bitmat = bits.astype(np.int64)
        self.colsums = self.bitmat.sum(axis=0)
        self.weights = np.bitwise_count(s.vectors).astype(np.int64)
        self.hist = np.bincount(self.weights, minlength=s.n + 1).astype(np.int64)
        h = s.n // 2
        self.paircc = (self.bitmat[:, :h] * self.bitmat[:, ::-1][:, :h]).sum(axis=0)
        self.vec_i64 = s.vectors.astype(np.int64)
        self._comp: MatchSide | None = None

    def complemented(self) -> "MatchSide":
        if self._comp is None:
            self._comp = MatchSide(complement_output_set(self.set))
        return self._comp


# ---------------------------------------------------------------------------
# Witnesses


@dataclass(frozen=True)
class SubsumptionWitness:
    """A checked certificate: sigma(a) ⊆ b, complementing a first if negated."""

    sigma: ChannelPermutation
    negated: bool = False

    def validate(self, a: OutputSet, b: OutputSet) -> bool:
        words = a.vectors
        if self.negated:
            words = words ^ np.uint32((1 << a.n) - 1)
        return contains_all(b, permute_words(words, self.sigma.mapping))

    def __str__(self) -> str:
        return f"sigma={self.sigma.cycles()} negated={self.negated}"


def _branch_sides(a_side: MatchSide, plain_branch: bool, negated_branch: bool):
    if plain_branch:
        yield False, a_side
    if negated_branch:
        yield True, a_side.complemented()


# ---------------------------------------------------------------------------
# Randomized column-alignment heuristic


def heuristic_match(
    a: OutputSet,
    b: OutputSet,
    restarts: int = 10,
    seed: int = 0,
    group: str = FULL_SYMMETRIC,
    plain_branch: bool = True,
    negated_branch: bool = True,
    a_side: MatchSide | None = None,
    b_side: MatchSide | None = None,
) -> SubsumptionWitness | None:
    """Try to find a subsumption witness by sorting columns on column sum.

    Columns of both sets are ordered by column sum; ties are broken by a
    seeded shuffle, fresh per restart. A candidate alignment is only returned
    after direct containment holds, so a result is always a true witness;
    None merely means "not found". The identity alignment is tried first so
    verbatim containment is always caught. Precomputed sides may be supplied
    to amortize setup over many calls.
    """
    if a.n != b.n:
        raise ValueError(f"channel-count mismatch: {a.n} vs {b.n}")
    n = a.n
    if len(a) > len(b):
        return None
    if a_side is None:
        a_side = MatchSide(a)
    if b_side is None:
        b_side = MatchSide(b)
    variants = list(_branch_sides(a_side, plain_branch, negated_branch))
    identity = ChannelPermutation.identity(n)
    for neg, side in variants:
        if contains_all(b, side.set.vectors):
            return SubsumptionWitness(identity, neg)
    bvec = b_side.vec_i64
    cb = b_side.colsums
    pair_mode = group == REFLECTION_CENTRALIZER
    if pair_mode and n % 2:
        raise ValueError("reflection centralizer needs an even channel count")
    one = np.int64(1)
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        for neg, side in variants:
            if pair_mode:
                mapping = _pair_alignment(side, b_side, n, rng)
            else:
                order_a = np.lexsort((rng.random(n), side.colsums))
                order_b = np.lexsort((rng.random(n), cb))
                mapping = np.empty(n, dtype=np.int64)
                mapping[order_a] = order_b
            imaged = side.bitmat @ (one << mapping)
            pos = np.searchsorted(bvec, imaged)
            pos_ok = pos < bvec.size
            if np.all(pos_ok) and np.array_equal(bvec[pos], imaged):
                witness = SubsumptionWitness(
                    ChannelPermutation(int(x) for x in mapping), neg)
                if witness.validate(a, b):
                    return witness
    return None


def _pair_alignment(a_side: MatchSide, b_side: MatchSide, n: int, rng) -> np.ndarray:
    """A centralizer-respecting alignment: pairs sorted by pair profile.

    Each reflected pair (i, n-1-i) gets the profile (sum of its two column
    sums, their minimum, the pair's co-occurrence count); pairs of both sides
    are matched in sorted-profile order with seeded tie shuffles, and each
    pair is oriented so smaller column sums map to smaller column sums
    (random on ties).
    """
    h = n // 2
    ca, cb = a_side.colsums, b_side.colsums
    lo_a, hi_a = ca[:h], ca[n - 1 : h - 1 : -1]
    lo_b, hi_b = cb[:h], cb[n - 1 : h - 1 : -1]
    order_a = np.lexsort(
        (rng.random(h), a_side.paircc, np.minimum(lo_a, hi_a), lo_a + hi_a))
    order_b = np.lexsort(
        (rng.random(h), b_side.paircc, np.minimum(lo_b, hi_b), lo_b + hi_b))
    mapping = np.empty(n, dtype=np.int64)
    for pa, pb in zip(order_a, order_b):
        flip = (lo_a[pa] - hi_a[pa]) * (lo_b[pb] - hi_b[pb]) < 0
        if lo_a[pa] == hi_a[pa] or lo_b[pb] == hi_b[pb]:
            flip = bool(rng.integers(2))
        image = (n - 1 - pb) if flip else pb
        mapping[pa] = image
        mapping[n - 1 - pa] = n - 1 - image
    return mapping


# ---------------------------------------------------------------------------
# Complete backtracking matcher


def _has_perfect_matching(targets: Sequence[int], m: int) -> bool:
    """targets[i] = bitmask of allowed images; True iff all i match distinctly."""
    match_to = [-1] * m

    def augment(i: int, visited: list[int]) -> bool:
        free = targets[i] & ~visited[0]
        while free:
            k = (free & -free).bit_length() - 1
            free &= free - 1
            visited[0] |= 1 << k
            if match_to[k] == -1 or augment(match_to[k], visited):
                match_to[k] = i
                return True
        return False

    for i in sorted(range(len(targets)), key=lambda i: bin(targets[i]).count("1")):
        if not augment(i, [0]):
            return False
    return True


class _EmbeddingSearch:
    """Backtracking search for a relabeling embedding rows of a into rows of b.

    The state assigns each a-row and each surviving b-row a block label; rows
    share a label iff they agree on every channel assigned so far, and every
    a-row's image must carry its own label. Assigning a-channel j to b-channel
    k refines labels by the (bit j, bit k) values: a label with more a-rows
    than b-rows kills the branch, and b-rows whose label holds no a-row are
    discarded. Distinct rows separate once all channels are assigned, so a
    surviving full assignment proves the embedding exists.

    Candidate images are prefiltered per channel by column-sum dominance (on
    both the ones and the zeros side) and, in pair mode, per reflected pair
    by co-occurrence dominance; a bipartite matching check on the resulting
    candidate sets rejects most non-embeddable pairs at the root.
    """

    def __init__(self, a_side: MatchSide, b_side: MatchSide, pair_mode: bool,
                 max_nodes: int | None = None):
        self.n = a_side.n
        self.pair_mode = pair_mode
        self.nodes_left = max_nodes if max_nodes is not None else -1
        self.exhausted = False
        self.bits_a = a_side.bitmat
        self.bits_b = b_side.bitmat
        self.ca = a_side.colsums
        self.cb = b_side.colsums
        self.cca = a_side.paircc
        self.ccb = b_side.paircc
        self.p = a_side.size
        self.q = b_side.size
        self.a_weights = a_side.weights
        self.b_weights = b_side.weights
        self.mapping = [-1] * self.n

    def _root(self):
        """Initial labels from row weights; None when already infeasible."""
        n1 = self.n + 1
        cnt_a = np.bincount(self.a_weights, minlength=n1)
        cnt_b = np.bincount(self.b_weights, minlength=n1)
        if np.any(cnt_a > cnt_b):
            return None
        occupied = cnt_a > 0
        remap = np.cumsum(occupied) - 1
        la = remap[self.a_weights]
        idx_b = np.flatnonzero(occupied[self.b_weights])
        lb = remap[self.b_weights[idx_b]]
        return int(occupied.sum()), la, idx_b, lb

    def _split(self, state, j: int, k: int):
        """Refine labels by a-column j vs b-column k; None on infeasibility.

        A label gets an appended bit from the assigned columns; labels are
        then renumbered compactly and b-rows in labels without a-rows drop
        out, so every array stays bounded by the side sizes.
        """
        if self.nodes_left == 0:
            self.exhausted = True
            return None
        self.nodes_left -= 1
        nlab, la, idx_b, lb = state
        la2 = la * 2 + self.bits_a[:, j]
        lb2 = lb * 2 + self.bits_b[idx_b, k]
        width = 2 * nlab
        cnt_a = np.bincount(la2, minlength=width)
        cnt_b = np.bincount(lb2, minlength=width)
        if np.any(cnt_a > cnt_b):
            return None
        occupied = cnt_a > 0
        remap = np.cumsum(occupied) - 1
        keep = occupied[lb2]
        return (int(occupied.sum()), remap[la2], idx_b[keep], remap[lb2[keep]])

    def _column_ok(self, j: int, k: int) -> bool:
        return bool(self.ca[j] <= self.cb[k]
                    and self.p - self.ca[j] <= self.q - self.cb[k])

    def run(self) -> tuple[int, ...] | None:
        if self.p > self.q:
            return None
        state = self._root()
        if state is None:
            return None
        # Phase 1: plan from the cheap per-column conditions only and search
        # under a small budget. Witness-bearing instances usually resolve
        # here; a complete (non-exhausted) failure is already a proof.
        probe_budget = 8 * self.n
        if self.nodes_left < 0 or self.nodes_left > probe_budget:
            outer = self.nodes_left
            self.nodes_left = probe_budget
            found = self._search(state, probe=False)
            probed = probe_budget - self.nodes_left
            self.nodes_left = outer if outer < 0 else outer - probed
            if found:
                return tuple(self.mapping)
            if not self.exhausted:
                return None
            self.exhausted = False
        # Phase 2: test every single assignment against the root state first
        # (arc consistency), then search the narrowed plan to completion.
        found = self._search(state, probe=True)
        return tuple(self.mapping) if found else None

    def _search(self, state, probe: bool) -> bool:
        if self.pair_mode:
            plan = self._plan_pairs(state, probe)
            if plan is None:
                return False
            return self._recurse_pairs(plan, 0, state, 0)
        plan = self._plan_single(state, probe)
        if plan is None:
            return False
        return self._recurse(plan, 0, state, 0)

    def _plan_pairs(self, state, probe: bool):
        """Per source pair: feasible target pairs with surviving orientations.

        Targets failing column-sum or co-occurrence dominance are dropped;
        with probe, each surviving pair-to-pair assignment is additionally
        tested against the root state in both orientations. Survivors are
        ordered by profile distance so likely images come first, and a
        bipartite matching check rejects the whole instance when the
        candidate sets cannot cover all sources.
        """
        n = self.n
        h = n // 2
        ca, cb = self.ca, self.cb
        plan = []
        masks = []
        for i in range(h):
            i2 = n - 1 - i
            options = []
            mask = 0
            for k in range(h):
                if self.cca[i] > self.ccb[k]:
                    continue
                k2 = n - 1 - k
                orient = 0
                if self._column_ok(i, k) and self._column_ok(i2, k2):
                    orient |= 1
                if self._column_ok(i, k2) and self._column_ok(i2, k):
                    orient |= 2
                if orient and probe:
                    refined = 0
                    for bit, ja, jb in ((1, k, k2), (2, k2, k)):
                        if not orient & bit:
                            continue
                        s1 = self._split(state, i, ja)
                        if s1 is not None and self._split(s1, i2, jb) is not None:
                            refined |= bit
                    orient = refined
                if orient:
                    dist = (abs(self.cca[i] - self.ccb[k])
                            + min(abs(ca[i] - cb[k]) + abs(ca[i2] - cb[k2]),
                                  abs(ca[i] - cb[k2]) + abs(ca[i2] - cb[k])))
                    options.append((int(dist), k, orient))
                    mask |= 1 << k
            if not options:
                return None
            options.sort()
            plan.append((i, options))
            masks.append(mask)
        if not _has_perfect_matching(masks, h):
            return None
        plan.sort(key=lambda item: len(item[1]))
        return plan

    def _plan_single(self, state, probe: bool):
        """Non-pair analogue of _plan_pairs: one channel at a time."""
        n = self.n
        plan = []
        masks = []
        for j in range(n):
            options = []
            mask = 0
            for k in range(n):
                if not self._column_ok(j, k):
                    continue
                if probe and self._split(state, j, k) is None:
                    continue
                options.append((int(abs(self.ca[j] - self.cb[k])), k))
                mask |= 1 << k
            if not options:
                return None
            options.sort()
            plan.append((j, options))
            masks.append(mask)
        if not _has_perfect_matching(masks, n):
            return None
        plan.sort(key=lambda item: len(item[1]))
        return plan

    def _recurse(self, plan, t, state, used) -> bool:
        if t == len(plan):
            return True
        j, options = plan[t]
        for _, k in options:
            if used >> k & 1:
                continue
            refined = self._split(state, j, k)
            if refined is None:
                continue
            self.mapping[j] = k
            if self._recurse(plan, t + 1, refined, used | 1 << k):
                return True
        self.mapping[j] = -1
        return False

    def _recurse_pairs(self, plan, t, state, used) -> bool:
        """Centralizer mode: assign reflected pair to reflected pair, either way."""
        if t == len(plan):
            return True
        n = self.n
        i, options = plan[t]
        i2 = n - 1 - i
        for _, k, orient in options:
            if used >> k & 1:
                continue
            k2 = n - 1 - k
            for bit, ja, jb in ((1, k, k2), (2, k2, k)):
                if not orient & bit:
                    continue
                refined = self._split(state, i, ja)
                if refined is None:
                    continue
                refined = self._split(refined, i2, jb)
                if refined is None:
                    continue
                self.mapping[i] = ja
                self.mapping[i2] = jb
                if self._recurse_pairs(plan, t + 1, refined, used | 1 << k):
                    return True
        self.mapping[i] = self.mapping[n - 1 - i] = -1
        return False


def exact_match(
    a: OutputSet,
    b: OutputSet,
    group: str = FULL_SYMMETRIC,
    plain_branch: bool = True,
    negated_branch: bool = True,
    max_nodes: int | None = None,
    a_side: MatchSide | None = None,
    b_side: MatchSide | None = None,
) -> SubsumptionWitness | None:
    """Decide subsumption completely over the chosen relabeling group.

    Returns a validated witness, or None only when no sigma in the group maps
    a (or, if enabled, its complement) into b. With max_nodes set, the
    backtracking search is cut off after that many refinement steps and None
    then only means "not found within budget" — still safe for pruning,
    which merely keeps an entry it might have dropped.
    """
    if a.n != b.n:
        raise ValueError(f"channel-count mismatch: {a.n} vs {b.n}")
    if group not in (FULL_SYMMETRIC, REFLECTION_CENTRALIZER):
        raise ValueError(f"unknown group {group!r}")
    pair_mode = group == REFLECTION_CENTRALIZER
    if pair_mode and a.n % 2:
        raise ValueError("reflection centralizer needs an even channel count")
    if a_side is None:
        a_side = MatchSide(a)
    if b_side is None:
        b_side = MatchSide(b)
    for neg, side in _branch_sides(a_side, plain_branch, negated_branch):
        mapping = _EmbeddingSearch(side, b_side, pair_mode,
                                   max_nodes=max_nodes).run()
        if mapping is not None:
            witness = SubsumptionWitness(ChannelPermutation(mapping), neg)
            if not witness.validate(a, b):
                raise AssertionError(
                    f"matcher produced an invalid witness {witness}")
            return witness
    return None


def subsumes(
    a: OutputSet,
    b: OutputSet,
    group: str = FULL_SYMMETRIC,
    restarts: int = 10,
    seed: int = 0,
    negated_branch: bool = True,
) -> SubsumptionWitness | None:
    """Full pipeline for one candidate pair: filter, heuristic, exact.

    The profile filter runs per branch (complementing flips column sums and
    row weights, so the branches filter differently); a branch that fails its
    filter is excluded from the matchers, which is sound because the filter
    is a necessary condition for that branch's witnesses.
    """
    a_side = MatchSide(a)
    b_side = MatchSide(b)
    plain_ok = profile_filter(a, b)
    negated_ok = negated_branch and profile_filter(
        a_side.complemented().set, b)
    if not (plain_ok or negated_ok):
        return None
    witness = heuristic_match(
        a, b, restarts=restarts, seed=seed, group=group,
        plain_branch=plain_ok, negated_branch=negated_ok,
        a_side=a_side, b_side=b_side)
    if witness is not None:
        return witness
    return exact_match(
        a, b, group=group, plain_branch=plain_ok, negated_branch=negated_ok,
        a_side=a_side, b_side=b_side)
