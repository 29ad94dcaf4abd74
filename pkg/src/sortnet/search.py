"""Generate-and-prune search over reflection-symmetric prefixes.

The search state is a pool of prefixes, each carrying its exact output set.
One round appends every possible reflection-symmetric layer to every pool
member, then prunes the candidates: a candidate is dropped when a kept,
smaller-output candidate relabels (over the reflection centralizer) into it,
since any completion of the dropped prefix then yields an equally deep
completion of the kept one.

Comparators are handled in reflection orbits {c, rho(c)}: a symmetric layer
is exactly a disjoint union of orbits, which both drives layer enumeration
and keeps every generated network symmetric by construction.
"""

from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from sortnet.evaluate import (
    OutputSet,
    advance_output_set,
    full_output_set,
    output_set,
    permute_words,
    product_stack_outputs,
)
from sortnet.network import (
    ChannelPermutation,
    Comparator,
    Layer,
    Network,
    parse_single_line,
    permute_channels,
    stack,
)
from sortnet.symmetry import (
    REFLECTION_CENTRALIZER,
    MatchSide,
    _has_perfect_matching,
    exact_match,
    heuristic_match,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PrefixEntry:
    """A prefix network with its exact output set."""

    net: Network
    out: OutputSet

    @property
    def out_size(self) -> int:
        return len(self.out)

    @property
    def sort_key(self) -> tuple[int, str]:
        return (len(self.out), str(self.net))


@dataclass(frozen=True)
class PrefixPool:
    """Prefixes of equal channel count and depth, ascending by (out_size, text)."""

    n: int
    depth: int
    entries: tuple[PrefixEntry, ...]

    def __post_init__(self):
        ordered = tuple(sorted(self.entries, key=lambda e: e.sort_key))
        object.__setattr__(self, "entries", ordered)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[PrefixEntry]:
        return iter(self.entries)

    def out_sizes(self) -> list[int]:
        return [e.out_size for e in self.entries]


def select_best(pool: PrefixPool, k: int) -> PrefixPool:
    """The k entries smallest by (out_size, text)."""
    if k > len(pool):
        raise ValueError(f"asked for {k} entries from a pool of {len(pool)}")
    return PrefixPool(pool.n, pool.depth, pool.entries[:k])


# ---------------------------------------------------------------------------
# Reflection orbits and symmetric layers


def comparator_orbits(n: int) -> list[tuple[Comparator, ...]]:
    """All orbits {c, rho(c)} of comparators under the channel reversal.

    Self-symmetric comparators (i, n-1-i) form singleton orbits; every other
    orbit holds two comparators on four distinct channels (n even).
    """
    seen: set[Comparator] = set()
    orbits: list[tuple[Comparator, ...]] = []
    for i in range(n):
        for j in range(i + 1, n):
            c = Comparator(i, j)
            if c in seen:
                continue
            rc = c.reflected(n)
            seen.add(c)
            seen.add(rc)
            orbits.append((c,) if rc == c else tuple(sorted((c, rc))))
    return orbits


def _orbit_channel_mask(orbit: Sequence[Comparator]) -> int:
    mask = 0
    for c in orbit:
        mask |= (1 << c.lo) | (1 << c.hi)
    return mask


def enumerate_symmetric_layers(n: int, forbidden: Iterable[int] = ()) -> Iterator[Layer]:
    """Every non-empty layer with reflect(layer) = layer, each exactly once.

    Includes non-maximal layers. Channels in ``forbidden`` are excluded.
    """
    if n % 2:
        raise ValueError("symmetric layers need an even channel count")
    banned = 0
    for ch in forbidden:
        banned |= 1 << ch
    orbits = [o for o in comparator_orbits(n) if not _orbit_channel_mask(o) & banned]
    masks = [_orbit_channel_mask(o) for o in orbits]

    def rec(start: int, used: int, chosen: list[Comparator]):
        for idx in range(start, len(orbits)):
            if used & masks[idx]:
                continue
            chosen.extend(orbits[idx])
            yield Layer(chosen)
            yield from rec(idx + 1, used | masks[idx], chosen)
            del chosen[len(chosen) - len(orbits[idx]):]

    yield from rec(0, 0, [])


# ---------------------------------------------------------------------------
# The ordered prune


@dataclass
class _Candidate:
    """Prune-internal record: packed output words plus how to rebuild the net."""

    size: int
    text: str
    packed: bytes  # sorted output words in the narrowest unsigned dtype for n
    build: tuple  # (parent Network or None, extra comparators) -- see _materialize


def _packed_dtype(n: int):
    return np.uint16 if n <= 16 else np.uint32


def _pack_words(words: np.ndarray, n: int) -> bytes:
    return words.astype(_packed_dtype(n), copy=False).tobytes()


def _unpack_words(packed: bytes, n: int) -> np.ndarray:
    return np.frombuffer(packed, dtype=_packed_dtype(n)).astype(np.uint32)


def _side_profile(side: MatchSide) -> np.ndarray:
    """Dominance profile: sorted column sums, weight histogram, and sorted
    per-reflected-pair counts (end sums, end minima, both-ones, exactly-one).

    A centralizer relabeling permutes channels, preserves row weights, and
    permutes the reflected pairs, so each block of sigma(a)'s profile equals
    a's; b's profile dominates any subset's pointwise after sorting. The
    pair blocks are valid filters only over the centralizer, which is the
    only group this prune uses.
    """
    n = side.n
    h = n // 2
    lo = side.colsums[:h]
    hi = side.colsums[n - 1: h - 1: -1]
    return np.concatenate(
        [np.sort(side.colsums), side.hist, np.sort(lo + hi),
         np.sort(np.minimum(lo, hi)), np.sort(side.paircc),
         np.sort(lo + hi - 2 * side.paircc)]).astype(np.int32)


def _profile_scalars(prof: np.ndarray, n: int) -> np.ndarray:
    """Four block sums of the profile: total ones, row count, summed pair
    minima, summed both-one pair counts.

    Pointwise dominance of the profile implies dominance of each block sum,
    so this is a 16-byte-per-entry prefilter in front of the full profile
    scan — the full scan then only touches the rows that survive.
    """
    h = n // 2
    a = n
    b = a + n + 1
    c = b + h
    d = c + h
    e = d + h
    return np.array(
        [prof[:a].sum(), prof[a:b].sum(), prof[c:d].sum(), prof[d:e].sum()],
        dtype=np.int32)


def _weight_stats(side: MatchSide) -> tuple[np.ndarray, np.ndarray]:
    """Weight-class-resolved counts: ones per (row weight, channel), and
    both-end ones per (row weight, reflected pair).

    A relabeling preserves each row's weight, so a witness maps the weight-w
    rows of a into the weight-w rows of b. Within one weight class every
    count of a at channel j (or pair p) is then bounded by b's count at the
    image channel (pair), which is the basis of the feasibility precheck.
    """
    n = side.n
    h = n // 2
    onehot = np.equal.outer(np.arange(n + 1, dtype=np.int64), side.weights)
    w_ch = onehot @ side.bitmat
    both = side.bitmat[:, :h] * side.bitmat[:, ::-1][:, :h]
    w_cc = onehot @ both
    return w_ch.astype(np.int32), w_cc.astype(np.int32)


def _weight_tables(side: MatchSide) -> tuple[np.ndarray, ...]:
    """All weight-class tables one embedding check needs, plus a flat sorted
    summary usable as a pointwise-dominance prefilter.

    Returns (summary, w, zeros, cc, n10, n01, c0): w and zeros have shape
    (n+1, n), the pair tables (n+1, h). Row ``wt`` of each table counts the
    weight-``wt`` rows of the set with, respectively, a one at a channel, a
    zero at a channel, and each two-bit pattern on a reflected pair (both
    ones, one at the low end only, one at the high end only, both zeros).
    The summary concatenates every table with rows sorted, pair tables as
    orientation-free sorted min/max: an injective channel (pair) map with
    pointwise dominated counts forces sorted-row dominance, so any summary
    coordinate of a exceeding b's refutes an embedding of a into b before
    per-channel work starts. int16 throughout; counts are bounded by the
    2**n input rows.
    """
    h = side.n // 2
    w, cc = _weight_stats(side)
    hist = side.hist.astype(np.int64)
    n10 = w[:, :h] - cc
    n01 = w[:, ::-1][:, :h] - cc
    c0 = hist[:, None] - n10 - n01 - cc
    zeros = hist[:, None] - w
    summary = np.concatenate(
        [np.sort(w, axis=1), np.sort(zeros, axis=1), np.sort(cc, axis=1),
         np.sort(c0, axis=1), np.sort(np.minimum(n10, n01), axis=1),
         np.sort(np.maximum(n10, n01), axis=1)], axis=1,
    ).ravel().astype(np.int16)
    return (summary, w.astype(np.int16), zeros.astype(np.int16),
            cc.astype(np.int16), n10.astype(np.int16),
            n01.astype(np.int16), c0.astype(np.int16))


def _embed_feasible(
    kept_w: np.ndarray,
    kept_zeros: np.ndarray,
    kept_cc: np.ndarray,
    kept_n10: np.ndarray,
    kept_n01: np.ndarray,
    kept_c0: np.ndarray,
    cand_w: np.ndarray,
    cand_zeros: np.ndarray,
    cand_cc: np.ndarray,
    cand_n10: np.ndarray,
    cand_n01: np.ndarray,
    cand_c0: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """For each kept entry, which of the candidate's reflected pairs can each
    kept pair map onto with all weight-class counts dominated?

    Arguments are the non-summary tables of :func:`_weight_tables`, kept_*
    carrying a leading axis of P entries. Returns (feas, masks): feas[p]
    False proves no centralizer relabeling embeds kept entry p in the
    candidate; masks[p] holds per-kept-pair bitmasks of admissible image
    pairs, on which the caller still owes a perfect-matching check. A
    witness maps channel j to a channel k with dominated one- and
    zero-counts in every weight class, and maps pairs to pairs, straight or
    end-swapped, with dominated per-class counts of every two-bit pattern.
    """
    n = cand_w.shape[1]
    h = n // 2
    # ok_ch[e, j, k]: channel j of kept entry e may map to candidate channel k.
    ok_ch = (
        (kept_w[:, :, :, None] <= cand_w[None, :, None, :])
        & (kept_zeros[:, :, :, None] <= cand_zeros[None, :, None, :])
    ).all(axis=1)
    inv_ok = (
        (kept_cc[:, :, :, None] <= cand_cc[None, :, None, :])
        & (kept_c0[:, :, :, None] <= cand_c0[None, :, None, :])
    ).all(axis=1)
    same_ok = (
        (kept_n10[:, :, :, None] <= cand_n10[None, :, None, :])
        & (kept_n01[:, :, :, None] <= cand_n01[None, :, None, :])
    ).all(axis=1)
    swap_ok = (
        (kept_n10[:, :, :, None] <= cand_n01[None, :, None, :])
        & (kept_n01[:, :, :, None] <= cand_n10[None, :, None, :])
    ).all(axis=1)
    lo = np.arange(h)
    hi = n - 1 - lo
    straight = ok_ch[:, lo[:, None], lo[None, :]] & ok_ch[:, hi[:, None], hi[None, :]]
    flipped = ok_ch[:, lo[:, None], hi[None, :]] & ok_ch[:, hi[:, None], lo[None, :]]
    ok = inv_ok & ((straight & same_ok) | (flipped & swap_ok))
    feas = ok.any(axis=2).all(axis=1)
    weights = np.int64(1) << np.arange(h, dtype=np.int64)
    masks = (ok * weights[None, None, :]).sum(axis=2)
    return feas, masks


def _prune_ordered(
    candidates: list[_Candidate],
    n: int,
    seed: int,
    restarts: int,
    negated_branch: bool,
    exact_node_budget: int | None = None,
) -> list[_Candidate]:
    """Keep the minimal candidates under centralizer subsumption.

    Candidates must be sorted ascending by (size, text) and deduplicated by
    output set. Each is dropped iff some kept candidate's output relabels
    into it; kept candidates are final because a subsumer is never larger
    than what it subsumes. A cascade of necessary conditions cuts the kept
    list down per branch before any matcher runs: profile block sums,
    pointwise profile dominance, sorted weight-class summary dominance, then
    per-channel and per-pair weight-class dominance; survivors still owe a
    perfect-matching check, paid lazily in the match loop.
    """
    h = n // 2
    plen = n + (n + 1) + 4 * h
    slen = (2 * n + 4 * h) * (n + 1)
    branches = 2 if negated_branch else 1
    kept: list[_Candidate] = []
    kept_sides: list[MatchSide] = []
    cap = 1024
    kept_pre = np.empty((branches, cap, 4), dtype=np.int32)
    kept_prof = np.empty((branches, cap, plen), dtype=np.int32)
    kept_sum = np.empty((branches, cap, slen), dtype=np.int16)
    kept_tab = [np.empty((branches, cap) + shape, dtype=np.int16)
                for shape in [(n + 1, n), (n + 1, n)] + [(n + 1, h)] * 4]
    next_report = _time.monotonic() + 30.0
    for done, cand in enumerate(candidates):
        if _time.monotonic() >= next_report:
            logger.info("prune progress: %d/%d candidates, %d kept",
                        done, len(candidates), len(kept))
            next_report = _time.monotonic() + 30.0
        cand_set = OutputSet(n, _unpack_words(cand.packed, n))
        side = MatchSide(cand_set)
        prof = _side_profile(side)
        pre = _profile_scalars(prof, n)
        ctables = _weight_tables(side)
        k = len(kept)
        branch_masks: list[dict[int, np.ndarray]] = []
        for br in range(branches):
            sel = np.flatnonzero(np.all(kept_pre[br, :k] <= pre, axis=1))
            rows: dict[int, np.ndarray] = {}
            if sel.size:
                sel = sel[np.all(kept_prof[br, sel] <= prof, axis=1)]
            if sel.size:
                fine = np.all(kept_sum[br, sel] <= ctables[0], axis=1)
                sel = sel[fine]
            if sel.size:
                feas, masks = _embed_feasible(
                    *(tab[br, sel] for tab in kept_tab), *ctables[1:])
                for r in np.flatnonzero(feas):
                    rows[int(sel[r])] = masks[r]
            branch_masks.append(rows)
        if branches == 2:
            passing = np.array(
                sorted(branch_masks[0].keys() | branch_masks[1].keys()),
                dtype=np.int64)
        else:
            passing = np.fromiter(branch_masks[0], dtype=np.int64,
                                  count=len(branch_masks[0]))
        if passing.size > 1:
            # Likely subsumers first: the nearer a kept profile, the likelier
            # its entry relabels into this candidate.
            dist = np.abs(kept_prof[0, passing] - prof).sum(axis=1)
            passing = passing[np.argsort(dist, kind="stable")]
        subsumed = False
        for idx in passing:
            # The deferred matching check: most candidates are subsumed by an
            # early entry, so per-pair image masks are only priced out here.
            row = branch_masks[0].get(int(idx))
            plain_ok = row is not None and _has_perfect_matching(
                [int(x) for x in row], h)
            neg_ok = False
            if negated_branch:
                row = branch_masks[1].get(int(idx))
                neg_ok = row is not None and _has_perfect_matching(
                    [int(x) for x in row], h)
            if not (plain_ok or neg_ok):
                continue
            small = kept_sides[idx]
            witness = heuristic_match(
                small.set, cand_set, restarts=restarts, seed=seed,
                group=REFLECTION_CENTRALIZER,
                plain_branch=plain_ok, negated_branch=neg_ok,
                a_side=small, b_side=side)
            if witness is None:
                witness = exact_match(
                    small.set, cand_set, group=REFLECTION_CENTRALIZER,
                    plain_branch=plain_ok, negated_branch=neg_ok,
                    max_nodes=exact_node_budget, a_side=small, b_side=side)
            if witness is not None:
                subsumed = True
                break
        if not subsumed:
            if k == cap:
                cap *= 2

                def _grow(a: np.ndarray) -> np.ndarray:
                    g = np.empty((a.shape[0], cap) + a.shape[2:], dtype=a.dtype)
                    g[:, :k] = a[:, :k]
                    return g

                kept_pre = _grow(kept_pre)
                kept_prof = _grow(kept_prof)
                kept_sum = _grow(kept_sum)
                kept_tab = [_grow(t) for t in kept_tab]
            sides = [side]
            if negated_branch:
                sides.append(side.complemented())
            for br, bside in enumerate(sides):
                if br == 0:
                    bprof, btables = prof, ctables
                else:
                    bprof = _side_profile(bside)
                    btables = _weight_tables(bside)
                kept_pre[br, k] = _profile_scalars(bprof, n)
                kept_prof[br, k] = bprof
                kept_sum[br, k] = btables[0]
                for tab, val in zip(kept_tab, btables[1:]):
                    tab[br, k] = val
            kept.append(cand)
            kept_sides.append(side)
    return kept


def _materialize(n: int, cand: _Candidate) -> PrefixEntry:
    parent_net, extra = cand.build
    if parent_net is None:
        net = parse_single_line(cand.text, n=n) if cand.text else Network(n)
    elif extra is None:
        net = parent_net
    else:
        net = Network(n, parent_net.layers + (Layer(extra),))
    entry = PrefixEntry(net, OutputSet(n, _unpack_words(cand.packed, n)))
    assert str(net) == cand.text, f"canonical text mismatch: {net} vs {cand.text}"
    return entry


def _layer_text(parent_text: str, comps: Sequence[Comparator]) -> str:
    layer_str = "[" + ",".join(str(c) for c in sorted(comps)) + "]"
    return f"{parent_text};{layer_str}" if parent_text else layer_str


# ---------------------------------------------------------------------------
# Layer-by-layer enumeration


def _active_orbits(
    words: np.ndarray, orbits: Sequence[tuple[Comparator, ...]],
    masks: Sequence[int], exclude_mask: int = 0,
) -> tuple[list[tuple[Comparator, ...]], list[int]]:
    """Orbits that change the output set (some vector has 1 above 0 on a pair)."""
    one = np.uint32(1)
    act_orbits, act_masks = [], []
    for orbit, mask in zip(orbits, masks):
        if mask & exclude_mask:
            continue
        for c in orbit:
            hit = ((words >> np.uint32(c.lo)) & ~(words >> np.uint32(c.hi))) & one
            if hit.any():
                act_orbits.append(orbit)
                act_masks.append(mask)
                break
    return act_orbits, act_masks


def _advance_dedup(words: np.ndarray, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Apply disjoint comparator pairs and return the sorted deduplicated set."""
    w = words
    one = np.uint32(1)
    for i, j in pairs:
        flip = ((w >> np.uint32(i)) & ~(w >> np.uint32(j))) & one
        w = w ^ flip * np.uint32((1 << i) | (1 << j))
    w = np.sort(w)
    keep = np.empty(w.size, dtype=bool)
    keep[0] = True
    np.not_equal(w[1:], w[:-1], out=keep[1:])
    return w[keep]


def _extend_entry_layers(
    entry: PrefixEntry,
    orbits: Sequence[tuple[Comparator, ...]],
    masks: Sequence[int],
    sink: dict[bytes, tuple],
) -> int:
    """Push every child of ``entry`` by one non-empty symmetric layer into sink.

    Only layers made of active orbits are generated: a layer containing an
    inactive orbit produces the same output as the layer without it, so the
    canonical prune would discard one of the two anyway. The DFS shares the
    advance work of common orbit prefixes. Sink values are
    (out_size, text, parent_net, comparators) keyed by packed output words;
    key collisions keep the lexicographically least text.
    """
    n = entry.net.n
    parent_text = str(entry.net)
    parent_net = entry.net
    act_orbits, act_masks = _active_orbits(entry.out.vectors, orbits, masks)
    count = 0

    def rec(start: int, used: int, words: np.ndarray, comps: tuple[Comparator, ...]):
        nonlocal count
        for idx in range(start, len(act_orbits)):
            if used & act_masks[idx]:
                continue
            orbit = act_orbits[idx]
            child = _advance_dedup(words, [(c.lo, c.hi) for c in orbit])
            child_comps = comps + orbit
            text = _layer_text(parent_text, child_comps)
            key = _pack_words(child, n)
            prev = sink.get(key)
            if prev is None or text < prev[1]:
                sink[key] = (child.size, text, parent_net, child_comps)
            count += 1
            rec(idx + 1, used | act_masks[idx], child, child_comps)

    rec(0, 0, entry.out.vectors, ())
    return count


def _sorted_candidates(sink: dict[bytes, tuple]) -> list[_Candidate]:
    return [
        _Candidate(v[0], v[1], k, (v[2], v[3]))
        for k, v in sorted(sink.items(), key=lambda kv: (kv[1][0], kv[1][1]))
    ]


def generate_and_prune(
    n: int,
    depth: int,
    seed: int = 0,
    restarts: int = 10,
    exact_node_budget: int | None = None,
) -> list[PrefixPool]:
    """Enumerate reflection-symmetric prefixes layer by layer, pruning each.

    Returns the pool after each layer (index = depth), starting with the
    depth-0 pool holding only the empty prefix. Deterministic given the seed:
    candidate order is (out_size, text) and the exact matcher settles every
    pair the heuristic misses, so ``restarts`` only tunes speed, never the
    pool contents.

    The negated matching branch is skipped: symmetric prefixes have
    complement-closed output sets (complement = reflection relabeling of the
    set), so a negated witness always implies a plain one.
    """
    if n % 2:
        raise ValueError("symmetric search needs an even channel count")
    orbits = comparator_orbits(n)
    masks = [_orbit_channel_mask(o) for o in orbits]
    root = PrefixEntry(Network(n), full_output_set(n))
    pools = [PrefixPool(n, 0, (root,))]
    for d in range(1, depth + 1):
        sink: dict[bytes, tuple] = {}
        raw = 0
        for entry in pools[-1]:
            raw += _extend_entry_layers(entry, orbits, masks, sink)
        candidates = _sorted_candidates(sink)
        sink.clear()
        logger.info(
            "depth %d: %d raw children, %d distinct output sets", d, raw, len(candidates))
        kept = _prune_ordered(
            candidates, n, seed=seed, restarts=restarts, negated_branch=False,
            exact_node_budget=exact_node_budget)
        entries = tuple(_materialize(n, c) for c in kept)
        pools.append(PrefixPool(n, d, entries))
        sizes = pools[-1].out_sizes()
        logger.info(
            "depth %d: pool size %d, out_size min %d max %d",
            d, len(entries), min(sizes), max(sizes))
    return pools


# ---------------------------------------------------------------------------
# The 16-channel depth-5 prefix


def van_voorhis_16_prefix(dimension_order: Sequence[int] = (0, 1, 2, 3)) -> Network:
    """First five layers of the classic 16-channel construction.

    Layers 1-4 pair channels differing in exactly one bit of their 4-bit
    address, one bit per layer in the given order; layer 5 pairs channels of
    equal Hamming weight. The result is reflection-symmetric because the
    reversal is bitwise complement of the address.
    """
    if sorted(dimension_order) != [0, 1, 2, 3]:
        raise ValueError(f"dimension_order must permute 0..3, got {dimension_order!r}")
    layers = []
    for bit in dimension_order:
        step = 1 << bit
        layers.append(Layer(
            Comparator(i, i + step) for i in range(16) if not i & step))
    layers.append(Layer(
        Comparator(a, b)
        for a, b in ((1, 2), (4, 8), (3, 12), (5, 10), (6, 9), (7, 11), (13, 14))))
    return Network(16, layers)


# ---------------------------------------------------------------------------
# Stacking the 16- and 12-channel parts into a symmetric 28-channel prefix


def interleaved_embedding(outer_n: int, inner_n: int) -> ChannelPermutation:
    """Relabeling that nests an inner block inside an outer block symmetrically.

    Positions 0..outer_n-1 (the outer part) map to the first and last
    outer_n/2 channels; positions outer_n.. map to the middle block. Both
    maps are increasing, so comparators keep their orientation, and each
    part's reflection aligns with the reflection of the whole, so a stack of
    two symmetric parts relabels to a symmetric network.
    """
    if outer_n % 2:
        raise ValueError("outer part must have an even channel count")
    half = outer_n // 2
    mapping = [k if k < half else k + inner_n for k in range(outer_n)]
    mapping += [half + m for m in range(inner_n)]
    return ChannelPermutation(mapping)


def stack_symmetric(outer: Network, inner: Network) -> tuple[Network, ChannelPermutation]:
    """Stack two symmetric networks into one symmetric network.

    Returns the relabeled stack and the embedding used (stacked position ->
    final channel).
    """
    embed = interleaved_embedding(outer.n, inner.n)
    return permute_channels(stack(outer, inner), embed), embed


def stacked_output_set(
    outer_out: OutputSet, inner_out: OutputSet, embed: ChannelPermutation
) -> OutputSet:
    """Output set of a relabeled stack: product, then the same relabeling."""
    plain = product_stack_outputs(outer_out, inner_out)
    words = permute_words(plain.vectors, embed.mapping)
    words.sort()
    return OutputSet(plain.n, words)


def build_initial_pool_28(
    pool12: PrefixPool, variants16: Sequence[Network] | None = None
) -> PrefixPool:
    """Cross every 16-channel prefix variant with every 12-channel pool entry.

    Entries are reflection-symmetric 28-channel prefixes whose output sets
    are exact products of the parts' output sets.
    """
    if variants16 is None:
        variants16 = [van_voorhis_16_prefix()]
    entries = []
    depth = 0
    for v16 in variants16:
        out16 = output_set(v16)
        for entry12 in pool12:
            net, embed = stack_symmetric(v16, entry12.net)
            out = stacked_output_set(out16, entry12.out, embed)
            entries.append(PrefixEntry(net, out))
            depth = max(depth, net.depth)
    return PrefixPool(28, depth, tuple(entries))


# ---------------------------------------------------------------------------
# Greedy one-orbit extension of the last layer


def greedy_extend(
    pool: PrefixPool,
    pool_cap: int = 64,
    max_steps: int = 14,
    seed: int = 0,
    restarts: int = 10,
    exact_node_budget: int | None = 100_000,
) -> PrefixPool:
    """Grow one extra layer greedily, one comparator orbit at a time.

    Each step extends every pool entry by every active orbit disjoint from
    its extension layer, prunes the union of old and new entries, and keeps
    the pool_cap smallest. The extension layer is the (depth+1)-th layer;
    entries that cannot be extended further carry over unchanged.
    """
    n = pool.n
    base_depth = pool.depth
    orbits = comparator_orbits(n)
    masks = [_orbit_channel_mask(o) for o in orbits]
    current: list[_Candidate] = [
        _Candidate(e.out_size, str(e.net), _pack_words(e.out.vectors, n),
                   (e.net, None))
        for e in pool
    ]
    for step in range(1, max_steps + 1):
        sink: dict[bytes, tuple] = {
            c.packed: (c.size, c.text, c.build[0], c.build[1]) for c in current}
        grew = False
        for cand in current:
            parent_net, extra = cand.build
            if extra is None:
                # Entry straight from the input pool: split off its own
                # extension layer if it already has one.
                trunk = Network(n, parent_net.layers[:base_depth])
                ext_comps = (
                    tuple(parent_net.layers[base_depth])
                    if len(parent_net.layers) > base_depth else ())
            else:
                trunk = parent_net
                ext_comps = tuple(extra)
            used = 0
            for c in ext_comps:
                used |= (1 << c.lo) | (1 << c.hi)
            words = _unpack_words(cand.packed, n)
            act_orbits, _ = _active_orbits(words, orbits, masks, exclude_mask=used)
            trunk_text = str(trunk)
            for orbit in act_orbits:
                comps = ext_comps + orbit
                child = _advance_dedup(words, [(c.lo, c.hi) for c in orbit])
                text = _layer_text(trunk_text, comps)
                key = _pack_words(child, n)
                prev = sink.get(key)
                if prev is None or text < prev[1]:
                    sink[key] = (child.size, text, trunk, comps)
                grew = True
        if not grew:
            logger.info("greedy step %d: no extendable entry, stopping", step)
            break
        candidates = _sorted_candidates(sink)
        kept = _prune_ordered(
            candidates, n, seed=seed, restarts=restarts, negated_branch=False,
            exact_node_budget=exact_node_budget)
        current = kept[:pool_cap]
        logger.info(
            "greedy step %d: %d candidates, %d kept, out_size min %d",
            step, len(candidates), len(current), current[0].size)
    entries = tuple(_materialize(n, c) for c in current)
    depth = max(e.net.depth for e in entries) if entries else base_depth
    return PrefixPool(n, depth, entries)


# ---------------------------------------------------------------------------
# Pool persistence and output recomputation


def save_pool(pool: PrefixPool, path, mode: str = "symmetric", seed: int = 0) -> None:
    """Line records 'out_size=<k> depth=<d> net=<single-line layers>'."""
    with open(path, "w") as fh:
        fh.write(f"n={pool.n} depth={pool.depth} mode={mode} seed={seed}\n")
        for e in pool:
            fh.write(f"out_size={e.out_size} depth={e.net.depth} net={e.net}\n")


def load_pool(path) -> PrefixPool:
    """Read a pool file, recomputing every entry's output set exactly."""
    entries = []
    with open(path) as fh:
        header = dict(part.split("=", 1) for part in fh.readline().split())
        n = int(header["n"])
        depth = int(header["depth"])
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = dict(part.split("=", 1) for part in line.split(maxsplit=2))
            net = parse_single_line(fields["net"], n=n)
            out = recompute_output(net)
            if len(out) != int(fields["out_size"]):
                raise ValueError(
                    f"stored out_size={fields['out_size']} but recomputation "
                    f"gives {len(out)} for {net}")
            entries.append(PrefixEntry(net, out))
    return PrefixPool(n, depth, tuple(entries))


def recompute_output(net: Network, outer_n: int = 16) -> OutputSet:
    """From-scratch output set; for n > 24 uses the two-block decomposition.

    Networks built by this module keep their first layers inside the outer
    (first and last outer_n/2 channels) and inner blocks; those layers are
    evaluated per block over 2^outer_n + 2^inner inputs and combined as a
    product, and any later cross-block layers are advanced directly.
    """
    if net.n <= 24:
        return output_set(net)
    inner_n = net.n - outer_n
    embed = interleaved_embedding(outer_n, inner_n)
    inv = embed.inverse()
    outer_pos = set(range(outer_n))
    split = 0
    for layer in net.layers:
        if all(
            (inv(c.lo) in outer_pos) == (inv(c.hi) in outer_pos) for c in layer):
            split += 1
        else:
            break
    outer_layers, inner_layers = [], []
    for layer in net.layers[:split]:
        outs, ins = [], []
        for c in layer:
            a, b = inv(c.lo), inv(c.hi)
            if a in outer_pos:
                outs.append(Comparator(min(a, b), max(a, b)))
            else:
                ins.append(Comparator(min(a, b) - outer_n, max(a, b) - outer_n))
        outer_layers.append(Layer(outs))
        inner_layers.append(Layer(ins))
    out = stacked_output_set(
        output_set(Network(outer_n, outer_layers)),
        output_set(Network(inner_n, inner_layers)),
        embed)
    for layer in net.layers[split:]:
        out = advance_output_set(out, layer)
    return out
