"""Bit-parallel evaluation of comparator networks on Boolean vectors.

Per the zero-one principle, a network sorts all inputs iff it sorts all 2^n
Boolean vectors, so everything here works on n-bit words: bit i of a word is
the value on channel i. A comparator (i,j) replaces bit i with AND and bit j
with OR, so channel 0 carries the minimum and a sorted word has all its ones
at the high-index end.

Exhaustive checks are bit-sliced: one uint64 lane word per channel holds that
channel's bit for 64 consecutive inputs, so a comparator costs two vector ops
for a whole batch of inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from sortnet.network import Layer, Network

# Inputs per bit-sliced batch (as a power of two). 2^22 inputs = 2^16 lane
# words per channel, ~15 MB of planes at n=28.
_BATCH_LOG2 = 22

# Lane patterns for channels 0..5: bit p of the word is the value of channel c
# for the input with in-word offset p, i.e. bit c of p.
_LOW_CHANNEL_PATTERNS = (
    0xAAAAAAAAAAAAAAAA,
    0xCCCCCCCCCCCCCCCC,
    0xF0F0F0F0F0F0F0F0,
    0xFF00FF00FF00FF00,
    0xFFFF0000FFFF0000,
    0xFFFFFFFF00000000,
)


def sorted_word(n: int, ones: int) -> int:
    """The sorted n-bit vector with the given number of ones."""
    if not 0 <= ones <= n:
        raise ValueError(f"need 0 <= ones <= {n}, got {ones}")
    return ((1 << ones) - 1) << (n - ones)


def all_sorted_words(n: int) -> list[int]:
    """The n+1 sorted vectors on n channels, ascending."""
    return [sorted_word(n, k) for k in range(n + 1)]


def is_sorted(word: int, n: int) -> bool:
    """True iff bits are non-decreasing with channel index."""
    return (word & ~(word >> 1)) & ((1 << (n - 1)) - 1) == 0


def apply_network(net: Network, word: int) -> int:
    """Run one n-bit vector through the network (scalar reference path)."""
    for layer in net.layers:
        for c in layer:
            lo_bit = (word >> c.lo) & 1
            hi_bit = (word >> c.hi) & 1
            if lo_bit and not hi_bit:
                word ^= (1 << c.lo) | (1 << c.hi)
    return word


@dataclass(frozen=True)
class SortVerdict:
    """Outcome of exhaustive verification: sorts, or the least failing input."""

    sorts: bool
    counterexample: int | None = None

    def __bool__(self) -> bool:
        return self.sorts


def _iter_plane_batches(n: int):
    """Yield (base_input, planes) covering all 2^n inputs in ascending order.

    planes is an (n, words) uint64 array; planes[c] holds channel c's bit for
    inputs base_input .. base_input + 64*words - 1 (bit p of lane word w is
    input base_input + 64*w + p). For n < 6 only the low 2^n bits of the
    single lane word are meaningful.
    """
    total_words = max(1, (1 << n) >> 6)
    batch_words = min(total_words, 1 << max(0, _BATCH_LOG2 - 6))
    low = min(n, 6)
    for base_word in range(0, total_words, batch_words):
        words = min(batch_words, total_words - base_word)
        planes = np.empty((n, words), dtype=np.uint64)
        for c in range(low):
            planes[c] = np.uint64(_LOW_CHANNEL_PATTERNS[c])
        if n > 6:
            idx = np.arange(base_word, base_word + words, dtype=np.uint64)
            for c in range(6, n):
                bit = (idx >> np.uint64(c - 6)) & np.uint64(1)
                planes[c] = bit * np.uint64(0xFFFFFFFFFFFFFFFF)
        yield base_word << 6, planes


def _apply_layers_sliced(planes: np.ndarray, layers: Sequence[Sequence[tuple[int, int]]]):
    for layer in layers:
        for i, j in layer:
            # planes[i] is a view; assigning through it would corrupt the
            # operand of the second expression, so finish the OR first.
            lo = planes[i] & planes[j]
            planes[j] |= planes[i]
            planes[i] = lo


def verify_sorting(net: Network) -> SortVerdict:
    """Exhaustively check all 2^n Boolean inputs, bit-sliced 64 at a time.

    Returns the numerically least counterexample if the network fails.
    """
    n = net.n
    if n > 32:
        raise ValueError(f"exhaustive verification limited to n <= 32, got {n}")
    if n == 1:
        return SortVerdict(True)
    layers = net.comparator_pairs()
    valid = np.uint64((1 << min(1 << n, 64)) - 1 if n < 6 else 0xFFFFFFFFFFFFFFFF)
    for base_input, planes in _iter_plane_batches(n):
        _apply_layers_sliced(planes, layers)
        viol = np.zeros(planes.shape[1], dtype=np.uint64)
        for c in range(n - 1):
            viol |= planes[c] & ~planes[c + 1]
        viol &= valid
        nz = np.flatnonzero(viol)
        if nz.size:
            w = int(nz[0])
            v = int(viol[w])
            bit = (v & -v).bit_length() - 1
            return SortVerdict(False, base_input + 64 * w + bit)
    return SortVerdict(True)


@dataclass(frozen=True, eq=False)
class OutputSet:
    """The set of vectors a network can emit, as a sorted unique uint32 array."""

    n: int
    vectors: np.ndarray

    def __post_init__(self):
        if self.n > 32:
            raise ValueError(f"word-based output sets limited to n <= 32, got {self.n}")
        object.__setattr__(self, "vectors", np.asarray(self.vectors, dtype=np.uint32))

    def __len__(self) -> int:
        return int(self.vectors.size)

    def __contains__(self, word: int) -> bool:
        i = int(np.searchsorted(self.vectors, np.uint32(word)))
        return i < len(self) and int(self.vectors[i]) == word

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, OutputSet)
            and self.n == other.n
            and np.array_equal(self.vectors, other.vectors)
        )

    def __hash__(self):
        return hash((self.n, self.vectors.tobytes()))


def full_output_set(n: int) -> OutputSet:
    """All 2^n vectors: the output set of the empty network."""
    if n > 24:
        raise ValueError(f"full enumeration limited to n <= 24, got {n}")
    return OutputSet(n, np.arange(1 << n, dtype=np.uint32))


def apply_pairs_inplace(words: np.ndarray, pairs: Iterable[tuple[int, int]]) -> np.ndarray:
    """Advance an array of vectors through comparators (i,j), mutating it.

    Uses the conditional-swap identity: a vector changes iff bit i is 1 and
    bit j is 0, in which case both bits flip.
    """
    one = words.dtype.type(1)
    for i, j in pairs:
        flip = ((words >> words.dtype.type(i)) & ~(words >> words.dtype.type(j))) & one
        words ^= flip * words.dtype.type((1 << i) | (1 << j))
    return words


def advance_output_set(s: OutputSet, layer: Layer) -> OutputSet:
    """Image of an output set under one layer, deduplicated."""
    words = apply_pairs_inplace(s.vectors.copy(), [(c.lo, c.hi) for c in layer])
    return OutputSet(s.n, np.unique(words))


def output_set(net: Network) -> OutputSet:
    """Exhaustive output set over all 2^n inputs (n <= 24)."""
    s = full_output_set(net.n)
    for layer in net.layers:
        s = advance_output_set(s, layer)
    return s


def complement_output_set(s: OutputSet) -> OutputSet:
    """Bitwise-complement every vector on n bits (the ¬ of the matching rules)."""
    mask = np.uint32((1 << s.n) - 1)
    return OutputSet(s.n, (s.vectors ^ mask)[::-1].copy())


def permute_words(words: np.ndarray, mapping: Sequence[int]) -> np.ndarray:
    """Relabel channels of each vector: bit mapping[i] of the result is bit i."""
    out = np.zeros_like(words)
    one = words.dtype.type(1)
    for i, j in enumerate(mapping):
        out |= ((words >> words.dtype.type(i)) & one) << words.dtype.type(j)
    return out


def contains_all(s: OutputSet, words: np.ndarray) -> bool:
    """True iff every word in ``words`` belongs to the output set."""
    if words.size == 0:
        return True
    idx = np.searchsorted(s.vectors, words)
    if int(idx.max(initial=0)) >= len(s):
        return False
    return bool(np.all(s.vectors[idx] == words))


def product_stack_outputs(top: OutputSet, bottom: OutputSet) -> OutputSet:
    """Output set of two stacked networks: bottom vectors shifted by top.n.

    Iterating bottom-major keeps the result sorted without an extra sort,
    since every top word is below 2^top.n.
    """
    n = top.n + bottom.n
    if n > 32:
        raise ValueError(f"stacked output set needs n <= 32, got {n}")
    shifted = bottom.vectors.astype(np.uint64) << np.uint64(top.n)
    combo = (shifted[:, None] | top.vectors.astype(np.uint64)[None, :]).ravel()
    return OutputSet(n, combo.astype(np.uint32))


def _remove_unused_small(net: Network) -> Network:
    reach = full_output_set(net.n).vectors
    kept_layers = []
    for layer in net.layers:
        kept = []
        for c in layer:
            lo, hi = np.uint32(c.lo), np.uint32(c.hi)
            if np.any(((reach >> lo) & ~(reach >> hi)) & np.uint32(1)):
                kept.append(c)
        kept_layers.append(Layer(kept))
        reach = np.unique(apply_pairs_inplace(reach, [(c.lo, c.hi) for c in layer]))
    return Network(net.n, kept_layers)


def _remove_unused_sliced(net: Network) -> Network:
    layers = net.comparator_pairs()
    used = [[False] * len(layer) for layer in layers]
    valid = np.uint64((1 << min(1 << net.n, 64)) - 1 if net.n < 6 else 0xFFFFFFFFFFFFFFFF)
    for _, planes in _iter_plane_batches(net.n):
        for t, layer in enumerate(layers):
            for k, (i, j) in enumerate(layer):
                if not used[t][k] and np.any((planes[i] & ~planes[j]) & valid):
                    used[t][k] = True
                lo = planes[i] & planes[j]
                planes[j] |= planes[i]
                planes[i] = lo
        if all(all(row) for row in used):
            break
    return Network(
        net.n,
        (
            Layer(c for k, c in enumerate(layer) if used[t][k])
            for t, layer in enumerate(net.layers)
        ),
    )


def remove_unused_comparators(net: Network) -> Network:
    """Drop comparators that never see an unsorted input pair.

    A comparator (i,j) is unused when no vector reaching its layer has bit i
    set and bit j clear; removing it changes no output. Layer slots are kept
    (possibly empty) so remaining comparators stay in their original layers.
    """
    if net.n > 32:
        raise ValueError(f"exhaustive sweep limited to n <= 32, got {net.n}")
    if net.n <= 20:
        return _remove_unused_small(net)
    return _remove_unused_sliced(net)


def save_output_set(s: OutputSet, path) -> None:
    """Write the cache format: 'n=<n> count=<k>' header, hex words ascending."""
    with open(path, "w") as fh:
        fh.write(f"n={s.n} count={len(s)}\n")
        fh.write("".join(format(int(w), "x") + "\n" for w in s.vectors))


def load_output_set(path) -> OutputSet:
    with open(path) as fh:
        header = fh.readline().split()
        fields = dict(part.split("=", 1) for part in header)
        n, count = int(fields["n"]), int(fields["count"])
        vectors = np.fromiter((int(line, 16) for line in fh), dtype=np.uint32, count=count)
    return OutputSet(n, vectors)
