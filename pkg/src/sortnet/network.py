"""Comparator-network data model, text serialization, and structural transforms.

A network is an ordered sequence of layers; a layer is a set of comparators
on pairwise-disjoint channels. Comparators are always kept in min-max form:
the smaller input exits on the ``lo`` channel, the larger on ``hi``. All
values are immutable and safe to share between workers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence


class NetworkFormatError(ValueError):
    """A network listing that cannot be parsed, with the offending line."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True, order=True)
class Comparator:
    """Two-channel gate routing the minimum to ``lo`` and the maximum to ``hi``."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo < 0 or self.lo >= self.hi:
            raise ValueError(f"degenerate comparator ({self.lo},{self.hi})")

    def reflected(self, n: int) -> "Comparator":
        return Comparator(n - 1 - self.hi, n - 1 - self.lo)

    def __str__(self) -> str:
        return f"({self.lo},{self.hi})"


@dataclass(frozen=True)
class Layer:
    """A set of comparators on disjoint channels; executes in one parallel step."""

    comparators: tuple[Comparator, ...]

    def __init__(self, comparators: Iterable[Comparator]):
        comps = tuple(sorted(comparators))
        seen: set[int] = set()
        for c in comps:
            if c.lo in seen or c.hi in seen:
                raise ValueError(f"channel reused within a layer: {c}")
            seen.add(c.lo)
            seen.add(c.hi)
        object.__setattr__(self, "comparators", comps)

    @property
    def channels(self) -> frozenset[int]:
        return frozenset(ch for c in self.comparators for ch in (c.lo, c.hi))

    def __len__(self) -> int:
        return len(self.comparators)

    def __iter__(self):
        return iter(self.comparators)

    def __str__(self) -> str:
        return "[" + ",".join(str(c) for c in self.comparators) + "]"


@dataclass(frozen=True)
class Network:
    """A comparator network on ``n`` channels.

    ``depth`` counts non-empty layers only; empty layers are representable
    (needed for stack padding) but contribute no depth.
    """

    n: int
    layers: tuple[Layer, ...]

    def __init__(self, n: int, layers: Iterable[Layer] = ()):
        if n < 1:
            raise ValueError(f"channel count must be positive, got {n}")
        layers = tuple(layers)
        for layer in layers:
            for c in layer:
                if c.hi >= n:
                    raise ValueError(f"comparator {c} out of range for n={n}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "layers", layers)

    @property
    def depth(self) -> int:
        return sum(1 for layer in self.layers if len(layer) > 0)

    @property
    def size(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def comparator_pairs(self) -> list[list[tuple[int, int]]]:
        """Layers as plain (lo, hi) tuples, for numeric code."""
        return [[(c.lo, c.hi) for c in layer] for layer in self.layers]

    def __str__(self) -> str:
        return format_network(self, header=False).rstrip("\n").replace("\n", ";")


@dataclass(frozen=True)
class ChannelPermutation:
    """A bijection on the channel set [n]."""

    mapping: tuple[int, ...]

    def __init__(self, mapping: Sequence[int]):
        mapping = tuple(mapping)
        if sorted(mapping) != list(range(len(mapping))):
            raise ValueError("mapping is not a bijection on [n]")
        object.__setattr__(self, "mapping", mapping)

    @classmethod
    def identity(cls, n: int) -> "ChannelPermutation":
        return cls(range(n))

    @classmethod
    def reflection(cls, n: int) -> "ChannelPermutation":
        """The channel reversal i -> n-1-i."""
        return cls(range(n - 1, -1, -1))

    @property
    def n(self) -> int:
        return len(self.mapping)

    def __call__(self, channel: int) -> int:
        return self.mapping[channel]

    def compose(self, other: "ChannelPermutation") -> "ChannelPermutation":
        """self after other: (self.compose(other))(i) = self(other(i))."""
        return ChannelPermutation(tuple(self.mapping[j] for j in other.mapping))

    def inverse(self) -> "ChannelPermutation":
        inv = [0] * len(self.mapping)
        for i, j in enumerate(self.mapping):
            inv[j] = i
        return ChannelPermutation(inv)

    def apply_word(self, word: int) -> int:
        """Relabel a bit vector: bit self(i) of the result is bit i of ``word``."""
        out = 0
        for i, j in enumerate(self.mapping):
            out |= ((word >> i) & 1) << j
        return out

    def cycles(self) -> str:
        """Cycle-notation rendering, '()' for the identity."""
        seen: set[int] = set()
        parts = []
        for i in range(len(self.mapping)):
            if i in seen or self.mapping[i] == i:
                continue
            cyc = [i]
            j = self.mapping[i]
            while j != i:
                seen.add(j)
                cyc.append(j)
                j = self.mapping[j]
            parts.append("(" + " ".join(map(str, cyc)) + ")")
        return "".join(parts) or "()"


_PAIR_RE = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)")
_LAYER_RE = re.compile(r"^\[\s*(?:\(\s*\d+\s*,\s*\d+\s*\)(?:\s*,\s*\(\s*\d+\s*,\s*\d+\s*\))*\s*)?\]$")


def parse_network(text: str, n: int | None = None) -> Network:
    """Parse a multi-line layer listing into a Network.

    Each line is a bracketed comma-separated list of (a,b) pairs, one line
    per layer. An optional ``n=<int>`` header fixes the channel count;
    otherwise it is inferred as max index + 1. Lines starting with '#' are
    ignored.
    """
    layers: list[Layer] = []
    max_ch = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("n="):
            try:
                declared = int(line[2:].strip())
            except ValueError:
                raise NetworkFormatError(f"bad channel-count header {line!r}", lineno)
            if n is not None and n != declared:
                raise NetworkFormatError(
                    f"header n={declared} conflicts with requested n={n}", lineno)
            n = declared
            continue
        if not _LAYER_RE.match(line):
            raise NetworkFormatError(f"malformed layer listing {line!r}", lineno)
        comps = []
        for a, b in _PAIR_RE.findall(line):
            a, b = int(a), int(b)
            if a == b:
                raise NetworkFormatError(f"degenerate comparator ({a},{b})", lineno)
            comps.append(Comparator(min(a, b), max(a, b)))
            max_ch = max(max_ch, a, b)
        try:
            layers.append(Layer(comps))
        except ValueError as exc:
            raise NetworkFormatError(str(exc), lineno) from exc
    if n is None:
        if max_ch < 0:
            raise NetworkFormatError("no channel count: empty listing without n= header")
        n = max_ch + 1
    if max_ch >= n:
        raise NetworkFormatError(f"channel {max_ch} out of range for n={n}")
    return Network(n, layers)


def format_network(net: Network, header: bool = True) -> str:
    """Canonical text form: optional n= header, one layer per line.

    parse_network(format_network(net)) reproduces ``net`` bit-exactly.
    """
    lines = []
    if header:
        lines.append(f"n={net.n}")
    lines.extend(str(layer) for layer in net.layers)
    return "\n".join(lines) + "\n"


def parse_single_line(text: str, n: int | None = None) -> Network:
    """Parse the ';'-separated single-line layer form used in pool files."""
    return parse_network(text.replace(";", "\n"), n=n)


def reflect(net: Network) -> Network:
    """Mirror every comparator through the channel reversal i -> n-1-i."""
    n = net.n
    return Network(n, (Layer(c.reflected(n) for c in layer) for layer in net.layers))


def is_reflection_symmetric(net: Network) -> bool:
    """True iff the network equals its reflection layer by layer."""
    return reflect(net) == net


def compose(a: Network, b: Network) -> Network:
    """Concatenate: run ``a`` first, then ``b``. Depth adds."""
    if a.n != b.n:
        raise ValueError(f"channel-count mismatch: {a.n} vs {b.n}")
    return Network(a.n, a.layers + b.layers)


def stack(top: Network, bottom: Network) -> Network:
    """Place two networks on disjoint channel blocks, layer by layer.

    Bottom channels are offset by top.n; the shorter network is padded with
    empty layers. Sizes add; depth is the max of the two depths.
    """
    off = top.n
    depth = max(len(top.layers), len(bottom.layers))
    layers = []
    for t in range(depth):
        comps = list(top.layers[t]) if t < len(top.layers) else []
        if t < len(bottom.layers):
            comps.extend(Comparator(c.lo + off, c.hi + off) for c in bottom.layers[t])
        layers.append(Layer(comps))
    return Network(top.n + bottom.n, layers)


def permute_channels(net: Network, sigma: ChannelPermutation) -> Network:
    """Relabel channels by ``sigma`` and re-standardize each comparator.

    Re-standardization can flip min-max orientation when sigma reverses a
    pair, so the output-set relabeling identity only holds for permutations
    that keep every comparator ordered (identity, the reflection, block
    relabelings); callers relying on output sets must stay in that regime.
    """
    if sigma.n != net.n:
        raise ValueError(f"permutation on {sigma.n} channels, network has {net.n}")
    layers = []
    for layer in net.layers:
        comps = []
        for c in layer:
            a, b = sigma(c.lo), sigma(c.hi)
            comps.append(Comparator(min(a, b), max(a, b)))
        layers.append(Layer(comps))
    return Network(net.n, layers)


def project_drop_last_channel(net: Network) -> Network:
    """Drop channel n-1 and every comparator incident to it.

    Equivalent to pinning the maximum value on the last channel: if ``net``
    sorts, the projection sorts on n-1 channels.
    """
    if net.n < 2:
        raise ValueError("cannot project a network with fewer than 2 channels")
    last = net.n - 1
    return Network(
        net.n - 1,
        (Layer(c for c in layer if c.hi != last) for layer in net.layers),
    )
