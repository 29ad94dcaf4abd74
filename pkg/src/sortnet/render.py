"""Knuth-style comparator-network diagrams, as ASCII art or SVG.

Channels are horizontal lines, comparators vertical segments. Comparators of
one layer share a column group; two comparators whose channel ranges overlap
get separate columns inside the group. Output is deterministic.
"""

from __future__ import annotations

from sortnet.network import Comparator, Layer, Network


def _layer_slots(layer: Layer) -> list[list[Comparator]]:
    """Greedy column assignment: overlapping channel ranges go to new columns."""
    slots: list[list[Comparator]] = []
    for c in sorted(layer):
        for slot in slots:
            if all(c.hi < o.lo or c.lo > o.hi for o in slot):
                slot.append(c)
                break
        else:
            slots.append([c])
    return slots


def render_ascii(net: Network, regions: list[tuple[str, int, int]] | None = None) -> str:
    """One text row per channel; 'x' endpoints joined by '|' across rows."""
    n = net.n
    cols: list[list[str]] = [["-"] * n]
    for layer in net.layers:
        for slot in _layer_slots(layer):
            col = ["-"] * n
            for c in slot:
                col[c.lo] = "x"
                col[c.hi] = "x"
                for r in range(c.lo + 1, c.hi):
                    col[r] = "|"
            cols.append(col)
            cols.append(["-"] * n)
        cols.append(["-"] * n)
    rows = ["".join(col[r] for col in cols) for r in range(n)]
    lines = []
    if regions:
        lines.append("regions: " + "; ".join(
            f"{name}=layers {a}-{b}" for name, a, b in regions))
    lines.extend(rows)
    return "\n".join(lines) + "\n"


_SVG_STYLE = (
    'stroke="black" stroke-width="2"'
)


def render_svg(net: Network, regions: list[tuple[str, int, int]] | None = None) -> str:
    """Minimal standalone SVG with the same column layout as the ASCII form."""
    n = net.n
    margin = 20
    row_gap = 24
    col_gap = 22
    layer_gap = 18
    # x position of each layer's column slots
    x = margin + col_gap
    layer_x: list[list[int]] = []
    slot_lists = [_layer_slots(layer) for layer in net.layers]
    for slots in slot_lists:
        xs = []
        for _ in slots:
            xs.append(x)
            x += col_gap
        layer_x.append(xs)
        x += layer_gap
    width = x + margin
    height = 2 * margin + row_gap * (n - 1)

    def y(ch: int) -> int:
        return margin + row_gap * ch

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
    ]
    if regions:
        for name, a, b in regions:
            idx = [i for i in (a - 1, b - 1) if 0 <= i < len(layer_x) and layer_x[i]]
            if not idx:
                continue
            x0 = layer_x[idx[0]][0] - col_gap // 2
            x1 = layer_x[idx[-1]][-1] + col_gap // 2
            parts.append(
                f'<rect x="{x0}" y="2" width="{x1 - x0}" height="{height - 4}" '
                f'fill="#dddddd" opacity="0.5"/>')
            parts.append(
                f'<text x="{x0 + 2}" y="{12}" font-size="10" '
                f'font-family="monospace">{name}</text>')
    for ch in range(n):
        parts.append(
            f'<line x1="{margin}" y1="{y(ch)}" x2="{width - margin}" '
            f'y2="{y(ch)}" stroke="black" stroke-width="1"/>')
    for slots, xs in zip(slot_lists, layer_x):
        for slot, cx in zip(slots, xs):
            for c in slot:
                parts.append(
                    f'<line x1="{cx}" y1="{y(c.lo)}" x2="{cx}" y2="{y(c.hi)}" '
                    f'{_SVG_STYLE}/>')
                for ch in (c.lo, c.hi):
                    parts.append(f'<circle cx="{cx}" cy="{y(ch)}" r="3"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
