"""Shared fixtures, hypothesis strategies, and the acceptance summary hook."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import strategies as st

from sortnet.network import Comparator, Layer, Network, parse_network

DATA_DIR = Path(__file__).parent / "data"
BUNDLED_N28 = DATA_DIR / "n28d13.net"


@pytest.fixture(scope="session")
def bundled_net() -> Network:
    return parse_network(BUNDLED_N28.read_text())


@st.composite
def layers(draw, n: int) -> Layer:
    """A random (possibly empty) layer on n channels."""
    channels = draw(st.permutations(range(n)))
    comps = []
    for k in range(0, n - 1, 2):
        if draw(st.integers(0, 9)) < 6:
            a, b = channels[k], channels[k + 1]
            comps.append(Comparator(min(a, b), max(a, b)))
    return Layer(comps)


@st.composite
def networks(draw, min_n: int = 2, max_n: int = 10, max_depth: int = 4) -> Network:
    n = draw(st.integers(min_n, max_n))
    depth = draw(st.integers(0, max_depth))
    return Network(n, [draw(layers(n)) for _ in range(depth)])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per acceptance criterion that ran."""
    module = sys.modules.get("test_acceptance") or sys.modules.get(
        "tests.test_acceptance")
    results = getattr(module, "RESULTS", None) if module else None
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        name, verdict = results[num]
        terminalreporter.write_line(f"[criterion {num}] {name}: {verdict}")
