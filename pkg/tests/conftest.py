import numpy as np
import pytest

from crashnet.minet import Edge, SpanningTree


def make_tree(n, pairs, mi=None):
    """Spanning tree on nodes ``N0..N{n-1}``; ``mi`` defaults to 1 on every edge."""
    mi = mi or [1.0] * len(pairs)
    edges = tuple(Edge(min(i, j), max(i, j), 1.0 / m, m) for (i, j), m in zip(pairs, mi))
    return SpanningTree(tuple(f"N{k}" for k in range(n)), edges)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_csv(path, text):
    path.write_text(text)
    return path


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""
    def _record(number, ok, detail):
        line = f"ACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
