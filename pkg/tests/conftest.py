from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import settings, strategies as st

from txpattern.ingest import TransactionalGraph

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def graph(edges, nodes=()):
    """Directed test graph from ``(u, v[, weight])`` tuples."""
    return TransactionalGraph.from_simple_edges(edges, nodes)


def node_names(n):
    return [f"n{i}" for i in range(n)]


@st.composite
def directed_graphs(draw, min_nodes=1, max_nodes=8):
    n = draw(st.integers(min_nodes, max_nodes))
    names = node_names(n)
    pairs = [(u, v) for u, v in itertools.permutations(names, 2)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    weights = draw(st.lists(st.integers(1, 3), min_size=len(chosen), max_size=len(chosen)))
    return graph([(u, v, w) for (u, v), w in zip(chosen, weights)], names)


def random_graph(rng: np.random.Generator, n: int, p: float, max_weight: int = 3):
    names = node_names(n)
    edges = []
    for u, v in itertools.permutations(names, 2):
        if rng.random() < p:
            edges.append((u, v, int(rng.integers(1, max_weight + 1))))
    return graph(edges, names)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report: tests append (letter, status, detail) lines here
ACCEPTANCE: list[tuple[str, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for letter, status, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{letter}: {status:4s} {detail}")
