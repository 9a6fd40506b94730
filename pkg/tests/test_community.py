from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given

from conftest import directed_graphs, graph, random_graph
from oracles import brute_force_modularity, partition_modularity
from txpattern.community import (
    cells,
    communities_from_snapshots,
    extract_communities,
    louvain_partition,
    modularity,
)
from txpattern.ingest import TransactionalGraph
from txpattern.temporal import TemporalSnapshot


def two_cliques():
    left = [f"a{i}" for i in range(5)]
    right = [f"b{i}" for i in range(5)]
    edges = [(u, v) for grp in (left, right) for u, v in itertools.combinations(grp, 2)]
    return graph(edges + [("a0", "b0")]), left, right


def test_two_cliques_split_exactly():
    g, left, right = two_cliques()
    part = louvain_partition(g, seed=3)
    assert sorted(cells(part)) == sorted([sorted(left), sorted(right)])
    assert modularity(g, part) == pytest.approx(brute_force_modularity(g), abs=1e-9)


def test_edgeless_graph_gives_singletons():
    g = graph([], ["x", "y", "z"])
    part = louvain_partition(g)
    assert len(set(part.values())) == 3
    assert modularity(g, part) == 0.0


def test_empty_graph_rejected():
    with pytest.raises(ValueError):
        louvain_partition(graph([]))


def test_disjoint_components_stay_whole():
    comps = [[(f"c{k}x", f"c{k}v{i}") for i in range(3 + k)] for k in range(4)]
    g = graph([e for c in comps for e in c], ["lonely"])
    part = louvain_partition(g, seed=1)
    found = sorted(cells(part))
    expected = sorted([sorted({u for e in c for u in e}) for c in comps] + [["lonely"]])
    assert found == expected


def test_matches_brute_force_on_random_small_graphs():
    rng = np.random.default_rng(2024)
    misses = []
    for t in range(150):
        g = random_graph(rng, int(rng.integers(2, 9)), float(rng.uniform(0.1, 0.5)))
        part = louvain_partition(g, seed=t)
        if partition_modularity(g, part) < brute_force_modularity(g) - 1e-9:
            misses.append(t)
    assert misses == []


@given(directed_graphs(max_nodes=7))
def test_modularity_agrees_with_matrix_form_and_beats_singletons(g):
    part = louvain_partition(g, seed=0, n_starts=2)
    q = modularity(g, part)
    assert q == pytest.approx(partition_modularity(g, part), abs=1e-12)
    singletons = {v: i for i, v in enumerate(sorted(g.nodes))}
    assert q >= modularity(g, singletons) - 1e-12


@given(directed_graphs())
def test_deterministic_for_fixed_seed(g):
    assert louvain_partition(g, seed=7) == louvain_partition(g, seed=7)


def test_community_ids_numbered_by_smallest_member():
    g, left, right = two_cliques()
    part = louvain_partition(g)
    assert part["a0"] == 0 and part["b0"] == 1


def _snapshot(g: TransactionalGraph, index: int = 0) -> TemporalSnapshot:
    return TemporalSnapshot(index, 0, 1, g)


def test_size_filter_keeps_cells_of_four_or_more():
    sizes = [3, 4, 10]
    edges = []
    for k, n in enumerate(sizes):
        edges += [(f"h{k}", f"h{k}s{i}") for i in range(n - 1)]
    kept, dropped = extract_communities(_snapshot(graph(edges)))
    assert sorted(c.size for c in kept) == [4, 10]
    assert dropped == 1


def test_retained_communities_are_disjoint_induced_subgraphs(rng):
    g = random_graph(rng, 40, 0.05)
    snap = _snapshot(g, 5)
    kept, _ = extract_communities(snap, min_size=2)
    seen = set()
    for c in kept:
        assert c.size >= 2 and not (seen & c.nodes)
        seen |= c.nodes
        expected = sorted(e for e in g.multi_edges if e[0] in c.nodes and e[1] in c.nodes)
        assert sorted(c.subgraph.multi_edges) == expected
        assert c.id.startswith("s0005c")


def test_census_counts():
    a = graph([("x", f"y{i}") for i in range(4)] + [("p", "q")])
    b = graph([("m", f"n{i}") for i in range(6)])
    communities, census = communities_from_snapshots([_snapshot(a, 0), _snapshot(b, 2)])
    assert census == {"raw": 3, "retained": 2, "dropped": 1}
    # ordinals index all cells, including the dropped {p, q}
    assert [c.id for c in communities] == ["s0000c00001", "s0002c00000"]
