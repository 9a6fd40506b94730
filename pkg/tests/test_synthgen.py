from __future__ import annotations

import pytest

from txpattern.indicators import PATTERNS, Pattern, label_community
from txpattern.ingest import build_graph
from txpattern.synthgen import (
    WEEK,
    PatternTemplate,
    SynthCorpus,
    generate_corpus,
    generate_pattern,
    pattern_edges,
    random_templates,
)


def test_collector_edges():
    txs, nodes = generate_pattern(PatternTemplate(Pattern.COLLECTOR, {"n": 5}), seed=0)
    assert len(txs) == 5 and len(nodes) == 6
    g = build_graph(txs)
    assert max(g.in_degree(v) for v in g.nodes) == 5


def test_scatter_gather_counts():
    edges, nodes = pattern_edges(PatternTemplate(Pattern.SCATTER_GATHER, {"n": 3}))
    assert len(nodes) == 5 and len(edges) == 6


def test_branching_counts():
    edges, nodes = pattern_edges(PatternTemplate(Pattern.BRANCHING, {"width": 3}))
    assert len(nodes) == 10 and len(edges) == 9


def test_size_params_below_minimum_rejected():
    with pytest.raises(ValueError, match="minimum"):
        PatternTemplate(Pattern.COLLECTOR, {"n": 1})
    with pytest.raises(ValueError, match="minimum"):
        PatternTemplate(Pattern.GATHER_SCATTER, {"n": 3, "m": 1})
    with pytest.raises(ValueError, match="missing"):
        PatternTemplate(Pattern.COLLUSION, {"colluders": 2})


def test_timestamps_inside_one_window():
    tpl = PatternTemplate(Pattern.SINK, {"n": 8})
    txs, _ = generate_pattern(tpl, seed=9, start=1000)
    assert all(1000 <= t.timestamp <= 1000 + WEEK - 1 for t in txs)


def test_noise_only_corpus_has_empty_oracle():
    corpus = generate_corpus([], noise_edges=10, seed=1)
    assert corpus.oracle == {}
    assert len(corpus.transactions) == 10
    # noise components never reach four accounts
    g = build_graph(corpus.transactions)
    assert all(g.in_degree(v) + g.out_degree(v) <= 2 for v in g.nodes)


def test_corpus_is_byte_deterministic(tmp_path):
    templates = [PatternTemplate(p, {"n": 4} if p not in (Pattern.COLLUSION, Pattern.BRANCHING) else
                                 ({"colluders": 2, "shared": 3} if p is Pattern.COLLUSION else {"width": 2}))
                 for p in PATTERNS]
    paths = []
    for k in range(2):
        corpus = generate_corpus(templates, noise_edges=5, seed=7)
        tx, oracle = tmp_path / f"tx{k}.csv", tmp_path / f"oracle{k}.json"
        corpus.write(tx, oracle)
        paths.append((tx.read_bytes(), oracle.read_bytes()))
    assert paths[0] == paths[1]
    assert SynthCorpus.read_oracle(tmp_path / "oracle0.json") == corpus.oracle


def test_oracle_components_are_disjoint_and_self_labelled():
    templates = random_templates(20, seed=4)
    corpus = generate_corpus(templates, noise_edges=30, seed=4)
    seen = set()
    by_node = {}
    for cid, (nodes, _) in corpus.oracle.items():
        assert not (nodes & seen)
        assert len(nodes) >= 4
        seen |= nodes
        for v in nodes:
            by_node[v] = cid
    full = build_graph(corpus.transactions)
    for cid, (nodes, label) in corpus.oracle.items():
        assert label_community(full.subgraph(nodes)).label is label
