from __future__ import annotations

import random

import pytest
from hypothesis import given

from conftest import directed_graphs, graph
from txpattern.errors import DataError
from txpattern.ingest import (
    ColumnMapping,
    Transaction,
    build_graph,
    load_transactions,
    parse_timestamp,
    write_transactions,
)
from txpattern.synthgen import Pattern, PatternTemplate, generate_corpus, generate_pattern


def test_self_transfer_dropped_and_counted(tmp_path):
    path = tmp_path / "tx.csv"
    path.write_text(
        "Time,Date,Sender_account,Receiver_account\n"
        "10:00:00,2022-10-07,a,b\n"
        "11:00:00,2022-10-07,c,c\n"
        "12:00:00,2022-10-07,b,a\n"
    )
    txs, report = load_transactions(path)
    assert [(t.sender, t.receiver) for t in txs] == [("a", "b"), ("b", "a")]
    assert report.self_transfers == 1
    assert report.rows_read == 3 and report.loaded == 2
    assert [t.source_row for t in txs] == [0, 2]


def test_empty_file_is_an_error(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(DataError, match="zero parseable rows"):
        load_transactions(path)


def test_header_only_is_an_error(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("Time,Date,Sender_account,Receiver_account\n")
    with pytest.raises(DataError, match="zero parseable rows"):
        load_transactions(path)


def test_missing_file_and_missing_column(tmp_path):
    with pytest.raises(DataError, match="missing input file"):
        load_transactions(tmp_path / "nope.csv")
    path = tmp_path / "cols.csv"
    path.write_text("Date,Sender_account\n2022-10-07,a\n")
    with pytest.raises(DataError, match="missing mapped column"):
        load_transactions(path)


def test_malformed_rows_are_skipped(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "Time,Date,Sender_account,Receiver_account\n"
        "10:00:00,not-a-date,a,b\n"
        "10:00:00,2022-10-07,,b\n"
        "10:00:00,2022-10-07,a,b\n"
    )
    txs, report = load_transactions(path)
    assert len(txs) == 1
    assert report.dropped["bad_timestamp"] == 1 and report.dropped["empty_account"] == 1


def test_custom_mapping_and_delimiter(tmp_path):
    path = tmp_path / "alt.tsv"
    path.write_text("when\tfrom\tto\n2022-10-07T10:00:00Z\tx\ty\n2022-10-08\ty\tz\n")
    schema = ColumnMapping(sender="from", receiver="to", date=None, time=None, timestamp="when", delimiter="\t")
    txs, _ = load_transactions(path, schema)
    assert txs[0].timestamp == parse_timestamp("2022-10-07", "10:00:00")
    assert txs[1].timestamp == parse_timestamp("2022-10-08")  # date-only -> midnight UTC
    assert txs[1].timestamp % 86400 == 0


def test_generator_round_trip(tmp_path):
    templates = [PatternTemplate(p, {"n": 4}) for p in (Pattern.COLLECTOR, Pattern.SINK)] * 5
    corpus = generate_corpus(templates, noise_edges=60, seed=3)
    corpus.transactions[:] = corpus.transactions[:100]
    path = tmp_path / "synth.csv"
    write_transactions(corpus.transactions, path)
    txs, report = load_transactions(path)
    assert len(txs) == 100 and report.loaded == 100
    assert txs == corpus.transactions


def test_build_graph_simple_view():
    txs = [Transaction("a", "b", 1), Transaction("a", "b", 2), Transaction("b", "a", 3)]
    g = build_graph(txs)
    assert g.simple_edges == {("a", "b"): 2, ("b", "a"): 1}
    assert g.nodes == {"a", "b"}
    empty = build_graph([])
    assert not empty.nodes and not empty.simple_edges


def test_build_graph_planted_sink():
    txs, nodes = generate_pattern(PatternTemplate(Pattern.SINK, {"n": 5}), seed=1)
    g = build_graph(txs)
    hub = max(g.nodes, key=g.out_degree)
    assert g.out_degree(hub) == 5
    assert all(g.in_degree(v) == 1 for v in g.nodes - {hub})
    assert g.nodes == nodes


@given(directed_graphs())
def test_degree_sums_equal_simple_edge_count(g):
    assert sum(g.out_degree(v) for v in g.nodes) == len(g.simple_edges)
    assert sum(g.in_degree(v) for v in g.nodes) == len(g.simple_edges)
    assert sum(g.simple_edges.values()) == len(g.multi_edges)
    assert all(u != v for u, v in g.simple_edges)


@given(directed_graphs(min_nodes=2))
def test_build_graph_is_permutation_invariant(g):
    txs = [Transaction(u, v, ts) for u, v, ts in g.multi_edges]
    shuffled = list(txs)
    random.Random(len(txs)).shuffle(shuffled)
    a, b = build_graph(txs), build_graph(shuffled)
    assert a.simple_edges == b.simple_edges
    assert a.multi_edges == b.multi_edges


def test_no_self_loops_from_build_graph():
    g = build_graph([Transaction("a", "a", 0), Transaction("a", "b", 0)])
    assert ("a", "a") not in g.simple_edges
    assert graph([("a", "b")]).nodes == {"a", "b"}
