from __future__ import annotations

import math

import pytest
from hypothesis import given, strategies as st

from conftest import directed_graphs, graph
from oracles import indicator_oracle
from txpattern.indicators import (
    INDICATORS,
    PATTERNS,
    Pattern,
    _degree_ratio_indicator,
    branching_indicator,
    collector_indicator,
    collusion_indicator,
    gather_scatter_indicator,
    indicator_table,
    indicator_vector,
    label_community,
    scatter_gather_indicator,
    sink_indicator,
)
from txpattern.synthgen import PatternTemplate, pattern_edges


def fan_in(hub, k, prefix="s"):
    return [(f"{prefix}{i}", hub) for i in range(k)]


def fan_out(hub, k, prefix="t"):
    return [(hub, f"{prefix}{i}") for i in range(k)]


# --- I1 / I2 ---------------------------------------------------------------

def test_collector_examples():
    g = graph(fan_in("x", 4, "a") + fan_in("m", 8, "b"))
    assert collector_indicator("x", g) == pytest.approx(0.9, abs=1e-12)
    assert collector_indicator("m", g) == 1.0
    assert collector_indicator("a0", g) == 0.0


def test_sink_examples():
    g = graph(fan_out("x", 2, "a") + fan_out("m", 8, "b"))
    assert sink_indicator("x", g) == pytest.approx(0.8, abs=1e-12)
    assert sink_indicator("m", g) == 1.0
    assert sink_indicator("b0", g) == 0.0


def test_ratio_digit_count_jump():
    # R = 10 has two digits: 1 - 10/20 = 0.5, whereas R = 9 gives 1 - 9/10 = 0.1
    g = graph(fan_in("x", 2, "a") + fan_in("m", 2**11, "b"))
    assert collector_indicator("x", g) == pytest.approx(0.5, abs=1e-12)
    g = graph(fan_in("x", 2, "a") + fan_in("m", 2**10, "b"))
    assert collector_indicator("x", g) == pytest.approx(0.1, abs=1e-12)


def test_single_counterparty_is_no_collector():
    g = graph([("a", "x"), ("b", "y")])
    assert collector_indicator("x", g) == 0.0


# --- I3 ---------------------------------------------------------------------

def test_collusion_examples():
    g = graph(fan_out("x", 3, "v") + [("a", "v0"), ("a", "v1")])
    assert collusion_indicator("x", g) == pytest.approx(2 / 3, abs=1e-12)
    g = graph(fan_out("x", 3, "v") + [("a", "v0"), ("b", "v1")])
    assert collusion_indicator("x", g) == 0.0
    g = graph(fan_out("x", 2, "v") + fan_out("a", 2, "v"))
    assert collusion_indicator("x", g) == 1.0
    assert collusion_indicator("v0", g) == 0.0


# --- I4 ---------------------------------------------------------------------

def test_branching_examples():
    g = graph(fan_out("x", 2, "v") + [("v0", "p"), ("v0", "q"), ("v1", "r"), ("v1", "s")])
    assert branching_indicator("x", g) == 1.0
    g = graph([("x", "v"), ("v", "p"), ("v", "q")])
    assert branching_indicator("x", g) == 0.0
    g = graph(fan_out("x", 2, "v") + [("v0", "p"), ("v0", "q"), ("v1", "r"), ("v1", "s"), ("v1", "t")])
    assert branching_indicator("x", g) == 0.5


# --- I5 ---------------------------------------------------------------------

def test_scatter_gather_examples():
    mids = ["v0", "v1", "v2"]
    g = graph(fan_out("x", 3, "v") + [(v, "y") for v in mids])
    assert scatter_gather_indicator("x", g) == 1.0
    g = graph(fan_out("x", 3, "v") + [(v, f"y{i}") for i, v in enumerate(mids)])
    assert scatter_gather_indicator("x", g) == pytest.approx(1 / 3, abs=1e-12)
    g = graph(fan_out("x", 2, "v") + [("v0", "y"), ("v1", "y")])
    assert scatter_gather_indicator("x", g) == 0.0


def test_scatter_gather_excludes_return_to_origin():
    g = graph(fan_out("x", 3, "v") + [("v0", "x"), ("v1", "y"), ("v2", "y")])
    # x is not a target; two paths reach y; deg = 3 out + 1 in
    assert scatter_gather_indicator("x", g) == pytest.approx((2 / 4) / 1, abs=1e-12)


# --- I6 ---------------------------------------------------------------------

def test_gather_scatter_examples():
    g = graph(fan_in("x", 3) + fan_out("x", 3))
    assert gather_scatter_indicator("x", g) == 1.0
    g = graph(fan_in("x", 2) + fan_out("x", 3))
    assert gather_scatter_indicator("x", g) == 0.0
    g = graph(fan_in("x", 3) + fan_out("x", 6))
    assert gather_scatter_indicator("x", g) == pytest.approx(2 / 3, abs=1e-12)


# --- labeling ---------------------------------------------------------------

def test_four_cycle_is_unlabeled():
    g = graph([("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")])
    assert all(v == 0.0 for row in indicator_table(g).values() for v in row)
    lab = label_community(g)
    assert lab.label is Pattern.UNLABELED and lab.score == 0.0


def test_argmax_rule_picks_sink():
    g = graph(fan_out("m", 4, "t"))
    lab = label_community(g)
    assert lab.label is Pattern.SINK and lab.score == 1.0 and lab.argmax_node == "m"


@pytest.mark.parametrize(
    "kind, params, center_value",
    [
        (Pattern.COLLECTOR, {"n": 5}, 1.0),
        (Pattern.SINK, {"n": 5}, 1.0),
        (Pattern.COLLUSION, {"colluders": 2, "shared": 3}, 1.0),
        (Pattern.BRANCHING, {"width": 3}, 1.0),
        (Pattern.SCATTER_GATHER, {"n": 4}, 1.0),
        (Pattern.GATHER_SCATTER, {"n": 4, "m": 4}, 1.0),
    ],
)
def test_templates_receive_their_own_label(kind, params, center_value):
    edges, _ = pattern_edges(PatternTemplate(kind, params))
    g = graph(edges)
    lab = label_community(g)
    assert lab.label is kind
    assert lab.score == pytest.approx(center_value, abs=1e-12)
    k = PATTERNS.index(kind)
    assert lab.maxima[k] == max(lab.maxima)


def test_label_maxima_match_table():
    g = graph(fan_in("x", 3) + fan_out("x", 5) + [("t0", "t1")])
    table = indicator_table(g)
    lab = label_community(g)
    assert lab.maxima == tuple(max(row[k] for row in table.values()) for k in range(6))


def test_ties_go_to_later_indicator_then_lowest_node():
    # I3 = 1 at a and b ties with I1 = 1 at v, w and I2 = 1 at a, b
    g = graph([("b", "v"), ("b", "w"), ("a", "v"), ("a", "w")])
    lab = label_community(g)
    assert lab.label is Pattern.COLLUSION and lab.argmax_node == "a"


# --- properties -------------------------------------------------------------

@given(directed_graphs())
def test_indicators_match_matrix_oracle(g):
    oracle = indicator_oracle(g)
    for x, row in indicator_table(g).items():
        assert row == pytest.approx(oracle[x], abs=1e-12)
        assert row == indicator_vector(x, g)


@given(directed_graphs())
def test_indicator_range(g):
    for row in indicator_table(g).values():
        assert all(0.0 <= v <= 1.0 for v in row)


@given(directed_graphs(min_nodes=2), st.randoms(use_true_random=False))
def test_relabeling_invariance(g, rnd):
    names = sorted(g.nodes)
    shuffled = list(names)
    rnd.shuffle(shuffled)
    mapping = {a: "z" + b for a, b in zip(names, shuffled)}
    h = graph([(mapping[u], mapping[v]) for u, v in g.simple_edges], mapping.values())
    t_g, t_h = indicator_table(g), indicator_table(h)
    for x in names:
        assert t_g[x] == t_h[mapping[x]]
    lg, lh = label_community(g), label_community(h)
    assert lg.label is lh.label and lg.score == lh.score
    if lg.argmax_node is not None:
        # ties between nodes may resolve to a different (relabeled) node of equal value
        k = PATTERNS.index(lg.label)
        assert t_h[lh.argmax_node][k] == t_g[lg.argmax_node][k] == lg.score


def _ladder(top, direction):
    # x{d} has d distinct counterparties for d = 1..top; counterparties are shared
    edges = []
    for d in range(1, top + 1):
        for i in range(d):
            edges.append((f"b{i}", f"x{d}") if direction == "in" else (f"x{d}", f"b{i}"))
    return graph(edges)


@given(st.integers(2, 90))
def test_collector_monotone_in_degree(top):
    g = _ladder(top, "in")
    values = [collector_indicator(f"x{d}", g) for d in range(1, top + 1)]
    assert all(a <= b for a, b in zip(values, values[1:]))
    assert values[-1] == 1.0


@given(st.integers(2, 90))
def test_sink_monotone_in_degree(top):
    g = _ladder(top, "out")
    values = [sink_indicator(f"x{d}", g) for d in range(1, top + 1)]
    assert all(a <= b for a, b in zip(values, values[1:]))
    assert values[-1] == 1.0


@pytest.mark.parametrize("top", [1023, 1024])
def test_degree_ratio_monotone_up_to_1024(top):
    values = [_degree_ratio_indicator(d, top) for d in range(1, top + 1)]
    assert all(a <= b for a, b in zip(values, values[1:]))


@given(directed_graphs())
def test_guards(g):
    for x in g.nodes:
        if g.out_degree(x) < 2:
            assert branching_indicator(x, g) == 0.0
        if g.out_degree(x) <= 2:
            assert scatter_gather_indicator(x, g) == 0.0
        if g.out_degree(x) <= 2 or g.in_degree(x) <= 2:
            assert gather_scatter_indicator(x, g) == 0.0


@given(directed_graphs())
def test_label_positive_iff_labeled(g):
    lab = label_community(g)
    assert (lab.label is not Pattern.UNLABELED) == (lab.score > 0)
    assert lab.score == max(lab.maxima)
    assert not math.isnan(lab.score)


def test_indicator_order():
    assert [f.__name__ for f in INDICATORS] == [
        "collector_indicator", "sink_indicator", "collusion_indicator",
        "branching_indicator", "scatter_gather_indicator", "gather_scatter_indicator",
    ]
