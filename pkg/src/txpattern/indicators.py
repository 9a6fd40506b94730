"""Node-level pattern indicators and weak labeling of communities.

Six indicators score how closely a node resembles the centre of a Collector,
Sink, Collusion, Branching, Scatter-Gather or Gather-Scatter structure. All
values lie in [0, 1] and depend only on the simple directed view of the
community subgraph (distinct neighbours, multiplicities ignored).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from .ingest import TransactionalGraph


class Pattern(str, Enum):
    COLLECTOR = "Collector"
    SINK = "Sink"
    COLLUSION = "Collusion"
    BRANCHING = "Branching"
    SCATTER_GATHER = "ScatterGather"
    GATHER_SCATTER = "GatherScatter"
    UNLABELED = "Unlabeled"

    def __str__(self) -> str:
        return self.value

    @property
    def slug(self) -> str:
        return self.value.lower()

    @classmethod
    def parse(cls, name: str) -> "Pattern":
        key = name.replace("-", "").replace("_", "").lower()
        for p in cls:
            if p.value.lower() == key or p.name.replace("_", "").lower() == key:
                return p
        aliases = {"sg": cls.SCATTER_GATHER, "gs": cls.GATHER_SCATTER}
        if key in aliases:
            return aliases[key]
        raise ValueError(f"unknown pattern {name!r}")


# Fixed pattern order, aligned with indicator index (I1..I6).
PATTERNS: tuple[Pattern, ...] = (
    Pattern.COLLECTOR,
    Pattern.SINK,
    Pattern.COLLUSION,
    Pattern.BRANCHING,
    Pattern.SCATTER_GATHER,
    Pattern.GATHER_SCATTER,
)


def _degree_ratio_indicator(deg: int, max_deg: int) -> float:
    # A collector/sink needs at least two counterparties.
    if deg < 2 or max_deg <= 0:
        return 0.0
    r = abs(math.log2(deg / max_deg))
    if r == 0.0:
        return 1.0
    # digit count of r; values below 1 count as one digit
    digits = max(math.floor(math.log10(r)), 0) + 1
    return max(0.0, 1.0 - r / (10.0 * digits))


def collector_indicator(x: str, g: TransactionalGraph) -> float:
    """I1: in-degree of ``x`` against the largest in-degree in ``g``."""
    max_in = max(g.in_degree(v) for v in g.nodes)
    return _degree_ratio_indicator(g.in_degree(x), max_in)


def sink_indicator(x: str, g: TransactionalGraph) -> float:
    """I2: out-degree of ``x`` against the largest out-degree in ``g``."""
    max_out = max(g.out_degree(v) for v in g.nodes)
    return _degree_ratio_indicator(g.out_degree(x), max_out)


def collusion_indicator(x: str, g: TransactionalGraph) -> float:
    """I3: how strongly ``x`` shares its recipients with other funders.

    Other funders of x's recipients are counted; those seen at least twice
    contribute ``count / deg_out(x)`` and the contributions are averaged.
    ``x`` itself is not counted as a co-funder.
    """
    out = g.successors(x)
    if not out:
        return 0.0
    occurrences = Counter(z for v in out for z in g.predecessors(v) if z != x)
    repeated = [c for c in occurrences.values() if c >= 2]
    if not repeated:
        return 0.0
    return sum(c / len(out) for c in repeated) / len(repeated)


def branching_indicator(x: str, g: TransactionalGraph) -> float:
    """I4: fraction of x's recipients that forward to exactly two nodes."""
    out = g.successors(x)
    m = len(out)
    if m < 2:
        return 0.0
    return sum(1.0 for v in out if g.out_degree(v) == 2) / m


def two_step_paths(x: str, g: TransactionalGraph) -> Counter:
    """Number of directed length-2 paths from ``x`` to every other node."""
    return Counter(y for v in g.successors(x) for y in g.successors(v) if y != x)


def scatter_gather_indicator(x: str, g: TransactionalGraph) -> float:
    """I5: convergence of x's two-step flows onto few recipients."""
    if g.out_degree(x) <= 2:
        return 0.0
    paths = two_step_paths(x, g)
    if not paths:
        return 0.0
    deg = g.out_degree(x) + g.in_degree(x)
    r5 = sum(paths.values()) / deg
    return r5 / len(paths)


def gather_scatter_indicator(x: str, g: TransactionalGraph) -> float:
    """I6: balance of in- and out-degree for nodes with more than two of each."""
    d_out, d_in = g.out_degree(x), g.in_degree(x)
    if d_out <= 2 or d_in <= 2:
        return 0.0
    return 1.0 - abs(d_out - d_in) / (d_out + d_in)


INDICATORS = (
    collector_indicator,
    sink_indicator,
    collusion_indicator,
    branching_indicator,
    scatter_gather_indicator,
    gather_scatter_indicator,
)


def indicator_vector(x: str, g: TransactionalGraph) -> tuple[float, ...]:
    return tuple(f(x, g) for f in INDICATORS)


def indicator_table(g: TransactionalGraph) -> dict[str, tuple[float, ...]]:
    """All six indicators for every node of ``g``, keyed by node in sorted order.

    Degree maxima are computed once rather than per node.
    """
    if not g.nodes:
        return {}
    max_in = max(g.in_degree(v) for v in g.nodes)
    max_out = max(g.out_degree(v) for v in g.nodes)
    table = {}
    for x in g.sorted_nodes():
        table[x] = (
            _degree_ratio_indicator(g.in_degree(x), max_in),
            _degree_ratio_indicator(g.out_degree(x), max_out),
            collusion_indicator(x, g),
            branching_indicator(x, g),
            scatter_gather_indicator(x, g),
            gather_scatter_indicator(x, g),
        )
    return table


@dataclass(frozen=True)
class PatternLabel:
    label: Pattern
    score: float
    argmax_node: str | None
    maxima: tuple[float, ...] = field(default=(0.0,) * 6)

    def to_dict(self) -> dict:
        return {
            "label": self.label.value,
            "score": self.score,
            "argmax_node": self.argmax_node,
            "maxima": list(self.maxima),
        }


def label_community(g: TransactionalGraph) -> PatternLabel:
    """Weak label of a community: the indicator with the highest value over all nodes.

    The label is assigned only when the winning value is strictly positive.
    Equal values go to the later indicator in I1..I6 order (the more specific
    structure), then to the smallest node id.
    """
    table = indicator_table(g)
    maxima = [0.0] * 6
    best: tuple[float, int, str] | None = None
    for x, values in table.items():  # sorted node order
        for k, v in enumerate(values):
            maxima[k] = max(maxima[k], v)
            if best is None or v > best[0] or (v == best[0] and k > best[1]):
                best = (v, k, x)
    if best is None or best[0] <= 0.0:
        return PatternLabel(Pattern.UNLABELED, 0.0, None, tuple(maxima))
    score, k, node = best
    return PatternLabel(PATTERNS[k], score, node, tuple(maxima))
