"""Node feature matrices for communities.

Nine columns per node, in this fixed order: in-degree, out-degree,
closeness, betweenness, harmonic, second-order, Laplacian, constraint,
reciprocity. Degrees and reciprocity use the directed simple view; every
other column uses the undirected view, where the weight between two accounts
is the number of transactions between them in either direction. Distances
are hop counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import networkx as nx
import numpy as np

from .ingest import TransactionalGraph

FEATURE_NAMES = (
    "in_degree",
    "out_degree",
    "closeness",
    "betweenness",
    "harmonic",
    "second_order",
    "laplacian",
    "constraint",
    "reciprocity",
)
FEATURE_VERSION = 1
N_FEATURES = len(FEATURE_NAMES)


def undirected_view(g: TransactionalGraph) -> nx.Graph:
    u = nx.Graph()
    u.add_nodes_from(g.sorted_nodes())
    for (a, b), w in g.undirected_weights().items():
        u.add_edge(a, b, weight=float(w))
    return u


def degree_features(g: TransactionalGraph, order: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.array([g.in_degree(x) for x in order], dtype=float),
        np.array([g.out_degree(x) for x in order], dtype=float),
    )


def closeness(u: nx.Graph, order: Sequence[str]) -> np.ndarray:
    """Wasserman-Faust closeness, safe on disconnected graphs."""
    c = nx.closeness_centrality(u, wf_improved=True)
    return np.array([c[x] for x in order], dtype=float)


def betweenness(u: nx.Graph, order: Sequence[str]) -> np.ndarray:
    """Brandes betweenness normalised by (n-1)(n-2)/2 pairs."""
    if u.number_of_nodes() <= 2:
        return np.zeros(len(order))
    b = nx.betweenness_centrality(u, normalized=True)
    return np.array([b[x] for x in order], dtype=float)


def harmonic(u: nx.Graph, order: Sequence[str]) -> np.ndarray:
    n = u.number_of_nodes()
    if n <= 1:
        return np.zeros(len(order))
    h = nx.harmonic_centrality(u)
    return np.array([h[x] / (n - 1) for x in order], dtype=float)


def _transition_matrix(u: nx.Graph, nodes: Sequence[str]) -> np.ndarray:
    w = nx.to_numpy_array(u, nodelist=list(nodes), weight="weight")
    return w / w.sum(axis=1, keepdims=True)


def return_time_moments(p: np.ndarray, v: int) -> tuple[float, float]:
    """Mean and standard deviation of the first return time to state ``v``.

    ``p`` is the transition matrix of an irreducible chain. Mean hitting
    times ``h`` solve ``(I - Q) h = 1`` and second moments ``s`` solve
    ``(I - Q) s = 1 + 2 Q h``, with ``Q`` the chain restricted to states
    other than ``v``.
    """
    n = p.shape[0]
    if n == 1:
        return 1.0, 0.0
    rest = [i for i in range(n) if i != v]
    q = p[np.ix_(rest, rest)]
    a = np.eye(n - 1) - q
    h = np.linalg.solve(a, np.ones(n - 1))
    s = np.linalg.solve(a, 1.0 + 2.0 * q @ h)
    step = p[v, rest]  # p[v, v] is zero: no self-loops
    mean = 1.0 + step @ h
    second = step @ (1.0 + 2.0 * h + s)
    return float(mean), float(np.sqrt(max(second - mean * mean, 0.0)))


def return_time_std(u: nx.Graph, order: Sequence[str]) -> np.ndarray:
    """Raw second-order centrality: std of random-walk return times per node.

    The walk steps to a neighbour with probability proportional to edge
    weight and is confined to the node's connected component. Isolated
    nodes get 0.
    """
    out = dict.fromkeys(order, 0.0)
    for comp in nx.connected_components(u):
        if len(comp) < 2:
            continue
        nodes = sorted(comp)
        p = _transition_matrix(u, nodes)
        for i, x in enumerate(nodes):
            out[x] = return_time_moments(p, i)[1]
    return np.array([out[x] for x in order], dtype=float)


def second_order(u: nx.Graph, order: Sequence[str]) -> np.ndarray:
    """Return-time std min-max scaled to [0, 1] within the community."""
    raw = return_time_std(u, order)
    if raw.size == 0:
        return raw
    lo, hi = raw.min(), raw.max()
    if hi - lo <= 0:
        return np.zeros_like(raw)
    return (raw - lo) / (hi - lo)


def laplacian_energy(w: np.ndarray) -> float:
    """trace(L^2) for a symmetric weight matrix with zero diagonal."""
    d = w.sum(axis=1)
    return float((d**2).sum() + (w**2).sum())


def laplacian_centrality(u: nx.Graph, order: Sequence[str]) -> np.ndarray:
    """Relative drop of Laplacian energy when each node is removed."""
    w = nx.to_numpy_array(u, nodelist=list(order), weight="weight")
    total = laplacian_energy(w)
    if total == 0:
        return np.zeros(len(order))
    out = np.empty(len(order))
    for i in range(len(order)):
        keep = np.arange(len(order)) != i
        out[i] = (total - laplacian_energy(w[np.ix_(keep, keep)])) / total
    return out


def burt_constraint(u: nx.Graph, order: Sequence[str]) -> np.ndarray:
    """Burt's constraint on the weighted undirected view; isolated nodes get 0."""
    c = nx.constraint(u, weight="weight")
    return np.array([0.0 if np.isnan(c[x]) else c[x] for x in order], dtype=float)


def reciprocity(g: TransactionalGraph, order: Sequence[str]) -> np.ndarray:
    """Share of a node's incident directed edges whose reverse edge also exists."""
    out = np.zeros(len(order))
    for k, x in enumerate(order):
        succ, pred = g.successors(x), g.predecessors(x)
        total = len(succ) + len(pred)
        if total:
            mutual = len(succ & pred)
            out[k] = 2 * mutual / total
    return out


def raw_features(g: TransactionalGraph) -> tuple[list[str], np.ndarray]:
    """Unstandardised ``n x 9`` feature matrix with rows in sorted node order."""
    order = g.sorted_nodes()
    u = undirected_view(g)
    d_in, d_out = degree_features(g, order)
    cols = [
        d_in,
        d_out,
        closeness(u, order),
        betweenness(u, order),
        harmonic(u, order),
        second_order(u, order),
        laplacian_centrality(u, order),
        burt_constraint(u, order),
        reciprocity(g, order),
    ]
    return order, assemble(cols)


def assemble(columns: Sequence[np.ndarray]) -> np.ndarray:
    if len(columns) != N_FEATURES:
        raise ValueError(f"expected {N_FEATURES} columns, got {len(columns)}")
    lengths = {len(c) for c in columns}
    if len(lengths) != 1:
        raise ValueError(f"column length mismatch: {sorted(lengths)}")
    x = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite feature value")
    return x


@dataclass(frozen=True)
class TrainingStats:
    mean: np.ndarray
    std: np.ndarray

    EPS = 1e-12

    @classmethod
    def fit(cls, matrices: Sequence[np.ndarray]) -> "TrainingStats":
        """Per-column mean/std pooled over all rows of the training matrices.

        Columns whose std is below ``EPS`` get a unit scale, so a constant
        column standardises to zeros.
        """
        stacked = np.vstack(matrices)
        mean = stacked.mean(axis=0)
        std = stacked.std(axis=0)
        std = np.where(std < cls.EPS, 1.0, std)
        return cls(mean, std)

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != len(self.mean):
            raise ValueError("feature width does not match stats")
        return (x - self.mean) / self.std

    def invert(self, z: np.ndarray) -> np.ndarray:
        return z * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "columns": list(FEATURE_NAMES)}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingStats":
        return cls(np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float))


def assemble_and_standardize(
    columns: Sequence[np.ndarray] | Sequence[Sequence[np.ndarray]],
    stats: TrainingStats | None = None,
) -> tuple[list[np.ndarray], TrainingStats]:
    """Standardise a corpus of per-community column sets.

    Without ``stats`` (training) the statistics are fitted on the corpus;
    with ``stats`` (validation, inference) they are applied unchanged.
    """
    mats = [assemble(cols) for cols in columns]
    if stats is None:
        stats = TrainingStats.fit(mats)
    return [stats.apply(m) for m in mats], stats


class FeatureStore:
    """Raw feature matrices of many communities in one ``.npy`` block plus a JSON index."""

    def __init__(self, index: dict[str, dict], block: np.ndarray):
        self.index = index
        self.block = block

    def __contains__(self, cid: str) -> bool:
        return cid in self.index

    def matrix(self, cid: str) -> np.ndarray:
        e = self.index[cid]
        return self.block[e["offset"] : e["offset"] + e["rows"]]

    def order(self, cid: str) -> list[str]:
        return self.index[cid]["order"]

    @classmethod
    def build(cls, items: Sequence[tuple[str, list[str], np.ndarray]]) -> "FeatureStore":
        index, blocks, offset = {}, [], 0
        for cid, order, x in items:
            index[cid] = {"offset": offset, "rows": len(order), "order": order}
            blocks.append(x)
            offset += len(order)
        block = np.vstack(blocks) if blocks else np.zeros((0, N_FEATURES))
        return cls(index, block)

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        np.save(directory / "features.npy", self.block.astype("<f8"), allow_pickle=False)
        meta = {"version": FEATURE_VERSION, "columns": list(FEATURE_NAMES), "communities": self.index}
        (directory / "features_index.json").write_text(json.dumps(meta, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory: str | Path) -> "FeatureStore":
        directory = Path(directory)
        meta = json.loads((directory / "features_index.json").read_text())
        if meta.get("version") != FEATURE_VERSION:
            raise ValueError("feature store version mismatch")
        return cls(meta["communities"], np.load(directory / "features.npy", allow_pickle=False))
