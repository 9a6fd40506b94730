"""Louvain community detection on snapshots and extraction of retained communities.

Louvain runs on the symmetrised weighted view: the weight between two accounts
is the total number of transactions between them in either direction.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .ingest import TransactionalGraph
from .temporal import TemporalSnapshot


class _WGraph:
    """Symmetric weighted adjacency on 0..n-1; ``adj[i][i]`` holds self-loop weight (counted as A_ii)."""

    def __init__(
        self,
        n: int,
        adj: list[dict[int, float]],
        degree: list[float] | None = None,
        two_m: float | None = None,
    ):
        self.n = n
        self.adj = adj
        self.degree = [sum(a.values()) for a in adj] if degree is None else degree
        self.two_m = float(sum(self.degree)) if two_m is None else two_m


def _symmetrized(g: TransactionalGraph) -> tuple[list[str], _WGraph]:
    order = g.sorted_nodes()
    index = {v: i for i, v in enumerate(order)}
    adj: list[dict[int, float]] = [defaultdict(float) for _ in order]
    for (u, v), w in g.simple_edges.items():
        i, j = index[u], index[v]
        adj[i][j] += w
        adj[j][i] += w
    return order, _WGraph(len(order), [dict(a) for a in adj])


def modularity_of(wg: _WGraph, membership: list[int], resolution: float = 1.0) -> float:
    if wg.two_m == 0:
        return 0.0
    internal = defaultdict(float)
    total = defaultdict(float)
    for i, nbrs in enumerate(wg.adj):
        c = membership[i]
        total[c] += wg.degree[i]
        for j, w in nbrs.items():
            if membership[j] == c:
                internal[c] += w
    return sum(internal[c] / wg.two_m - resolution * (total[c] / wg.two_m) ** 2 for c in total)


def modularity(g: TransactionalGraph, partition: dict[str, int], resolution: float = 1.0) -> float:
    """Newman modularity of ``partition`` on the symmetrised weighted view of ``g``."""
    order, wg = _symmetrized(g)
    return modularity_of(wg, [partition[v] for v in order], resolution)


def _move_nodes(
    wg: _WGraph, order: list[int], resolution: float, init: list[int] | None = None
) -> tuple[list[int], bool]:
    """Local-moving phase. Returns the membership (ids in 0..n-1) and whether any node moved."""
    n = wg.n
    comm = list(range(n)) if init is None else list(init)
    tot = [0.0] * n
    size = [0] * n
    for i, c in enumerate(comm):
        tot[c] += wg.degree[i]
        size[c] += 1
    two_m = wg.two_m
    moved_any = False
    improved = True
    while improved:
        improved = False
        for i in order:
            ki = wg.degree[i]
            own = comm[i]
            links: dict[int, float] = defaultdict(float)
            for j, w in wg.adj[i].items():
                if j != i:
                    links[comm[j]] += w
            # take i out of its community
            tot[own] -= ki
            size[own] -= 1
            scale = ki / two_m if two_m else 0.0
            tol = 1e-12 * max(1.0, ki)
            own_gain = links.get(own, 0.0) - resolution * tot[own] * scale
            best_c, best_gain = None, None
            for c in sorted(links):
                if c == own:
                    continue
                gain = links[c] - resolution * tot[c] * scale
                if best_gain is None or gain > best_gain + tol:
                    best_c, best_gain = c, gain
            if size[own] > 0 and (best_gain is None or best_gain < -tol):
                # being alone has gain 0
                best_c, best_gain = size.index(0), 0.0
            target = own
            if best_c is not None and best_gain > own_gain + tol:
                target = best_c
            comm[i] = target
            tot[target] += ki
            size[target] += 1
            if target != own:
                improved = True
                moved_any = True
    return comm, moved_any


def _aggregate(wg: _WGraph, membership: list[int]) -> _WGraph:
    k = max(membership) + 1
    adj: list[dict[int, float]] = [defaultdict(float) for _ in range(k)]
    for i, nbrs in enumerate(wg.adj):
        ci = membership[i]
        for j, w in nbrs.items():
            adj[ci][membership[j]] += w
    return _WGraph(k, [dict(a) for a in adj])


def _renumber(membership: list[int]) -> list[int]:
    mapping: dict[int, int] = {}
    return [mapping.setdefault(c, len(mapping)) for c in membership]


def louvain_partition(
    g: TransactionalGraph, seed: int = 0, resolution: float = 1.0, n_starts: int = 3
) -> dict[str, int]:
    """Louvain modularity optimisation with smart-local-moving refinement.

    Each start is a multilevel local-moving + aggregation run, repeated from
    its own result until modularity stops improving. Per level, nodes are
    visited in sorted-id order permuted by the start's seeded generator;
    among equally good target communities the lowest id wins and a node only
    moves on a strict gain. After each multilevel run a Kernighan-Lin
    vertex-mover sweep (:func:`_kl_refine`) lets nodes escape local optima
    that single greedy moves cannot leave. The best of ``n_starts`` seeded starts is kept
    (earliest start on ties). Community ids in the result are numbered by
    their smallest member.
    """
    if not g.nodes:
        raise ValueError("cannot partition an empty graph")
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    names, base = _symmetrized(g)
    best, best_q = None, None
    for child in np.random.SeedSequence(seed).spawn(n_starts):
        membership, q = _optimize(base, np.random.default_rng(child), resolution)
        if best_q is None or q > best_q + 1e-12:
            best, best_q = membership, q
    return dict(zip(names, _renumber(best)))


def _optimize(base: _WGraph, rng: np.random.Generator, resolution: float) -> tuple[list[int], float]:
    node_comm = list(range(base.n))
    best_q = modularity_of(base, node_comm, resolution)
    while True:
        candidate = _louvain_pass(base, node_comm, rng, resolution)
        candidate = _kl_refine(base, candidate, resolution, rng)
        q = modularity_of(base, candidate, resolution)
        if q <= best_q + 1e-12:
            return node_comm, best_q
        node_comm, best_q = candidate, q


KL_MAX_NODES = 300
KL_RANDOM_STARTS = 4


def _components(wg: _WGraph) -> list[list[int]]:
    seen = [False] * wg.n
    out = []
    for s in range(wg.n):
        if seen[s]:
            continue
        seen[s] = True
        stack, comp = [s], []
        while stack:
            v = stack.pop()
            comp.append(v)
            for j in wg.adj[v]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        out.append(sorted(comp))
    return out


def _kl_refine(wg: _WGraph, membership: list[int], resolution: float, rng: np.random.Generator) -> list[int]:
    """Kernighan-Lin vertex-mover refinement, run per connected component.

    A sweep moves every node of the component exactly once, each time making
    the best available move (to a neighbouring community or to a new one)
    even if it lowers modularity, and remembers the best partition seen. Sweeps
    repeat while they improve. Optimal communities never span components, so
    components are refined independently (with the full graph's degrees);
    components above ``KL_MAX_NODES`` nodes keep their Louvain assignment.
    """
    out = list(membership)
    next_id = max(out) + 1
    for comp in _components(wg):
        if len(comp) < 2 or len(comp) > KL_MAX_NODES:
            if len(comp) == 1:
                out[comp[0]] = next_id
                next_id += 1
            continue
        local = _renumber([membership[v] for v in comp])
        local = _kl_perturbed(wg, comp, local, resolution, rng)
        for v, c in zip(comp, local):
            out[v] = next_id + c
        next_id += max(local) + 1
    return _renumber(out)


def _kl_perturbed(
    wg: _WGraph, comp: list[int], local: list[int], resolution: float, rng: np.random.Generator
) -> list[int]:
    """KL from the given partition and from perturbed copies of it; the best result wins.

    Perturbations: the whole component as one community, and every merge of
    two communities joined by an edge.
    """
    index = {v: k for k, v in enumerate(comp)}
    starts = [local, [0] * len(comp)]
    starts += [[int(b) for b in rng.integers(0, 2, size=len(comp))] for _ in range(KL_RANDOM_STARTS)]
    pairs = set()
    for v in comp:
        for j in wg.adj[v]:
            a, b = local[index[v]], local[index[j]]
            if a != b:
                pairs.add((min(a, b), max(a, b)))
    for a, b in sorted(pairs):
        starts.append([a if c == b else c for c in local])
    best, best_q = None, None
    for start in starts:
        cand, q = _kl_component(wg, comp, _renumber(start), resolution)
        if best_q is None or q > best_q + 1e-12:
            best, best_q = cand, q
    return best


def _kl_component(
    wg: _WGraph, comp: list[int], comm: list[int], resolution: float
) -> tuple[list[int], float]:
    n = len(comp)
    index = {v: k for k, v in enumerate(comp)}
    adj = [{index[j]: w for j, w in wg.adj[v].items() if j != v} for v in comp]
    k = [wg.degree[v] for v in comp]
    two_m = wg.two_m
    if two_m == 0:
        return comm, 0.0

    def q_local(c: list[int]) -> float:
        # modularity contribution of this component's communities
        inner, tot = defaultdict(float), defaultdict(float)
        for i in range(n):
            tot[c[i]] += k[i]
            inner[c[i]] += wg.adj[comp[i]].get(comp[i], 0.0)
            for j, w in adj[i].items():
                if c[j] == c[i]:
                    inner[c[i]] += w
        return sum(inner[x] / two_m - resolution * (tot[x] / two_m) ** 2 for x in tot)

    best, best_q = list(comm), q_local(comm)
    while True:
        c = list(best)
        tot = defaultdict(float)
        for i in range(n):
            tot[c[i]] += k[i]
        moved = [False] * n
        cur_q, sweep_best, sweep_q = best_q, None, best_q
        for _ in range(n):
            move = None
            for i in range(n):
                if moved[i]:
                    continue
                links: dict[int, float] = defaultdict(float)
                for j, w in adj[i].items():
                    links[c[j]] += w
                own = c[i]
                scale = k[i] / two_m
                stay = links.get(own, 0.0) - resolution * (tot[own] - k[i]) * scale
                empty = next(x for x in range(n + 1) if tot.get(x, 0.0) == 0.0 and x != own)
                options = [x for x in sorted(links) if x != own]
                if tot[own] - k[i] > 0:
                    options.append(empty)
                for x in options:
                    gain = links.get(x, 0.0) - resolution * tot.get(x, 0.0) * scale - stay
                    if move is None or gain > move[0] + 1e-12:
                        move = (gain, i, x)
            if move is None:
                break
            gain, i, x = move
            tot[c[i]] -= k[i]
            tot[x] += k[i]
            c[i] = x
            moved[i] = True
            cur_q += 2.0 * gain / two_m
            if cur_q > sweep_q + 1e-12:
                sweep_best, sweep_q = list(c), cur_q
        if sweep_best is None:
            return _renumber(best), best_q
        best, best_q = sweep_best, q_local(sweep_best)


def _split(wg: _WGraph, membership: list[int], rng: np.random.Generator, resolution: float) -> list[int]:
    """Split every community into sub-communities by local moving inside it.

    Degrees and total weight stay those of the full graph, so gains are the
    same modularity gains the outer level uses.
    """
    sub = [0] * wg.n
    next_id = 0
    for members in _groups(membership):
        local = {v: k for k, v in enumerate(members)}
        adj = [{local[j]: w for j, w in wg.adj[v].items() if j in local} for v in members]
        inner = _WGraph(len(members), adj, [wg.degree[v] for v in members], wg.two_m)
        order = [int(i) for i in rng.permutation(len(members))]
        part, _ = _move_nodes(inner, order, resolution)
        part = _renumber(part)
        for v, p in zip(members, part):
            sub[v] = next_id + p
        next_id += max(part) + 1
    return sub


def _groups(membership: list[int]) -> list[list[int]]:
    groups: dict[int, list[int]] = defaultdict(list)
    for i, c in enumerate(membership):
        groups[c].append(i)
    return [groups[c] for c in sorted(groups)]


def _louvain_pass(base: _WGraph, init: list[int], rng: np.random.Generator, resolution: float) -> list[int]:
    """One multilevel run starting from ``init``.

    Each level moves nodes locally, then aggregates. Aggregation is by
    sub-communities (communities split by an inner local-moving pass) with
    the next level starting from their parent communities, so whole groups
    of nodes can still change community later. When no community splits,
    plain community aggregation is used.
    """
    wg = base
    node_map = list(range(base.n))  # base node -> node of the current level
    start: list[int] | None = _renumber(init)
    while True:
        order = [int(i) for i in rng.permutation(wg.n)]
        membership, _ = _move_nodes(wg, order, resolution, start)
        membership = _renumber(membership)
        sub = _split(wg, membership, rng, resolution)
        n_sub = max(sub) + 1
        if n_sub < wg.n:
            start = [0] * n_sub
            for v, s in enumerate(sub):
                start[s] = membership[v]
            grouping = sub
        elif max(membership) + 1 < wg.n:
            start = None
            grouping = membership
        else:
            return [membership[v] for v in node_map]
        node_map = [grouping[v] for v in node_map]
        wg = _aggregate(wg, grouping)


@dataclass(frozen=True)
class Community:
    snapshot: int
    ordinal: int
    nodes: frozenset[str]
    subgraph: TransactionalGraph

    @property
    def id(self) -> str:
        return community_id(self.snapshot, self.ordinal)

    @property
    def size(self) -> int:
        return len(self.nodes)


def community_id(snapshot: int, ordinal: int) -> str:
    return f"s{snapshot:04d}c{ordinal:05d}"


def cells(partition: dict[str, int]) -> list[list[str]]:
    groups: dict[int, list[str]] = defaultdict(list)
    for v in sorted(partition):
        groups[partition[v]].append(v)
    return [groups[c] for c in sorted(groups)]


def extract_communities(
    tts: TemporalSnapshot, min_size: int = 4, seed: int = 0, resolution: float = 1.0
) -> tuple[list[Community], int]:
    """Partition a snapshot and keep the cells with at least ``min_size`` accounts.

    Returns the retained communities and the number of dropped cells. Ordinals
    index all cells, so filtering does not renumber retained communities.
    """
    if not tts.graph.nodes:
        return [], 0
    partition = louvain_partition(tts.graph, seed=seed, resolution=resolution)
    edges_by_cell: dict[int, list[tuple[str, str, int]]] = defaultdict(list)
    for e in tts.graph.multi_edges:
        cu, cv = partition[e[0]], partition[e[1]]
        if cu == cv:
            edges_by_cell[cu].append(e)
    kept, dropped = [], 0
    for ordinal, members in enumerate(cells(partition)):
        if len(members) < min_size:
            dropped += 1
            continue
        c = partition[members[0]]
        sub = TransactionalGraph(members, edges_by_cell.get(c, []))
        kept.append(Community(tts.index, ordinal, frozenset(members), sub))
    return kept, dropped


def communities_from_snapshots(
    snapshots: Iterable[TemporalSnapshot], min_size: int = 4, seed: int = 0
) -> tuple[list[Community], dict[str, int]]:
    out: list[Community] = []
    census = {"raw": 0, "retained": 0, "dropped": 0}
    for tts in snapshots:
        kept, dropped = extract_communities(tts, min_size=min_size, seed=seed)
        out.extend(kept)
        census["retained"] += len(kept)
        census["dropped"] += dropped
    census["raw"] = census["retained"] + census["dropped"]
    return out, census
