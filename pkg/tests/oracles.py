"""Independent reference implementations used by the tests.

Each oracle is written from the textbook definition with no shared code
path to the package implementation it checks.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np

from txpattern.ingest import TransactionalGraph


# ---------------------------------------------------------------------------
# graphs as dense matrices

def directed_matrix(g: TransactionalGraph) -> tuple[list[str], np.ndarray]:
    """0/1 simple directed adjacency in sorted node order."""
    order = sorted(g.nodes)
    idx = {v: i for i, v in enumerate(order)}
    a = np.zeros((len(order), len(order)), dtype=int)
    for u, v, _ in g.multi_edges:
        a[idx[u], idx[v]] = 1
    return order, a


def undirected_weights(g: TransactionalGraph) -> tuple[list[str], np.ndarray]:
    """Symmetric multiplicity matrix: transactions between two accounts in either direction."""
    order = sorted(g.nodes)
    idx = {v: i for i, v in enumerate(order)}
    w = np.zeros((len(order), len(order)))
    for u, v, _ in g.multi_edges:
        if u != v:
            w[idx[u], idx[v]] += 1
            w[idx[v], idx[u]] += 1
    return order, w


# ---------------------------------------------------------------------------
# indicators, written against the adjacency matrix

def indicator_oracle(g: TransactionalGraph) -> dict[str, list[float]]:
    order, a = directed_matrix(g)
    d_out, d_in = a.sum(axis=1), a.sum(axis=0)

    def ratio(deg, top):
        if deg < 2:
            return 0.0
        r = abs(math.log2(deg / top))
        if r == 0:
            return 1.0
        return max(0.0, 1 - r / (10 * (len(str(int(r))) if r >= 1 else 1)))

    out = {}
    for i, x in enumerate(order):
        recipients = np.flatnonzero(a[i])
        # I3: other funders of x's recipients
        funders = Counter()
        for v in recipients:
            for z in np.flatnonzero(a[:, v]):
                if z != i:
                    funders[z] += 1
        shared = [c for c in funders.values() if c >= 2]
        i3 = sum(c / len(recipients) for c in shared) / len(shared) if shared else 0.0
        i4 = float(np.mean([d_out[v] == 2 for v in recipients])) if len(recipients) >= 2 else 0.0
        two = a @ a  # two[i, y] = number of length-2 paths i -> y
        targets = [y for y in range(len(order)) if y != i and two[i, y] > 0]
        if d_out[i] > 2 and targets:
            i5 = sum(two[i, y] for y in targets) / (d_out[i] + d_in[i]) / len(targets)
        else:
            i5 = 0.0
        if d_out[i] > 2 and d_in[i] > 2:
            i6 = 1 - abs(d_out[i] - d_in[i]) / (d_out[i] + d_in[i])
        else:
            i6 = 0.0
        out[x] = [ratio(d_in[i], d_in.max()), ratio(d_out[i], d_out.max()), i3, i4, float(i5), float(i6)]
    return out


# ---------------------------------------------------------------------------
# modularity

def set_partitions(n: int):
    """All partitions of ``range(n)`` as restricted growth strings."""
    def rec(i, a, k):
        if i == n:
            yield list(a)
            return
        for c in range(k + 1):
            a.append(c)
            yield from rec(i + 1, a, max(k, c + 1))
            a.pop()
    yield from rec(0, [], 0)


def modularity_matrix_form(w: np.ndarray, labels) -> float:
    """Q = (1/2m) sum_ij [w_ij - k_i k_j / 2m] delta(c_i, c_j)."""
    two_m = w.sum()
    if two_m == 0:
        return 0.0
    k = w.sum(axis=1)
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    return float(((w - np.outer(k, k) / two_m) * same).sum() / two_m)


def brute_force_modularity(g: TransactionalGraph) -> float:
    order, w = undirected_weights(g)
    return max(modularity_matrix_form(w, p) for p in set_partitions(len(order)))


def partition_modularity(g: TransactionalGraph, partition: dict[str, int]) -> float:
    order, w = undirected_weights(g)
    return modularity_matrix_form(w, [partition[v] for v in order])


# ---------------------------------------------------------------------------
# distance-based centralities via Floyd-Warshall

def floyd_warshall(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hop distances and shortest-path counts of an undirected graph."""
    n = len(w)
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0)
    d[(w > 0)] = 1
    for k in range(n):
        d = np.minimum(d, d[:, [k]] + d[[k], :])
    # path counts: sigma(s,t) = number of neighbours u of t with d(s,u)+1 = d(s,t), summed
    sigma = np.zeros((n, n))
    np.fill_diagonal(sigma, 1)
    for s in range(n):
        for t in sorted(range(n), key=lambda t: d[s, t]):
            if t != s and np.isfinite(d[s, t]):
                sigma[s, t] = sum(sigma[s, u] for u in range(n) if w[u, t] > 0 and d[s, u] + 1 == d[s, t])
    return d, sigma


def distance_centralities(g: TransactionalGraph) -> dict[str, np.ndarray]:
    order, w = undirected_weights(g)
    n = len(order)
    d, sigma = floyd_warshall(w)
    close, harm, betw = np.zeros(n), np.zeros(n), np.zeros(n)
    for x in range(n):
        reach = [y for y in range(n) if y != x and np.isfinite(d[x, y])]
        if reach and n > 1:
            total = sum(d[x, y] for y in reach)
            close[x] = (len(reach) / (n - 1)) * (len(reach) / total)
            harm[x] = sum(1 / d[x, y] for y in reach) / (n - 1)
    if n > 2:
        for v in range(n):
            acc = 0.0
            for s, t in itertools.combinations([u for u in range(n) if u != v], 2):
                if np.isfinite(d[s, t]) and d[s, v] + d[v, t] == d[s, t]:
                    acc += sigma[s, v] * sigma[v, t] / sigma[s, t]
            betw[v] = acc / ((n - 1) * (n - 2) / 2)
    return {"closeness": close, "harmonic": harm, "betweenness": betw}


def burt_constraint(g: TransactionalGraph) -> np.ndarray:
    order, w = undirected_weights(g)
    n = len(order)
    strength = w.sum(axis=1)
    p = np.divide(w, strength[:, None], out=np.zeros_like(w), where=strength[:, None] > 0)
    out = np.zeros(n)
    for i in range(n):
        for j in np.flatnonzero(w[i]):
            indirect = sum(p[i, q] * p[q, j] for q in range(n) if q not in (i, j))
            out[i] += (p[i, j] + indirect) ** 2
    return out


# ---------------------------------------------------------------------------
# random-walk return times

def monte_carlo_return_std(w: np.ndarray, v: int, n_returns: int, seed: int) -> tuple[float, float]:
    """Mean and std of first return times to ``v`` from ``n_returns`` simulated excursions.

    All walkers step in lockstep; a walker stops once it is back at ``v``.
    """
    rng = np.random.default_rng(seed)
    cum = np.cumsum(w / w.sum(axis=1, keepdims=True), axis=1)
    cum[:, -1] = 1.0
    pos = np.full(n_returns, v)
    steps = np.zeros(n_returns, dtype=np.int64)
    active = np.arange(n_returns)
    t = 0
    while active.size:
        t += 1
        u = rng.random(active.size)
        nxt = (u[:, None] >= cum[pos[active]]).sum(axis=1)
        pos[active] = nxt
        done = nxt == v
        steps[active[done]] = t
        active = active[~done]
    return float(steps.mean()), float(steps.std())
