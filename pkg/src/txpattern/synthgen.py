"""Deterministic transaction corpora with planted suspicious-pattern components.

Each planted component realises exactly the defining edge set of one of the
six patterns on fresh accounts, with all of its timestamps inside a single
snapshot window. Background noise lives in separate components of fewer than
four accounts, so the size filter removes it downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .indicators import PATTERNS, Pattern
from .ingest import ColumnMapping, Transaction, write_transactions

WEEK = 7 * 24 * 3600
DEFAULT_ORIGIN = 1664582400  # 2022-10-01T00:00:00Z

# (name, minimum) of each size parameter, per pattern
SIZE_PARAMS: dict[Pattern, tuple[tuple[str, int], ...]] = {
    Pattern.COLLECTOR: (("n", 3),),
    Pattern.SINK: (("n", 3),),
    Pattern.COLLUSION: (("colluders", 2), ("shared", 2)),
    Pattern.BRANCHING: (("width", 2), ("depth", 1)),
    Pattern.SCATTER_GATHER: (("n", 3),),
    Pattern.GATHER_SCATTER: (("n", 3), ("m", 3)),
}

# inclusive ranges used by random_templates
DEFAULT_SIZE_RANGES: dict[Pattern, dict[str, tuple[int, int]]] = {
    Pattern.COLLECTOR: {"n": (3, 10)},
    Pattern.SINK: {"n": (3, 10)},
    Pattern.COLLUSION: {"colluders": (2, 3), "shared": (2, 4)},
    Pattern.BRANCHING: {"width": (2, 4), "depth": (1, 1)},
    Pattern.SCATTER_GATHER: {"n": (3, 8)},
    Pattern.GATHER_SCATTER: {"n": (3, 6)},
}


@dataclass(frozen=True)
class PatternTemplate:
    kind: Pattern
    size_params: dict = field(default_factory=dict)
    jitter: int = WEEK - 1  # spread of timestamps, seconds

    def __post_init__(self):
        if self.kind not in SIZE_PARAMS:
            raise ValueError(f"no template for {self.kind}")
        params = dict(self.size_params)
        if self.kind is Pattern.GATHER_SCATTER:
            params.setdefault("m", params.get("n"))
        if self.kind is Pattern.BRANCHING:
            params.setdefault("depth", 1)
        for name, minimum in SIZE_PARAMS[self.kind]:
            if name not in params:
                raise ValueError(f"{self.kind}: missing size parameter {name!r}")
            if int(params[name]) < minimum:
                raise ValueError(f"{self.kind}: {name}={params[name]} is below the minimum {minimum}")
        if self.jitter < 0:
            raise ValueError("jitter must be non-negative")
        object.__setattr__(self, "size_params", {k: int(v) for k, v in params.items()})


def pattern_edges(template: PatternTemplate, first_id: int = 0) -> tuple[list[tuple[str, str]], list[str]]:
    """Defining edge set of a template on freshly numbered accounts."""
    counter = iter(range(first_id, first_id + 10**7))

    def fresh() -> str:
        return account_id(next(counter))

    p = template.size_params
    edges: list[tuple[str, str]] = []
    kind = template.kind
    if kind is Pattern.COLLECTOR:
        x = fresh()
        edges = [(fresh(), x) for _ in range(p["n"])]
    elif kind is Pattern.SINK:
        x = fresh()
        edges = [(x, fresh()) for _ in range(p["n"])]
    elif kind is Pattern.COLLUSION:
        funders = [fresh() for _ in range(p["colluders"])]
        shared = [fresh() for _ in range(p["shared"])]
        edges = [(f, v) for f in funders for v in shared]
    elif kind is Pattern.BRANCHING:
        x = fresh()
        level = [fresh() for _ in range(p["width"])]
        edges = [(x, v) for v in level]
        for _ in range(p["depth"]):
            nxt = []
            for v in level:
                kids = [fresh(), fresh()]
                edges.extend((v, k) for k in kids)
                nxt.extend(kids)
            level = nxt
    elif kind is Pattern.SCATTER_GATHER:
        x = fresh()
        mids = [fresh() for _ in range(p["n"])]
        y = fresh()
        edges = [(x, v) for v in mids] + [(v, y) for v in mids]
    elif kind is Pattern.GATHER_SCATTER:
        x = fresh()
        edges = [(fresh(), x) for _ in range(p["n"])]
        edges += [(x, fresh()) for _ in range(p["m"])]
    nodes = sorted({u for e in edges for u in e})
    return edges, nodes


def account_id(k: int) -> str:
    return f"A{k:08d}"


def generate_pattern(
    template: PatternTemplate, seed: int, *, start: int = DEFAULT_ORIGIN, first_id: int = 0
) -> tuple[list[Transaction], set[str]]:
    """Transactions realising one planted pattern.

    Timestamps are drawn uniformly from ``[start, start + jitter]``.
    """
    rng = np.random.default_rng(seed)
    edges, nodes = pattern_edges(template, first_id)
    offsets = rng.integers(0, template.jitter + 1, size=len(edges))
    txs = [Transaction(u, v, int(start + o)) for (u, v), o in zip(edges, offsets)]
    return txs, set(nodes)


def random_templates(
    per_pattern: int,
    seed: int,
    patterns: Sequence[Pattern] = PATTERNS,
    size_ranges: dict[Pattern, dict[str, tuple[int, int]]] | None = None,
) -> list[PatternTemplate]:
    """``per_pattern`` templates of each kind with uniformly drawn sizes."""
    ranges = size_ranges or DEFAULT_SIZE_RANGES
    rng = np.random.default_rng(seed)
    out = []
    for kind in patterns:
        for _ in range(per_pattern):
            params = {name: int(rng.integers(lo, hi + 1)) for name, (lo, hi) in ranges[kind].items()}
            out.append(PatternTemplate(kind, params))
    return out


@dataclass
class SynthCorpus:
    transactions: list[Transaction]
    oracle: dict[int, tuple[frozenset[str], Pattern]]
    seed: int

    def write(self, path: str | Path, oracle_path: str | Path | None = None,
              schema: ColumnMapping | None = None) -> None:
        write_transactions(self.transactions, path, schema)
        if oracle_path is not None:
            payload = {
                "seed": self.seed,
                "components": [
                    {"id": cid, "label": label.value, "nodes": sorted(nodes)}
                    for cid, (nodes, label) in sorted(self.oracle.items())
                ],
            }
            Path(oracle_path).write_text(json.dumps(payload, indent=1) + "\n")

    @staticmethod
    def read_oracle(path: str | Path) -> dict[int, tuple[frozenset[str], Pattern]]:
        payload = json.loads(Path(path).read_text())
        return {
            int(c["id"]): (frozenset(c["nodes"]), Pattern(c["label"])) for c in payload["components"]
        }


def generate_corpus(
    templates: Sequence[PatternTemplate],
    noise_edges: int,
    seed: int,
    *,
    origin: int = DEFAULT_ORIGIN,
    rho: int = WEEK,
    n_windows: int = 4,
) -> SynthCorpus:
    """Plant every template on disjoint accounts and add background noise.

    Each component is assigned a uniformly drawn window ``[origin + k*rho,
    origin + (k+1)*rho)``. Noise edges are grouped into paths of at most two
    edges (three accounts). Transactions are sorted by time and ``source_row``
    matches their position in the written file.
    """
    if rho <= 0 or n_windows <= 0:
        raise ValueError("rho and n_windows must be positive")
    rng = np.random.default_rng(seed)
    comp_seeds = rng.integers(0, 2**63 - 1, size=len(templates))
    windows = rng.integers(0, n_windows, size=len(templates))
    next_id = 0
    raw: list[Transaction] = []
    oracle: dict[int, tuple[frozenset[str], Pattern]] = {}
    for cid, (tpl, s, w) in enumerate(zip(templates, comp_seeds, windows)):
        jitter = min(tpl.jitter, rho - 1)
        if jitter != tpl.jitter:
            tpl = PatternTemplate(tpl.kind, tpl.size_params, jitter)
        txs, nodes = generate_pattern(tpl, int(s), start=origin + int(w) * rho, first_id=next_id)
        next_id += len(nodes)
        raw.extend(txs)
        oracle[cid] = (frozenset(nodes), tpl.kind)

    remaining = noise_edges
    while remaining > 0:
        k = min(remaining, int(rng.integers(1, 3)))
        chain = [account_id(next_id + i) for i in range(k + 1)]
        next_id += k + 1
        w = int(rng.integers(0, n_windows))
        for a, b in zip(chain, chain[1:]):
            raw.append(Transaction(a, b, origin + w * rho + int(rng.integers(0, rho))))
        remaining -= k

    raw.sort(key=lambda t: (t.timestamp, t.sender, t.receiver))
    txs = [Transaction(t.sender, t.receiver, t.timestamp, i) for i, t in enumerate(raw)]
    return SynthCorpus(txs, oracle, seed)
