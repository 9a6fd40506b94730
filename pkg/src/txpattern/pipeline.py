"""In-memory stage functions shared by the CLI and the experiment harness."""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import gae
from .community import Community, communities_from_snapshots
from .dataset import TrainValSplit
from .features import raw_features
from .indicators import PATTERNS, Pattern, PatternLabel, label_community
from .ingest import Transaction
from .temporal import dissect

logger = logging.getLogger(__name__)

Inputs = Mapping[str, tuple[np.ndarray, np.ndarray]]


def derive_seed(master: int, *labels: str) -> int:
    """Stage seed from a master seed and a label path, via SHA-256.

    Changing the label of one stage never perturbs the seeds of the others.
    """
    text = "/".join([str(int(master)), *labels]).encode()
    return int.from_bytes(hashlib.sha256(text).digest()[:8], "little") >> 1


def stage_seed(master: int, stage: str, overrides: Mapping[str, int] | None = None) -> int:
    if overrides and stage in overrides:
        return int(overrides[stage])
    return derive_seed(master, stage)


def model_seed(train_seed: int, variant: str, pattern: Pattern) -> int:
    return derive_seed(train_seed, variant, pattern.slug)


def find_communities(
    txs: Sequence[Transaction], rho: int, *, min_size: int = 4, seed: int = 0, origin: int | None = None
) -> tuple[list[Community], dict[str, int]]:
    snapshots = dissect(txs, rho, origin)
    communities, census = communities_from_snapshots(snapshots, min_size=min_size, seed=seed)
    census["snapshots"] = len(snapshots)
    return communities, census


def label_all(communities: Iterable[Community]) -> list[tuple[str, PatternLabel]]:
    return [(c.id, label_community(c.subgraph)) for c in communities]


def community_input(c: Community) -> tuple[np.ndarray, np.ndarray]:
    """(symmetrised adjacency, raw features), rows in sorted node order."""
    order, x = raw_features(c.subgraph)
    return gae.symmetric_adjacency(c.subgraph, order), x


def build_inputs(communities: Iterable[Community]) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    return {c.id: community_input(c) for c in communities}


def _train_job(args):
    split, inputs, variant, cfg = args
    return gae.train(split.train, inputs, variant, split.label, cfg)


def train_variant(
    splits: Mapping[Pattern, TrainValSplit],
    inputs: Inputs,
    variant: str,
    cfg: gae.TrainConfig,
    train_seed: int,
    jobs: int = 1,
) -> dict[Pattern, gae.GaeModel]:
    """One model per pattern. Each model's seed depends only on (train seed, variant, pattern)."""
    jobs_args = []
    for p in PATTERNS:
        if p not in splits:
            continue
        sp = splits[p]
        needed = set(sp.train)
        sub = {c: inputs[c] for c in needed}
        model_cfg = gae.TrainConfig.from_dict({**cfg.to_dict(), "seed": model_seed(train_seed, variant, p)})
        jobs_args.append((sp, sub, variant, model_cfg))
    if jobs > 1 and len(jobs_args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            models = list(pool.map(_train_job, jobs_args))
    else:
        models = [_train_job(a) for a in jobs_args]
    return {m.pattern: m for m in models}


def synthetic_corpus(per_pattern: int, seed: int, noise_edges: int | None = None, n_windows: int = 4):
    """Planted corpus with ``per_pattern`` randomly sized components of each pattern.

    Noise defaults to one edge per planted component.
    """
    from . import synthgen

    templates = synthgen.random_templates(per_pattern, derive_seed(seed, "templates"))
    noise = per_pattern * len(PATTERNS) if noise_edges is None else noise_edges
    return synthgen.generate_corpus(templates, noise, derive_seed(seed, "corpus"), n_windows=n_windows)


def synthetic_experiment(
    per_pattern: int,
    seed: int,
    variants: Sequence[str] = gae.VARIANTS,
    cfg: gae.TrainConfig | None = None,
    *,
    noise_edges: int | None = None,
    jobs: int = 1,
):
    """Planted corpus -> communities -> weak labels -> splits -> per-pattern GAEs -> cross-pattern reports."""
    from . import dataset, evalreport, synthgen

    cfg = cfg or gae.TrainConfig()
    corpus = synthetic_corpus(per_pattern, stage_seed(seed, "synth"), noise_edges)
    communities, census = find_communities(corpus.transactions, synthgen.WEEK, seed=stage_seed(seed, "communities"))
    labels = label_all(communities)
    inputs = build_inputs(communities)
    sets = dataset.build_pattern_sets((cid, lab.label) for cid, lab in labels)
    splits = dataset.make_splits(sets, stage_seed(seed, "datasets"))
    val_sets = {p: sp.val for p, sp in splits.items()}
    reports, models = [], {}
    for variant in variants:
        models[variant] = train_variant(splits, inputs, variant, cfg, stage_seed(seed, "train"), jobs)
        reports.append(evalreport.cross_evaluate(variant, models[variant], val_sets, inputs))
    return reports, {"census": census, "splits": splits, "models": models, "labels": labels}
