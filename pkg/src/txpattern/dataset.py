"""Pattern sets, train/validation splits and random oversampling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .indicators import PATTERNS, Pattern

TRAIN_TARGET = 10_000
TRAIN_FRACTION = 0.8


@dataclass
class PatternSet:
    label: Pattern
    members: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.members)


@dataclass
class TrainValSplit:
    label: Pattern
    train: list[str]
    val: list[str]
    seed: int
    ros_applied: bool = False

    @property
    def distinct_train(self) -> list[str]:
        return sorted(set(self.train))

    def to_dict(self) -> dict:
        return {
            "label": self.label.value,
            "seed": self.seed,
            "ros_applied": self.ros_applied,
            "train": self.train,
            "val": self.val,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainValSplit":
        return cls(Pattern(d["label"]), list(d["train"]), list(d["val"]), int(d["seed"]), bool(d["ros_applied"]))


def build_pattern_sets(labeled: Iterable[tuple[str, Pattern]]) -> dict[Pattern, PatternSet]:
    """Group community ids by weak label; unlabelled communities are dropped."""
    sets = {p: PatternSet(p) for p in PATTERNS}
    for cid, label in labeled:
        if label in sets:
            sets[label].members.append(cid)
    for s in sets.values():
        s.members.sort()
    return sets


def is_majority(n: int, target: int = TRAIN_TARGET, fraction: float = TRAIN_FRACTION) -> bool:
    """Fixed-size regime when the proportional share would already reach ``target``."""
    return int(fraction * n) >= target


def split(
    ps: PatternSet, seed: int, target: int = TRAIN_TARGET, fraction: float = TRAIN_FRACTION
) -> TrainValSplit:
    """Split a pattern set before any oversampling.

    Large sets give ``target`` uniformly drawn training ids; smaller sets give
    ``floor(fraction * n)`` training ids. Everything else is validation.
    """
    n = len(ps)
    if n < 2:
        raise ValueError(f"{ps.label}: {n} communities is too few to split")
    members = sorted(ps.members)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = target if is_majority(n, target, fraction) else int(fraction * n)
    n_train = min(max(n_train, 1), n - 1)
    train = sorted(members[i] for i in perm[:n_train])
    val = sorted(members[i] for i in perm[n_train:])
    return TrainValSplit(ps.label, train, val, seed)


def oversample(sp: TrainValSplit, target: int = TRAIN_TARGET, seed: int = 0) -> TrainValSplit:
    """Random oversampling of whole communities.

    The training list becomes exactly ``target`` ids: every distinct training
    id once, topped up with uniform draws (with replacement) from the same
    ids. Validation ids are untouched.
    """
    distinct = sp.distinct_train
    if not distinct:
        raise ValueError("cannot oversample an empty training set")
    if target <= len(sp.train):
        return sp
    rng = np.random.default_rng(seed)
    extra = rng.integers(0, len(distinct), size=target - len(distinct))
    train = distinct + [distinct[i] for i in extra]
    return TrainValSplit(sp.label, train, list(sp.val), sp.seed, ros_applied=True)


def make_splits(
    sets: dict[Pattern, PatternSet],
    seed: int,
    target: int = TRAIN_TARGET,
    fraction: float = TRAIN_FRACTION,
) -> dict[Pattern, TrainValSplit]:
    """Split every pattern set and oversample those in the proportional regime.

    Sets with fewer than two communities are skipped.
    """
    out = {}
    ss = np.random.SeedSequence(seed)
    for p, child in zip(PATTERNS, ss.spawn(len(PATTERNS))):
        ps = sets.get(p)
        if ps is None or len(ps) < 2:
            continue
        s_split, s_ros = (int(x) for x in child.generate_state(2))
        sp = split(ps, s_split, target, fraction)
        if not is_majority(len(ps), target, fraction):
            sp = oversample(sp, target, s_ros)
        out[p] = sp
    return out


def save_splits(splits: dict[Pattern, TrainValSplit], path: str | Path) -> None:
    payload = {p.value: sp.to_dict() for p, sp in splits.items()}
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def load_splits(path: str | Path) -> dict[Pattern, TrainValSplit]:
    payload = json.loads(Path(path).read_text())
    return {Pattern(k): TrainValSplit.from_dict(v) for k, v in payload.items()}


def check_leakage(splits: Sequence[TrainValSplit] | dict) -> None:
    values = splits.values() if isinstance(splits, dict) else splits
    for sp in values:
        overlap = set(sp.train) & set(sp.val)
        if overlap:
            raise AssertionError(f"{sp.label}: {len(overlap)} ids in both train and val")
