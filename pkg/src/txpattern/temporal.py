"""Temporal dissection of a transaction stream into fixed-length snapshots."""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

from .ingest import TransactionalGraph, Transaction, build_graph

DAY = 24 * 3600
_UNITS = {"s": 1, "m": 60, "h": 3600, "d": DAY, "w": 7 * DAY}


def parse_duration(text: str | int) -> int:
    """Parse ``7d``, ``24h``, ``90m``, ``3600s``, ``1w`` (or plain seconds) into seconds."""
    if isinstance(text, int):
        seconds = text
    else:
        m = re.fullmatch(r"\s*(\d+)\s*([smhdw]?)\s*", str(text))
        if not m:
            raise ValueError(f"cannot parse duration {text!r}")
        seconds = int(m.group(1)) * _UNITS[m.group(2) or "s"]
    if seconds <= 0:
        raise ValueError("duration must be positive")
    return seconds


def format_duration(seconds: int) -> str:
    for unit in ("w", "d", "h", "m"):
        if seconds % _UNITS[unit] == 0:
            return f"{seconds // _UNITS[unit]}{unit}"
    return f"{seconds}s"


@dataclass(frozen=True)
class TemporalSnapshot:
    index: int
    start: int
    end: int
    graph: TransactionalGraph

    @property
    def window(self) -> tuple[int, int]:
        return self.start, self.end


def default_origin(txs: Sequence[Transaction]) -> int:
    """Midnight UTC of the day of the earliest transaction."""
    first = min(t.timestamp for t in txs)
    return first - first % DAY


def dissect(txs: Sequence[Transaction], rho: int, origin: int | None = None) -> list[TemporalSnapshot]:
    """Split transactions into half-open windows ``[origin + k*rho, origin + (k+1)*rho)``.

    Windows without transactions are omitted, so snapshot indices may skip.
    Transactions before ``origin`` are rejected.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if not txs:
        raise ValueError("cannot dissect an empty transaction sequence")
    if origin is None:
        origin = default_origin(txs)
    buckets: dict[int, list[Transaction]] = defaultdict(list)
    for t in txs:
        if t.timestamp < origin:
            raise ValueError(f"transaction at {t.timestamp} precedes origin {origin}")
        buckets[(t.timestamp - origin) // rho].append(t)
    return [
        TemporalSnapshot(k, origin + k * rho, origin + (k + 1) * rho, build_graph(buckets[k]))
        for k in sorted(buckets)
    ]
