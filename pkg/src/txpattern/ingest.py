"""Loading transaction records and building directed transactional graphs."""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Transaction:
    sender: str
    receiver: str
    timestamp: int  # UTC epoch seconds
    source_row: int = -1


@dataclass(frozen=True)
class ColumnMapping:
    """Names of the columns holding sender, receiver and time.

    Either ``timestamp`` (a combined ISO-8601 column) or ``date`` (with an
    optional ``time``) must be set. Defaults follow the public SAML-D release.
    """

    sender: str = "Sender_account"
    receiver: str = "Receiver_account"
    date: str | None = "Date"
    time: str | None = "Time"
    timestamp: str | None = None
    delimiter: str = ","

    def required(self) -> list[str]:
        cols = [self.sender, self.receiver]
        if self.timestamp:
            cols.append(self.timestamp)
        else:
            if not self.date:
                raise DataError("column mapping needs either 'timestamp' or 'date'")
            cols.append(self.date)
            if self.time:
                cols.append(self.time)
        return cols

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnMapping":
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "sender": self.sender,
            "receiver": self.receiver,
            "date": self.date,
            "time": self.time,
            "timestamp": self.timestamp,
            "delimiter": self.delimiter,
        }


@dataclass
class LoadReport:
    rows_read: int = 0
    loaded: int = 0
    dropped: Counter = field(default_factory=Counter)

    @property
    def self_transfers(self) -> int:
        return self.dropped["self_transfer"]

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "loaded": self.loaded,
            "dropped": dict(sorted(self.dropped.items())),
        }

    def write(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def parse_timestamp(date: str, time: str | None = None) -> int:
    """Parse a date (plus optional wall-clock time) into UTC epoch seconds.

    Naive values are taken as UTC. Date-only values map to midnight.
    """
    text = date.strip()
    if time is not None and time.strip():
        text = f"{text}T{time.strip()}"
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_timestamp(ts: int) -> tuple[str, str]:
    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    return dt.strftime("%Y-%m-%d"), dt.strftime("%H:%M:%S")


def load_transactions(
    path: str | Path, schema: ColumnMapping | None = None
) -> tuple[list[Transaction], LoadReport]:
    """Read transactions from a delimited file with a header row.

    Malformed rows and self-transfers are skipped and tallied in the
    returned :class:`LoadReport`. ``source_row`` is the 0-based data row index.
    """
    schema = schema or ColumnMapping()
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing input file: {path}")

    report = LoadReport()
    txs: list[Transaction] = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh, delimiter=schema.delimiter)
        header = reader.fieldnames or []
        missing = [c for c in schema.required() if c not in header]
        if header and missing:
            raise DataError(f"missing mapped column(s) {missing} in {path}")
        for row_idx, row in enumerate(reader):
            report.rows_read += 1
            sender = (row.get(schema.sender) or "").strip()
            receiver = (row.get(schema.receiver) or "").strip()
            if not sender or not receiver:
                report.dropped["empty_account"] += 1
                continue
            try:
                if schema.timestamp:
                    ts = parse_timestamp(row[schema.timestamp])
                else:
                    ts = parse_timestamp(row[schema.date], row.get(schema.time) if schema.time else None)
            except (ValueError, TypeError, AttributeError):
                report.dropped["bad_timestamp"] += 1
                continue
            if sender == receiver:
                report.dropped["self_transfer"] += 1
                continue
            txs.append(Transaction(sender, receiver, ts, row_idx))

    report.loaded = len(txs)
    if not txs:
        raise DataError(f"zero parseable rows in {path}")
    if report.dropped:
        logger.info("dropped rows while loading %s: %s", path, dict(report.dropped))
    return txs, report


def write_transactions(
    txs: Iterable[Transaction], path: str | Path, schema: ColumnMapping | None = None
) -> None:
    """Write transactions in the format :func:`load_transactions` reads."""
    schema = schema or ColumnMapping()
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=schema.delimiter, lineterminator="\n")
        if schema.timestamp:
            writer.writerow([schema.timestamp, schema.sender, schema.receiver])
            for t in txs:
                d, hms = format_timestamp(t.timestamp)
                writer.writerow([f"{d}T{hms}Z", t.sender, t.receiver])
        else:
            cols = [c for c in (schema.time, schema.date) if c] + [schema.sender, schema.receiver]
            writer.writerow(cols)
            for t in txs:
                d, hms = format_timestamp(t.timestamp)
                vals = ([hms] if schema.time else []) + [d, t.sender, t.receiver]
                writer.writerow(vals)


class TransactionalGraph:
    """Directed transaction multigraph with a collapsed simple view.

    ``simple_edges`` maps each distinct ordered pair ``(u, v)`` to the number
    of transactions from ``u`` to ``v``. Degrees count distinct neighbours.
    Instances are treated as immutable once built.
    """

    def __init__(self, nodes: Iterable[str], multi_edges: Sequence[tuple[str, str, int]]):
        self.nodes: frozenset[str] = frozenset(nodes)
        self.multi_edges: tuple[tuple[str, str, int], ...] = tuple(multi_edges)
        weights: Counter = Counter((u, v) for u, v, _ in self.multi_edges)
        self.simple_edges: dict[tuple[str, str], int] = dict(sorted(weights.items()))
        succ: dict[str, set[str]] = {n: set() for n in self.nodes}
        pred: dict[str, set[str]] = {n: set() for n in self.nodes}
        for u, v in self.simple_edges:
            succ[u].add(v)
            pred[v].add(u)
        self._succ = {n: frozenset(s) for n, s in succ.items()}
        self._pred = {n: frozenset(s) for n, s in pred.items()}

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return (
            f"TransactionalGraph(|V|={len(self.nodes)}, |E|={len(self.multi_edges)}, "
            f"simple={len(self.simple_edges)})"
        )

    def successors(self, x: str) -> frozenset[str]:
        return self._succ[x]

    def predecessors(self, x: str) -> frozenset[str]:
        return self._pred[x]

    def out_degree(self, x: str) -> int:
        return len(self._succ[x])

    def in_degree(self, x: str) -> int:
        return len(self._pred[x])

    def sorted_nodes(self) -> list[str]:
        return sorted(self.nodes)

    def undirected_weights(self) -> dict[tuple[str, str], int]:
        """Symmetrized weights keyed by ``(min, max)`` pair: multiplicity in both directions."""
        out: Counter = Counter()
        for (u, v), w in self.simple_edges.items():
            out[(u, v) if u < v else (v, u)] += w
        return dict(sorted(out.items()))

    def subgraph(self, nodes: Iterable[str]) -> "TransactionalGraph":
        keep = frozenset(nodes)
        edges = [e for e in self.multi_edges if e[0] in keep and e[1] in keep]
        return TransactionalGraph(keep, edges)

    @classmethod
    def from_simple_edges(
        cls, edges: Iterable[tuple[str, str] | tuple[str, str, int]], nodes: Iterable[str] = ()
    ) -> "TransactionalGraph":
        """Convenience constructor for tests: ``(u, v[, weight])`` with timestamps 0."""
        multi = []
        ns = set(nodes)
        for e in edges:
            u, v = e[0], e[1]
            w = e[2] if len(e) > 2 else 1
            ns.update((u, v))
            multi.extend([(u, v, 0)] * w)
        return cls(ns, multi)


def build_graph(txs: Iterable[Transaction]) -> TransactionalGraph:
    """Build the directed transactional graph of a transaction sequence.

    Multi-edges are kept in a canonical sorted order so that the result does
    not depend on input order.
    """
    multi = []
    nodes = set()
    for t in txs:
        if t.sender == t.receiver:
            continue
        nodes.add(t.sender)
        nodes.add(t.receiver)
        multi.append((t.sender, t.receiver, t.timestamp))
    multi.sort()
    return TransactionalGraph(nodes, multi)
