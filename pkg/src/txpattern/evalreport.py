"""Cross-pattern reconstruction-error matrices, diagonal-minimum verdicts and
separability margins, plus the on-disk report bundle.

Entry ``(p, q)`` of a variant's matrix is the mean reconstruction error of the
model trained on pattern ``p`` over the validation communities of pattern
``q``. Missing models or empty validation sets leave the entry absent (NaN in
memory, ``NA`` on disk).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .gae import VARIANTS, GaeModel, reconstruction_errors
from .indicators import PATTERNS, Pattern

ABSENT = "NA"
K = len(PATTERNS)


def diag_min_flags(matrix: np.ndarray) -> list[bool | None]:
    """Per row: is the diagonal the row minimum (ties count)? ``None`` if undefined."""
    out: list[bool | None] = []
    for p in range(K):
        row = matrix[p]
        if np.isnan(row[p]):
            out.append(None)
            continue
        others = row[~np.isnan(row)]
        out.append(bool(row[p] <= others.min()))
    return out


def separability_margin(row: np.ndarray, p: int) -> float | None:
    """``min_{q != p} row[q] - row[p]`` over present entries; ``None`` if undefined."""
    others = np.delete(row, p)
    others = others[~np.isnan(others)]
    if np.isnan(row[p]) or others.size == 0:
        return None
    return float(others.min() - row[p])


@dataclass
class ReconstructionReport:
    variant: str
    matrix: np.ndarray
    counts: np.ndarray = field(default_factory=lambda: np.zeros((K, K), dtype=int))

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        self.counts = np.asarray(self.counts, dtype=int)
        if self.matrix.shape != (K, K) or self.counts.shape != (K, K):
            raise ValueError("report matrices must be 6x6")
        if np.any(self.matrix[~np.isnan(self.matrix)] < 0):
            raise ValueError("reconstruction errors are non-negative")

    @property
    def diag_min_flags(self) -> list[bool | None]:
        return diag_min_flags(self.matrix)

    @property
    def margins(self) -> list[float | None]:
        return [separability_margin(self.matrix[p], p) for p in range(K)]

    @property
    def n_detected(self) -> int:
        return sum(1 for f in self.diag_min_flags if f)

    def entry(self, train: Pattern, evaluated: Pattern) -> float:
        return float(self.matrix[PATTERNS.index(train), PATTERNS.index(evaluated)])


Errors = dict[tuple[Pattern, Pattern], list[tuple[str, float]]]


def community_errors(
    variant: str,
    models: Mapping[Pattern, GaeModel],
    val_sets: Mapping[Pattern, Sequence[str]],
    inputs: Mapping[str, tuple[np.ndarray, np.ndarray]],
) -> Errors:
    """Reconstruction error of every validation community under every model of one variant."""
    out: Errors = {}
    for p in PATTERNS:
        model = models.get(p)
        if model is None:
            continue
        if model.variant != variant:
            raise ValueError(f"model for {p} is a {model.variant} model, expected {variant}")
        for q in PATTERNS:
            ids = sorted(val_sets.get(q, ()))
            if ids:
                errors = reconstruction_errors(model, [inputs[c] for c in ids])
                out[p, q] = [(c, float(e)) for c, e in zip(ids, errors)]
    return out


def report_from_errors(variant: str, errors: Errors) -> ReconstructionReport:
    matrix = np.full((K, K), np.nan)
    counts = np.zeros((K, K), dtype=int)
    for (p, q), rows in errors.items():
        if rows:
            i, j = PATTERNS.index(p), PATTERNS.index(q)
            matrix[i, j] = float(np.mean([e for _, e in rows]))
            counts[i, j] = len(rows)
    return ReconstructionReport(variant, matrix, counts)


def cross_evaluate(
    variant: str,
    models: Mapping[Pattern, GaeModel],
    val_sets: Mapping[Pattern, Sequence[str]],
    inputs: Mapping[str, tuple[np.ndarray, np.ndarray]],
) -> ReconstructionReport:
    return report_from_errors(variant, community_errors(variant, models, val_sets, inputs))


def select_best(reports: Sequence[ReconstructionReport]) -> dict[Pattern, str | None]:
    """Per pattern, the variant with the largest margin among those whose diagonal is the row minimum.

    Ties go to the earlier variant in GCN < SAGE < GAT order; no qualifying variant gives ``None``.
    """
    ranked = sorted(reports, key=lambda r: VARIANTS.index(r.variant))
    out: dict[Pattern, str | None] = {}
    for i, p in enumerate(PATTERNS):
        best, best_margin = None, -math.inf
        for r in ranked:
            m = r.margins[i]
            if r.diag_min_flags[i] and m is not None and m > best_margin:
                best, best_margin = r.variant, m
        out[p] = best
    return out


# ---------------------------------------------------------------------------
# bundle

def _fmt(x: float) -> str:
    return ABSENT if np.isnan(x) else repr(float(x))


def _num(s: str) -> float:
    return math.nan if s == ABSENT else float(s)


def matrix_csv(report: ReconstructionReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["train_pattern", *[p.value for p in PATTERNS]])
    for i, p in enumerate(PATTERNS):
        w.writerow([p.value, *[_fmt(x) for x in report.matrix[i]]])
    return buf.getvalue()


def long_csv(reports: Sequence[ReconstructionReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "train_pattern", "eval_pattern", "mean_error", "n"])
    for r in reports:
        for i, p in enumerate(PATTERNS):
            for j, q in enumerate(PATTERNS):
                w.writerow([r.variant, p.value, q.value, _fmt(r.matrix[i, j]), int(r.counts[i, j])])
    return buf.getvalue()


def text_report(reports: Sequence[ReconstructionReport]) -> str:
    width = max(len(p.value) for p in PATTERNS) + 2
    lines = []
    for r in reports:
        lines.append(f"== {r.variant.upper()}: diagonal is the row minimum on {r.n_detected}/{K} patterns")
        lines.append("train \\ eval".ljust(width) + "".join(p.value[:12].rjust(14) for p in PATTERNS)
                     + "   diag-min     margin")
        for i, p in enumerate(PATTERNS):
            cells = "".join((ABSENT if np.isnan(x) else f"{x:.6f}").rjust(14) for x in r.matrix[i])
            flag = r.diag_min_flags[i]
            margin = r.margins[i]
            lines.append(
                p.value.ljust(width) + cells
                + ("n/a" if flag is None else ("yes" if flag else "no")).rjust(11)
                + ("n/a" if margin is None else f"{margin:+.6f}").rjust(11)
            )
        lines.append("")
    lines.append("best variant per pattern (largest margin among diagonal-minimum variants)")
    for p, v in select_best(reports).items():
        lines.append(f"  {p.value.ljust(width)}{v or 'none'}")
    return "\n".join(lines) + "\n"


def emit_report(reports: Sequence[ReconstructionReport], out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = sorted(reports, key=lambda r: VARIANTS.index(r.variant))
    written = []
    for r in reports:
        path = out_dir / f"matrix_{r.variant}.csv"
        path.write_text(matrix_csv(r))
        written.append(path)
    for name, text in (("long.csv", long_csv(reports)), ("report.txt", text_report(reports))):
        (out_dir / name).write_text(text)
        written.append(out_dir / name)
    return written


def read_report(out_dir: str | Path) -> list[ReconstructionReport]:
    """Parse a bundle written by :func:`emit_report`."""
    out_dir = Path(out_dir)
    data: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    with open(out_dir / "long.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            m, c = data.setdefault(row["variant"], (np.full((K, K), np.nan), np.zeros((K, K), dtype=int)))
            i = PATTERNS.index(Pattern(row["train_pattern"]))
            j = PATTERNS.index(Pattern(row["eval_pattern"]))
            m[i, j] = _num(row["mean_error"])
            c[i, j] = int(row["n"])
    reports = []
    for variant in sorted(data, key=VARIANTS.index):
        m, c = data[variant]
        with open(out_dir / f"matrix_{variant}.csv", newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        dense = np.array([[_num(x) for x in r[1:]] for r in rows])
        if not np.array_equal(dense, m, equal_nan=True):
            raise ValueError(f"matrix_{variant}.csv disagrees with long.csv")
        reports.append(ReconstructionReport(variant, m, c))
    return reports
