"""Command-line pipeline: one subcommand per stage plus ``run`` for the whole chain.

Every stage writes into ``<workdir>/<stage>/`` atomically (temp dir + rename)
together with a ``manifest.json`` holding the stage's resolved config, a
config hash chained through its prerequisites, and SHA-256 hashes of its
inputs and outputs. Downstream stages refuse artifacts that are missing,
modified, built from a different config, or older than a rebuilt upstream stage.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import dataset, evalreport, gae, pipeline
from .community import Community, communities_from_snapshots
from .errors import DataError, TxPatternError
from .features import FeatureStore, raw_features
from .indicators import PATTERNS, Pattern, label_community
from .ingest import ColumnMapping, Transaction, TransactionalGraph, build_graph, load_transactions
from .temporal import TemporalSnapshot, dissect, format_duration, parse_duration

logger = logging.getLogger("txpattern")

STAGES = (
    "synth", "ingest", "dissect", "communities", "label",
    "features", "datasets", "train", "evaluate", "report",
)
PREREQUISITES = {
    "synth": (),
    "ingest": ("synth",),
    "dissect": ("ingest",),
    "communities": ("dissect",),
    "label": ("communities",),
    "features": ("communities",),
    "datasets": ("label",),
    "train": ("communities", "features", "datasets"),
    "evaluate": ("communities", "features", "datasets", "train"),
    "report": ("evaluate",),
}
MANIFEST = "manifest.json"


# ---------------------------------------------------------------------------
# config

@dataclass
class PipelineConfig:
    input_path: str | None = None
    columns: dict = field(default_factory=lambda: ColumnMapping().to_dict())
    synth: dict = field(default_factory=lambda: {"per_pattern": 600, "noise_edges": None, "n_windows": 4})
    rho: str = "7d"
    origin: int | None = None
    min_community_size: int = 4
    seed: int = 0
    seeds: dict = field(default_factory=dict)
    train_target: int = dataset.TRAIN_TARGET
    train: dict = field(default_factory=lambda: {k: v for k, v in gae.TrainConfig().to_dict().items() if k != "seed"})
    variants: list = field(default_factory=lambda: list(gae.VARIANTS))
    output: str = "run"

    @classmethod
    def load(cls, path: str | Path | None) -> "PipelineConfig":
        if path is None:
            return cls()
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise DataError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"config file {path} is not valid JSON: {exc}") from None
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(raw) - known)
        if unknown:
            raise DataError(f"unknown config keys: {unknown}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        parse_duration(self.rho)
        bad = [v for v in self.variants if v not in gae.VARIANTS]
        if bad:
            raise DataError(f"unknown variants {bad}")
        if self.min_community_size < 1 or self.train_target < 1:
            raise DataError("min_community_size and train_target must be positive")
        self.train_config(0)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @property
    def rho_seconds(self) -> int:
        return parse_duration(self.rho)

    def stage_seed(self, stage: str) -> int:
        return pipeline.stage_seed(self.seed, stage, self.seeds)

    def train_config(self, seed: int) -> gae.TrainConfig:
        try:
            return gae.TrainConfig.from_dict({**self.train, "seed": seed})
        except (TypeError, ValueError) as exc:
            raise DataError(f"invalid train config: {exc}") from None

    def section(self, stage: str) -> dict:
        """The part of the config a stage's outputs depend on directly."""
        s = {
            "synth": {"synth": self.synth, "seed": self.stage_seed("synth")},
            "ingest": {"input_path": self.input_path, "columns": self.columns},
            "dissect": {"rho": self.rho_seconds, "origin": self.origin},
            "communities": {"min_community_size": self.min_community_size, "seed": self.stage_seed("communities")},
            "datasets": {"train_target": self.train_target, "seed": self.stage_seed("datasets")},
            "train": {"train": self.train, "seed": self.stage_seed("train")},
        }
        return s.get(stage, {})

    def uses_synth(self) -> bool:
        return self.input_path is None


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def config_hash(cfg: PipelineConfig, stage: str) -> str:
    upstream = [config_hash(cfg, p) for p in PREREQUISITES[stage] if p != "synth" or cfg.uses_synth()]
    return _digest({"stage": stage, "section": cfg.section(stage), "upstream": upstream})


def file_hash(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# workspace

class Workspace:
    def __init__(self, root: str | Path, cfg: PipelineConfig):
        self.root = Path(root)
        self.cfg = cfg
        self._hashes: dict[tuple[str, int, int], str] = {}

    def hash(self, path: Path) -> str:
        st = path.stat()
        key = (str(path.resolve()), st.st_mtime_ns, st.st_size)
        if key not in self._hashes:
            self._hashes[key] = file_hash(path)
        return self._hashes[key]

    def path(self, stage: str) -> Path:
        return self.root / stage

    def check(self, stage: str) -> dict:
        """Validate a finished stage and return its manifest."""
        d = self.path(stage)
        mpath = d / MANIFEST
        if not mpath.is_file():
            raise DataError(f"missing prerequisite: stage '{stage}' has not been run in {self.root}")
        manifest = json.loads(mpath.read_text())
        if manifest.get("config_hash") != config_hash(self.cfg, stage):
            raise DataError(f"stage '{stage}' was built with a different config; rerun from '{stage}'")
        for rel, digest in manifest["outputs"].items():
            p = d / rel
            if not p.is_file() or self.hash(p) != digest:
                raise DataError(f"artifact {p} is missing or was modified after stage '{stage}' wrote it")
        if manifest.get("inputs") != self.prerequisites(stage):
            raise DataError(f"stage '{stage}' is stale: an upstream stage was rebuilt since; rerun from '{stage}'")
        return manifest

    def prerequisites(self, stage: str) -> dict[str, str]:
        out = {}
        for p in PREREQUISITES[stage]:
            if p == "synth" and not self.cfg.uses_synth():
                continue
            out[p] = _digest(self.check(p)["outputs"])
        return out

    def commit(self, stage: str, writer: Callable[[Path], None], dest: Path | None = None) -> Path:
        """Run ``writer`` into a temp dir, add the manifest, then swap it into place."""
        dest = dest or self.path(stage)
        inputs = self.prerequisites(stage)
        dest.parent.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(prefix=f".{dest.name}.", dir=dest.parent))
        try:
            writer(tmp)
            outputs = {
                str(p.relative_to(tmp)): file_hash(p)
                for p in sorted(tmp.rglob("*")) if p.is_file() and p.name != MANIFEST
            }
            manifest = {
                "stage": stage,
                "config": self.cfg.section(stage),
                "config_hash": config_hash(self.cfg, stage),
                "inputs": inputs,
                "outputs": outputs,
            }
            (tmp / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
            (tmp / "config.json").write_text(json.dumps(self.cfg.to_dict(), indent=1, sort_keys=True) + "\n")
            if dest.exists():
                old = dest.with_name(f".{dest.name}.old")
                if old.exists():
                    shutil.rmtree(old)
                dest.rename(old)
                tmp.rename(dest)
                shutil.rmtree(old)
            else:
                tmp.rename(dest)
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise
        return dest


# ---------------------------------------------------------------------------
# artifact io

def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path: Path) -> list[dict]:
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def read_transactions(path: Path) -> list[Transaction]:
    return [
        Transaction(r["sender"], r["receiver"], int(r["timestamp"]), int(r["source_row"]))
        for r in _read_csv(path)
    ]


def _window_file(index: int) -> str:
    return f"windows/w{index:05d}.csv"


def read_snapshots(ws: Workspace) -> list[TemporalSnapshot]:
    d = ws.path("dissect")
    meta = json.loads((d / "snapshots.json").read_text())
    out = []
    for s in meta["snapshots"]:
        txs = [
            Transaction(r["sender"], r["receiver"], int(r["timestamp"]))
            for r in _read_csv(d / s["file"])
        ]
        out.append(TemporalSnapshot(s["index"], s["start"], s["end"], build_graph(txs)))
    return out


def read_communities(ws: Workspace) -> dict[str, Community]:
    d = ws.path("communities")
    members: dict[str, list[str]] = {}
    for r in _read_csv(d / "members.csv"):
        members.setdefault(r["community"], []).append(r["account"])
    edges: dict[str, list[tuple[str, str, int]]] = {c: [] for c in members}
    for r in _read_csv(d / "edges.csv"):
        edges[r["community"]].append((r["sender"], r["receiver"], int(r["timestamp"])))
    out = {}
    for cid, nodes in members.items():
        snapshot, ordinal = int(cid[1:5]), int(cid[6:])
        g = TransactionalGraph(nodes, sorted(edges[cid]))
        out[cid] = Community(snapshot, ordinal, frozenset(nodes), g)
    return out


def load_inputs(ws: Workspace, ids) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    communities = read_communities(ws)
    store = FeatureStore.load(ws.path("features"))
    out = {}
    for cid in sorted(set(ids)):
        if cid not in store:
            raise DataError(f"no features for community {cid}")
        order = store.order(cid)
        out[cid] = (gae.symmetric_adjacency(communities[cid].subgraph, order), np.array(store.matrix(cid)))
    return out


def read_models(models_dir: Path, ws: Workspace | None) -> dict[str, dict[Pattern, gae.GaeModel]]:
    out: dict[str, dict[Pattern, gae.GaeModel]] = {}
    for variant in gae.VARIANTS:
        for p in PATTERNS:
            d = models_dir / variant / p.slug
            if not (d / "model.json").is_file():
                continue
            if ws is not None:
                _check_model(ws, d, variant, p)
            out.setdefault(variant, {})[p] = gae.GaeModel.load(d)
    if not out:
        raise DataError(f"no trained models under {models_dir}")
    return out


def _model_hash(cfg: PipelineConfig, variant: str, p: Pattern) -> str:
    return _digest({"train": config_hash(cfg, "train"), "variant": variant, "pattern": p.value})


def _check_model(ws: Workspace, d: Path, variant: str, p: Pattern) -> None:
    mpath = d / MANIFEST
    if not mpath.is_file():
        raise DataError(f"model directory {d} has no manifest")
    manifest = json.loads(mpath.read_text())
    if manifest.get("config_hash") != _model_hash(ws.cfg, variant, p):
        raise DataError(f"model {d} was trained with a different config; rerun 'train'")
    for rel, digest in manifest["outputs"].items():
        if not (d / rel).is_file() or ws.hash(d / rel) != digest:
            raise DataError(f"model file {d / rel} is missing or was modified")
    if manifest.get("inputs") != ws.prerequisites("train"):
        raise DataError(f"model {d} is stale: its training data was rebuilt; rerun 'train'")


# ---------------------------------------------------------------------------
# stages

def stage_synth(ws: Workspace, args) -> None:
    cfg = ws.cfg
    if not cfg.uses_synth():
        logger.info("synth: input_path is set, nothing to generate")
        return
    s = cfg.synth
    corpus = pipeline.synthetic_corpus(
        int(s.get("per_pattern", 600)), cfg.stage_seed("synth"), s.get("noise_edges"), int(s.get("n_windows", 4))
    )

    def write(d: Path) -> None:
        corpus.write(d / "transactions.csv", d / "oracle.json")

    ws.commit("synth", write)
    logger.info("synth: %d transactions, %d planted components", len(corpus.transactions), len(corpus.oracle))


def stage_ingest(ws: Workspace, args) -> None:
    cfg = ws.cfg
    if cfg.uses_synth():
        ws.check("synth")
        path, schema = ws.path("synth") / "transactions.csv", ColumnMapping()
    else:
        path, schema = Path(cfg.input_path), ColumnMapping.from_dict(cfg.columns)
    txs, report = load_transactions(path, schema)

    def write(d: Path) -> None:
        _write_csv(
            d / "transactions.csv",
            ["timestamp", "sender", "receiver", "source_row"],
            ((t.timestamp, t.sender, t.receiver, t.source_row) for t in txs),
        )
        _write_json(d / "load_report.json", report.to_dict())

    ws.commit("ingest", write)
    logger.info("ingest: %d of %d rows loaded", report.loaded, report.rows_read)


def stage_dissect(ws: Workspace, args) -> None:
    ws.check("ingest")
    txs = read_transactions(ws.path("ingest") / "transactions.csv")
    try:
        snaps = dissect(txs, ws.cfg.rho_seconds, ws.cfg.origin)
    except ValueError as exc:
        raise DataError(str(exc)) from None

    def write(d: Path) -> None:
        (d / "windows").mkdir()
        meta = {
            "rho": format_duration(ws.cfg.rho_seconds),
            "snapshots": [
                {"index": s.index, "start": s.start, "end": s.end, "file": _window_file(s.index),
                 "transactions": len(s.graph.multi_edges), "accounts": len(s.graph.nodes)}
                for s in snaps
            ],
        }
        _write_json(d / "snapshots.json", meta)
        for s in snaps:
            _write_csv(d / _window_file(s.index), ["sender", "receiver", "timestamp"], s.graph.multi_edges)

    ws.commit("dissect", write)
    logger.info("dissect: %d snapshots", len(snaps))


def stage_communities(ws: Workspace, args) -> None:
    ws.check("dissect")
    snaps = read_snapshots(ws)
    found, census = communities_from_snapshots(
        snaps, min_size=ws.cfg.min_community_size, seed=ws.cfg.stage_seed("communities")
    )

    def write(d: Path) -> None:
        _write_csv(d / "members.csv", ["community", "account"],
                   ((c.id, v) for c in found for v in sorted(c.nodes)))
        _write_csv(d / "edges.csv", ["community", "sender", "receiver", "timestamp"],
                   ((c.id, u, v, ts) for c in found for u, v, ts in c.subgraph.multi_edges))
        _write_json(d / "census.json", census)

    ws.commit("communities", write)
    logger.info("communities: %s", census)


def stage_label(ws: Workspace, args) -> None:
    ws.check("communities")
    communities = read_communities(ws)
    labels = {cid: label_community(c.subgraph) for cid, c in sorted(communities.items())}

    def write(d: Path) -> None:
        _write_csv(
            d / "labels.csv",
            ["community", "label", "score", "argmax_node", *[f"max_{p.slug}" for p in PATTERNS]],
            ((cid, lab.label.value, repr(lab.score), lab.argmax_node or "", *map(repr, lab.maxima))
             for cid, lab in labels.items()),
        )
        counts = {p.value: 0 for p in (*PATTERNS, Pattern.UNLABELED)}
        for lab in labels.values():
            counts[lab.label.value] += 1
        _write_json(d / "label_counts.json", counts)

    ws.commit("label", write)


def _features_of(item):
    cid, nodes, edges = item
    order, x = raw_features(TransactionalGraph(nodes, edges))
    return cid, order, x


def stage_features(ws: Workspace, args) -> None:
    ws.check("communities")
    communities = read_communities(ws)
    items = [(cid, sorted(c.nodes), c.subgraph.multi_edges) for cid, c in sorted(communities.items())]
    jobs = getattr(args, "jobs", 1) or 1
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_features_of, items, chunksize=64))
    else:
        rows = [_features_of(it) for it in items]
    store = FeatureStore.build(rows)
    ws.commit("features", store.save)
    logger.info("features: %d communities", len(rows))


def stage_datasets(ws: Workspace, args) -> None:
    ws.check("label")
    rows = _read_csv(ws.path("label") / "labels.csv")
    sets = dataset.build_pattern_sets((r["community"], Pattern(r["label"])) for r in rows)
    splits = dataset.make_splits(sets, ws.cfg.stage_seed("datasets"), target=ws.cfg.train_target)
    dataset.check_leakage(splits)

    def write(d: Path) -> None:
        dataset.save_splits(splits, d / "splits.json")
        table = {
            p.value: {"total": len(sets[p]), "train_distinct": len(sp.distinct_train),
                      "train": len(sp.train), "val": len(sp.val), "ros": sp.ros_applied}
            for p, sp in splits.items()
        }
        _write_json(d / "composition.json", table)

    ws.commit("datasets", write)


def _train_one(job):
    root, cfg_dict, variant, pattern_value = job
    ws = Workspace(root, PipelineConfig(**cfg_dict))
    p = Pattern(pattern_value)
    sp = dataset.load_splits(ws.path("datasets") / "splits.json")[p]
    inputs = load_inputs(ws, sp.train)
    model_cfg = ws.cfg.train_config(pipeline.model_seed(ws.cfg.stage_seed("train"), variant, p))
    model = gae.train(sp.train, inputs, variant, p, model_cfg)
    dest = ws.path("train") / variant / p.slug
    _commit_model(ws, model, dest)
    return variant, p.value, model.best_epoch


def _commit_model(ws: Workspace, model: gae.GaeModel, dest: Path) -> None:
    dest.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{dest.name}.", dir=dest.parent))
    try:
        model.save(tmp)
        manifest = {
            "stage": "train",
            "variant": model.variant,
            "pattern": model.pattern.value,
            "config_hash": _model_hash(ws.cfg, model.variant, model.pattern),
            "inputs": ws.prerequisites("train"),
            "outputs": {p.name: file_hash(p) for p in sorted(tmp.iterdir())},
        }
        _write_json(tmp / MANIFEST, manifest)
        if dest.exists():
            shutil.rmtree(dest)
        tmp.rename(dest)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def stage_train(ws: Workspace, args) -> None:
    ws.prerequisites("train")
    splits = dataset.load_splits(ws.path("datasets") / "splits.json")
    variants = [args.variant] if getattr(args, "variant", None) else ws.cfg.variants
    patterns = [Pattern.parse(args.pattern)] if getattr(args, "pattern", None) else list(PATTERNS)
    jobs_list = []
    for v in variants:
        for p in patterns:
            if p not in splits:
                if getattr(args, "pattern", None):
                    raise DataError(f"no training split for {p} (too few labelled communities)")
                logger.warning("train: no split for %s, skipping", p)
                continue
            jobs_list.append((str(ws.root), ws.cfg.to_dict(), v, p.value))
    n_jobs = getattr(args, "jobs", 1) or 1
    if n_jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            done = list(pool.map(_train_one, jobs_list))
    else:
        done = [_train_one(j) for j in jobs_list]
    for v, p, best in done:
        logger.info("train: %s/%s best epoch %d", v, p, best)
    if not getattr(args, "variant", None) and not getattr(args, "pattern", None):
        # stage-level manifest over every model written above
        def write(d: Path) -> None:
            src = ws.path("train")
            for v in gae.VARIANTS:
                if (src / v).is_dir():
                    shutil.copytree(src / v, d / v, ignore=shutil.ignore_patterns(".*"))

        ws.commit("train", write)


def stage_evaluate(ws: Workspace, args) -> None:
    models_dir = Path(args.models) if getattr(args, "models", None) else ws.path("train")
    if not getattr(args, "models", None):
        ws.check("train")
    for p in ("communities", "features", "datasets"):
        ws.check(p)
    models = read_models(models_dir, ws)
    splits = dataset.load_splits(ws.path("datasets") / "splits.json")
    val_sets = {p: sp.val for p, sp in splits.items()}
    inputs = load_inputs(ws, [c for ids in val_sets.values() for c in ids])
    errors = {v: evalreport.community_errors(v, ms, val_sets, inputs) for v, ms in models.items()}
    reports = [evalreport.report_from_errors(v, e) for v, e in errors.items()]

    def write(d: Path) -> None:
        _write_csv(
            d / "errors.csv",
            ["variant", "train_pattern", "eval_pattern", "community", "error"],
            ((v, p.value, q.value, cid, repr(err))
             for v in errors for (p, q), rows in errors[v].items() for cid, err in rows),
        )
        evalreport.emit_report(reports, d / "bundle")

    if getattr(args, "out", None):
        out = Path(args.out)
        write_dir = out
        write_dir.mkdir(parents=True, exist_ok=True)
        write(write_dir)
        logger.info("evaluate: wrote %s", out)
    else:
        ws.commit("evaluate", write)
    for r in reports:
        logger.info("evaluate: %s diagonal minimum on %d/6 rows", r.variant, r.n_detected)


def read_errors(path: Path) -> dict[str, evalreport.Errors]:
    out: dict[str, evalreport.Errors] = {}
    for r in _read_csv(path):
        key = (Pattern(r["train_pattern"]), Pattern(r["eval_pattern"]))
        out.setdefault(r["variant"], {}).setdefault(key, []).append((r["community"], float(r["error"])))
    return out


def stage_report(ws: Workspace, args) -> None:
    ws.check("evaluate")
    errors = read_errors(ws.path("evaluate") / "errors.csv")
    reports = [evalreport.report_from_errors(v, e) for v, e in errors.items()]
    ws.commit("report", lambda d: evalreport.emit_report(reports, d))
    sys.stdout.write(evalreport.text_report(sorted(reports, key=lambda r: gae.VARIANTS.index(r.variant))))


STAGE_FUNCS = {
    "synth": stage_synth,
    "ingest": stage_ingest,
    "dissect": stage_dissect,
    "communities": stage_communities,
    "label": stage_label,
    "features": stage_features,
    "datasets": stage_datasets,
    "train": stage_train,
    "evaluate": stage_evaluate,
    "report": stage_report,
}


def planned_stages(cfg: PipelineConfig, start: str | None) -> list[str]:
    stages = list(STAGES[STAGES.index(start):] if start else STAGES)
    if not cfg.uses_synth() and "synth" in stages:
        stages.remove("synth")
    return stages


def run_all(ws: Workspace, args) -> int:
    stages = planned_stages(ws.cfg, args.from_stage)
    if args.dry_run:
        for s in stages:
            print(f"{s}: would write {ws.path(s)}")
        return 0
    for s in stages:
        logger.info("== %s", s)
        try:
            STAGE_FUNCS[s](ws, args)
        except TxPatternError as exc:
            logger.error("stage '%s' failed: %s", s, exc)
            return exc.exit_code
    return 0


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit with 1
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="pipeline config (JSON)")
    common.add_argument("--workdir", help="artifact directory (default: config 'output')")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="txpattern", description="Suspicious-pattern detection pipeline on transaction graphs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in STAGES:
        sp = sub.add_parser(name, parents=[common], help=f"run the {name} stage")
        if name == "dissect":
            sp.add_argument("--rho", help="window length, e.g. 7d, 12h, 3600")
        if name == "train":
            sp.add_argument("--variant", choices=gae.VARIANTS)
            sp.add_argument("--pattern", help="pattern name (e.g. Sink, ScatterGather, sg)")
        if name == "evaluate":
            sp.add_argument("--models", help="models directory (default: <workdir>/train)")
            sp.add_argument("--out", help="write the evaluation here instead of <workdir>/evaluate")
    run = sub.add_parser("run", parents=[common], help="run the whole pipeline")
    run.add_argument("--from", dest="from_stage", choices=STAGES, help="resume from this stage")
    run.add_argument("--dry-run", action="store_true", help="list planned stages and exit")
    run.add_argument("--rho", help="window length, e.g. 7d")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = PipelineConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if getattr(args, "rho", None):
            cfg.rho = args.rho
        cfg.validate()
        if getattr(args, "pattern", None):
            Pattern.parse(args.pattern)
        if args.jobs < 1:
            parser.error("--jobs must be at least 1")
    except (ValueError, KeyError) as exc:
        parser.error(str(exc))
    except TxPatternError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    ws = Workspace(args.workdir or cfg.output, cfg)
    if args.command == "run":
        return run_all(ws, args)
    try:
        STAGE_FUNCS[args.command](ws, args)
    except TxPatternError as exc:
        logger.error("stage '%s' failed: %s", args.command, exc)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
