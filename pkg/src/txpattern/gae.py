"""Graph autoencoders: encoder variants, batching, training and reconstruction error.

The encoder is CONV(32) -> BN -> LeakyReLU -> Dropout -> CONV(16) -> BN ->
LeakyReLU -> Dropout -> CONV(8), where CONV is a GCN, GraphSAGE or GAT layer.
The decoder is the inner product σ(Z Zᵀ). The reconstruction target is the
symmetrised binary adjacency of the community and the loss is the mean
binary cross-entropy over off-diagonal pairs.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import nn
from .errors import NumericalError
from .features import TrainingStats
from .indicators import Pattern
from .ingest import TransactionalGraph

logger = logging.getLogger(__name__)

VARIANTS = ("gcn", "sage", "gat")
MODEL_FORMAT = 1


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    early_stop_patience: int = 3
    batch_size: int = 25
    lr: float = 1e-3
    dropout: float = 0.2
    slope: float = 0.01
    attention_slope: float = 0.2
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5
    monitor_fraction: float = 0.1
    dims: tuple[int, ...] = (9, 32, 16, 8)
    seed: int = 0

    def __post_init__(self):
        if min(self.max_epochs, self.early_stop_patience, self.batch_size) <= 0:
            raise ValueError("epochs, patience and batch size must be positive")
        if self.lr <= 0 or not 0 <= self.dropout < 1 or not 0 < self.monitor_fraction < 1:
            raise ValueError("invalid learning rate, dropout or monitor fraction")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**{**d, "dims": tuple(d.get("dims", cls.dims))})


def symmetric_adjacency(g: TransactionalGraph, order: Sequence[str] | None = None) -> np.ndarray:
    """Binary undirected adjacency in ``order`` (default: sorted node ids), zero diagonal."""
    order = list(order) if order is not None else g.sorted_nodes()
    index = {v: i for i, v in enumerate(order)}
    a = np.zeros((len(order), len(order)))
    for u, v in g.simple_edges:
        a[index[u], index[v]] = a[index[v], index[u]] = 1.0
    return a


# ---------------------------------------------------------------------------
# parameters

def init_params(variant: str, dims: Sequence[int], seed: int) -> dict[str, np.ndarray]:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out, shape=None):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))

    params: dict[str, np.ndarray] = {}
    n_layers = len(dims) - 1
    for k in range(1, n_layers + 1):
        d_in, d_out = dims[k - 1], dims[k]
        if variant == "gcn":
            params[f"conv{k}.W"] = glorot(d_in, d_out)
            params[f"conv{k}.b"] = np.zeros(d_out)
        elif variant == "sage":
            params[f"conv{k}.W_self"] = glorot(d_in, d_out)
            params[f"conv{k}.W_neigh"] = glorot(d_in, d_out)
            params[f"conv{k}.b"] = np.zeros(d_out)
        else:
            params[f"conv{k}.W"] = glorot(d_in, d_out)
            params[f"conv{k}.att"] = glorot(d_out, 1, shape=(2 * d_out,))
        if k < n_layers:
            params[f"bn{k}.gamma"] = np.ones(d_out)
            params[f"bn{k}.beta"] = np.zeros(d_out)
    return params


def fresh_bn_states(dims: Sequence[int], momentum: float = 0.1, eps: float = 1e-5) -> dict[str, nn.BatchNormState]:
    return {f"bn{k}": nn.BatchNormState.fresh(dims[k], momentum, eps) for k in range(1, len(dims) - 1)}


# ---------------------------------------------------------------------------
# batching

@dataclass
class GraphBatch:
    """Block-diagonal union of community graphs."""

    a: np.ndarray
    x: np.ndarray
    membership: np.ndarray
    sizes: list[int]
    a_hat: np.ndarray = field(init=False)
    agg: np.ndarray = field(init=False)
    att_edges: tuple[np.ndarray, np.ndarray] = field(init=False)
    rows: np.ndarray = field(init=False)
    cols: np.ndarray = field(init=False)
    pair_graph: np.ndarray = field(init=False)
    target: np.ndarray = field(init=False)
    loss_weight: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.a.shape[0]
        self.a_hat = nn.normalize_adjacency(self.a)
        self.agg = nn.mean_aggregator(self.a)
        self.att_edges = np.nonzero((self.a + np.eye(n)) > 0)
        # intra-graph off-diagonal pairs; cross-graph pairs never enter the loss
        rows, cols = [], []
        offset = 0
        for k in self.sizes:
            r, c = np.nonzero(~np.eye(k, dtype=bool))
            rows.append(r + offset)
            cols.append(c + offset)
            offset += k
        self.rows, self.cols = np.concatenate(rows), np.concatenate(cols)
        self.pair_graph = self.membership[self.rows]
        self.target = self.a[self.rows, self.cols]
        sizes = np.asarray(self.sizes, dtype=float)
        self.loss_weight = (1.0 / (len(self.sizes) * sizes * (sizes - 1.0)))[self.pair_graph]

    @property
    def n_graphs(self) -> int:
        return len(self.sizes)


def batch_communities(items: Sequence[tuple[np.ndarray, np.ndarray]]) -> GraphBatch:
    """Merge ``(adjacency, features)`` pairs into one block-diagonal batch."""
    if not items:
        raise ValueError("empty batch")
    sizes = [a.shape[0] for a, _ in items]
    if min(sizes) < 2:
        raise ValueError("every graph needs at least two nodes")
    n = sum(sizes)
    a = np.zeros((n, n))
    offset = 0
    for adj, _ in items:
        k = adj.shape[0]
        a[offset : offset + k, offset : offset + k] = adj
        offset += k
    x = np.vstack([f for _, f in items])
    membership = np.repeat(np.arange(len(items)), sizes)
    return GraphBatch(a, x, membership, sizes)


# ---------------------------------------------------------------------------
# forward pass

def encode(
    variant: str,
    params: Mapping[str, nn.Tensor],
    bn: Mapping[str, nn.BatchNormState],
    batch: GraphBatch,
    cfg: TrainConfig,
    training: bool,
    rng: np.random.Generator | None = None,
) -> nn.Tensor:
    h: nn.Tensor = nn.Tensor(batch.x)
    n_layers = len(cfg.dims) - 1
    for k in range(1, n_layers + 1):
        if variant == "gcn":
            h = nn.gcn_layer(batch.a_hat, h, params[f"conv{k}.W"], params[f"conv{k}.b"])
        elif variant == "sage":
            h = nn.sage_layer(
                batch.a, h, params[f"conv{k}.W_self"], params[f"conv{k}.W_neigh"], params[f"conv{k}.b"],
                aggregator=batch.agg,
            )
        else:
            h = nn.gat_layer(
                batch.a, h, params[f"conv{k}.W"], params[f"conv{k}.att"],
                slope=cfg.attention_slope, edges=batch.att_edges,
            )
        if k < n_layers:
            h = nn.batch_norm(h, params[f"bn{k}.gamma"], params[f"bn{k}.beta"], bn[f"bn{k}"], training)
            h = nn.leaky_relu(h, cfg.slope)
            h = nn.dropout(h, cfg.dropout, rng, training)
    return h


def batch_loss(
    variant: str,
    params: Mapping[str, nn.Tensor],
    bn: Mapping[str, nn.BatchNormState],
    batch: GraphBatch,
    cfg: TrainConfig,
    training: bool,
    rng: np.random.Generator | None = None,
) -> nn.Tensor:
    """Mean over graphs of each graph's mean off-diagonal BCE."""
    z = encode(variant, params, bn, batch, cfg, training, rng)
    return nn.bce_with_logits(nn.pair_logits(z, batch.rows, batch.cols), batch.target, batch.loss_weight)


def per_graph_losses(
    variant: str,
    params: Mapping[str, np.ndarray],
    bn: Mapping[str, nn.BatchNormState],
    batch: GraphBatch,
    cfg: TrainConfig,
) -> np.ndarray:
    """Eval-mode reconstruction error of every graph in ``batch``."""
    z = encode(variant, {k: nn.Tensor(v) for k, v in params.items()}, bn, batch, cfg, training=False)
    terms = nn.bce_terms(nn.pair_logits(z, batch.rows, batch.cols).data, batch.target)
    sizes = np.asarray(batch.sizes, dtype=float)
    return np.bincount(batch.pair_graph, weights=terms, minlength=batch.n_graphs) / (sizes * (sizes - 1.0))


# ---------------------------------------------------------------------------
# model

@dataclass
class GaeModel:
    variant: str
    pattern: Pattern
    params: dict[str, np.ndarray]
    bn: dict[str, nn.BatchNormState]
    stats: TrainingStats
    config: TrainConfig
    history: dict = field(default_factory=lambda: {"train_loss": [], "monitor_loss": []})
    best_epoch: int = -1
    monitor_ids: list[str] = field(default_factory=list)

    @classmethod
    def untrained(
        cls, variant: str, pattern: Pattern, stats: TrainingStats, config: TrainConfig | None = None
    ) -> "GaeModel":
        config = config or TrainConfig()
        return cls(
            variant, pattern, init_params(variant, config.dims, config.seed),
            fresh_bn_states(config.dims, config.bn_momentum, config.bn_eps), stats, config,
        )

    def prepare(self, adjacency: np.ndarray, raw_features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return adjacency, self.stats.apply(raw_features)

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        arrays = dict(self.params)
        for name, state in self.bn.items():
            arrays[f"{name}.running_mean"] = state.running_mean
            arrays[f"{name}.running_var"] = state.running_var
        manifest, offset, chunks = [], 0, []
        for name in sorted(arrays):
            arr = np.ascontiguousarray(arrays[name], dtype="<f8")
            manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
            chunks.append(arr.tobytes())
            offset += arr.nbytes
        (directory / "params.bin").write_bytes(b"".join(chunks))
        meta = {
            "format": MODEL_FORMAT,
            "byteorder": "little",
            "dtype": "float64",
            "variant": self.variant,
            "pattern": self.pattern.value,
            "config": self.config.to_dict(),
            "feature_stats": self.stats.to_dict(),
            "history": self.history,
            "best_epoch": self.best_epoch,
            "monitor_ids": self.monitor_ids,
            "arrays": manifest,
        }
        (directory / "model.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory: str | Path) -> "GaeModel":
        directory = Path(directory)
        meta = json.loads((directory / "model.json").read_text())
        if meta.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported model format in {directory}")
        raw = (directory / "params.bin").read_bytes()
        arrays = {}
        for entry in meta["arrays"]:
            count = int(np.prod(entry["shape"])) if entry["shape"] else 1
            arr = np.frombuffer(raw, dtype="<f8", count=count, offset=entry["offset"])
            arrays[entry["name"]] = arr.reshape(entry["shape"]).astype(np.float64)
        config = TrainConfig.from_dict(meta["config"])
        bn = {}
        for name in list(arrays):
            if name.endswith(".running_mean"):
                key = name[: -len(".running_mean")]
                bn[key] = nn.BatchNormState(
                    arrays.pop(name), arrays.pop(f"{key}.running_var"), config.bn_momentum, config.bn_eps
                )
        return cls(
            meta["variant"], Pattern(meta["pattern"]), arrays, bn,
            TrainingStats.from_dict(meta["feature_stats"]), config,
            meta["history"], meta["best_epoch"], meta.get("monitor_ids", []),
        )


def reconstruction_error(model: GaeModel, adjacency: np.ndarray, raw_features: np.ndarray) -> float:
    """Eval-mode mean off-diagonal BCE of one community, features standardised with the model's stats."""
    if adjacency.shape[0] < 2:
        raise ValueError("reconstruction error needs at least two nodes")
    batch = batch_communities([model.prepare(adjacency, raw_features)])
    return float(per_graph_losses(model.variant, model.params, model.bn, batch, model.config)[0])


def reconstruction_errors(
    model: GaeModel, items: Sequence[tuple[np.ndarray, np.ndarray]], batch_size: int = 64
) -> np.ndarray:
    """Reconstruction errors of many communities, evaluated in blocks."""
    out = []
    for i in range(0, len(items), batch_size):
        chunk = [model.prepare(a, x) for a, x in items[i : i + batch_size]]
        out.append(per_graph_losses(model.variant, model.params, model.bn, batch_communities(chunk), model.config))
    return np.concatenate(out) if out else np.zeros(0)


# ---------------------------------------------------------------------------
# training

def _seeds(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def train(
    train_ids: Sequence[str],
    graphs: Mapping[str, tuple[np.ndarray, np.ndarray]],
    variant: str,
    pattern: Pattern,
    cfg: TrainConfig | None = None,
) -> GaeModel:
    """Train one autoencoder on the (possibly oversampled) training ids of one pattern.

    ``graphs`` maps community id to ``(adjacency, raw features)``. A monitor
    slice of ``cfg.monitor_fraction`` of the distinct training communities is
    held out; training stops once its mean reconstruction error has not
    improved for ``early_stop_patience`` epochs, and the parameters of the
    best monitor epoch are returned.
    """
    cfg = cfg or TrainConfig()
    r_init, r_monitor, r_shuffle, r_drop = _seeds(cfg.seed, 4)
    distinct = sorted(set(train_ids))
    if len(distinct) < 2:
        raise ValueError("need at least two distinct training communities")
    n_monitor = min(max(1, int(round(cfg.monitor_fraction * len(distinct)))), len(distinct) - 1)
    monitor = sorted(distinct[i] for i in r_monitor.choice(len(distinct), n_monitor, replace=False))
    held = set(monitor)
    fit_ids = [c for c in train_ids if c not in held]
    stats = TrainingStats.fit([graphs[c][1] for c in sorted(set(fit_ids))])

    prepared = {c: (graphs[c][0], stats.apply(graphs[c][1])) for c in set(train_ids)}
    monitor_batches = [
        batch_communities([prepared[c] for c in monitor[i : i + cfg.batch_size]])
        for i in range(0, len(monitor), cfg.batch_size)
    ]

    params = init_params(variant, cfg.dims, int(r_init.integers(2**63)))
    bn = fresh_bn_states(cfg.dims, cfg.bn_momentum, cfg.bn_eps)
    opt = nn.Adam(lr=cfg.lr)
    history: dict[str, list[float]] = {"train_loss": [], "monitor_loss": []}
    best = (np.inf, -1, None, None)
    stale = 0

    for epoch in range(cfg.max_epochs):
        order = r_shuffle.permutation(len(fit_ids))
        losses = []
        for i in range(0, len(order), cfg.batch_size):
            batch = batch_communities([prepared[fit_ids[j]] for j in order[i : i + cfg.batch_size]])

            def loss_fn(leaves, batch=batch):
                return batch_loss(variant, leaves, bn, batch, cfg, True, r_drop)

            value, grads = nn.value_and_grad(loss_fn, params)
            opt.step(params, grads)
            losses.append(value)
        monitor_losses = np.concatenate([per_graph_losses(variant, params, bn, b, cfg) for b in monitor_batches])
        m_loss = float(monitor_losses.mean())
        if not np.isfinite(m_loss):
            raise NumericalError(f"{variant}/{pattern}: non-finite monitor loss at epoch {epoch}")
        history["train_loss"].append(float(np.mean(losses)))
        history["monitor_loss"].append(m_loss)
        logger.debug("%s/%s epoch %d train %.5f monitor %.5f", variant, pattern, epoch, losses[-1], m_loss)
        if m_loss < best[0]:
            snapshot = {k: v.copy() for k, v in params.items()}
            bn_snapshot = {k: nn.BatchNormState(s.running_mean.copy(), s.running_var.copy(), s.momentum, s.eps)
                           for k, s in bn.items()}
            best = (m_loss, epoch, snapshot, bn_snapshot)
            stale = 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                break

    _, best_epoch, best_params, best_bn = best
    return GaeModel(variant, pattern, best_params, best_bn, stats, cfg, history, best_epoch, monitor)
