"""Small reverse-mode autodiff over dense float64 arrays, plus the graph layers
(GCN, GraphSAGE, GAT), batch norm, dropout, inner-product decoding, BCE loss,
Adam and a finite-difference gradient checker.

Only what the graph autoencoders need is here. Every op records a closure
that maps the output gradient to parent gradients; :func:`backward` replays
them in reverse topological order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericalError

CLAMP = 1e-12


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents: tuple = (), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def param(x) -> Tensor:
    return Tensor(np.array(x, dtype=np.float64), requires_grad=True)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _node(data, parents, backward) -> Tensor:
    return Tensor(data, parents=parents, backward=backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[0]:
        raise ValueError(f"shape mismatch: {a.shape} @ {b.shape}")
    return _node(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _node(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _node(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _node(a.data.T, (a,), lambda g: (g.T,))


def leaky_relu(a, slope: float = 0.01) -> Tensor:
    a = as_tensor(a)
    pos = a.data >= 0
    return _node(np.where(pos, a.data, slope * a.data), (a,), lambda g: (np.where(pos, g, slope * g),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = _sigmoid(a.data)
    return _node(s, (a,), lambda g: (g * s * (1.0 - s),))


def dropout(a, p: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout: zero with probability ``p``, scale survivors by ``1/(1-p)``."""
    a = as_tensor(a)
    if not training or p <= 0.0:
        return a
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    keep = (rng.random(a.shape) >= p) / (1.0 - p)
    return mul(a, keep)


@dataclass
class BatchNormState:
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    @classmethod
    def fresh(cls, width: int, momentum: float = 0.1, eps: float = 1e-5) -> "BatchNormState":
        return cls(np.zeros(width), np.ones(width), momentum, eps)


def batch_norm(x, gamma, beta, state: BatchNormState, training: bool) -> Tensor:
    """Per-column normalisation over all rows.

    Training mode uses batch statistics and updates the running estimates
    (unbiased variance, like the usual framework convention); eval mode is the
    affine map given by the running estimates.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if not training:
        inv = 1.0 / np.sqrt(state.running_var + state.eps)
        xhat = mul(add(x, -state.running_mean), inv)
        return add(mul(xhat, gamma), beta)

    n = x.shape[0]
    mu = x.data.mean(axis=0)
    var = x.data.var(axis=0)
    inv = 1.0 / np.sqrt(var + state.eps)
    xhat = (x.data - mu) * inv
    out = xhat * gamma.data + beta.data

    m = state.momentum
    unbiased = var * n / (n - 1) if n > 1 else var
    state.running_mean = (1 - m) * state.running_mean + m * mu
    state.running_var = (1 - m) * state.running_var + m * unbiased

    def back(g):
        dxhat = g * gamma.data
        dx = inv / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        return dx, (g * xhat).sum(axis=0), g.sum(axis=0)

    return _node(out, (x, gamma, beta), back)


def bce_with_logits(logits, target: np.ndarray, weight: np.ndarray) -> Tensor:
    """Weighted binary cross-entropy of ``p = σ(logits)``: ``sum(w * -[a ln p + (1-a) ln(1-p)])``.

    Computed in logit space (``-ln σ(x) = softplus(-x)``) so saturated
    probabilities keep full precision. Each log term is capped at
    ``-ln CLAMP``, which is the same as clamping ``p`` and ``1-p`` at
    ``CLAMP``; capped terms get zero gradient.
    """
    x = as_tensor(logits)
    a = np.asarray(target, dtype=float)
    w = np.asarray(weight, dtype=float)
    cap = -np.log(CLAMP)
    nlp = np.logaddexp(0.0, -x.data)  # -ln p
    nlq = np.logaddexp(0.0, x.data)  # -ln(1-p)
    value = float(np.sum(w * (a * np.minimum(nlp, cap) + (1.0 - a) * np.minimum(nlq, cap))))

    def back(g):
        dp = np.where(nlp < cap, -_sigmoid(-x.data), 0.0)
        dq = np.where(nlq < cap, _sigmoid(x.data), 0.0)
        return (g * w * (a * dp + (1.0 - a) * dq),)

    return _node(np.array(value), (x,), back)


def bce_terms(logits: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Elementwise capped BCE terms, no graph (evaluation helper)."""
    cap = -np.log(CLAMP)
    nlp = np.minimum(np.logaddexp(0.0, -logits), cap)
    nlq = np.minimum(np.logaddexp(0.0, logits), cap)
    return target * nlp + (1.0 - target) * nlq


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into ``t.grad`` for every tensor that requires grad."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(loss, False)]
    while stack:
        t, done = stack.pop()
        if done:
            order.append(t)
            continue
        if id(t) in seen or not t.requires_grad:
            continue
        seen.add(id(t))
        stack.append((t, True))
        stack.extend((p, False) for p in t._parents)

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for t in reversed(order):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        if t._backward is None:
            t.grad = g if t.grad is None else t.grad + g
            continue
        for parent, pg in zip(t._parents, t._backward(g)):
            if parent.requires_grad:
                if not np.all(np.isfinite(pg)):
                    raise NumericalError(f"non-finite gradient flowing into tensor of shape {parent.shape}")
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg


# ---------------------------------------------------------------------------
# graph operators

def normalize_adjacency(a: np.ndarray) -> np.ndarray:
    """Symmetric normalisation with self-loops: D^-1/2 (A + I) D^-1/2."""
    a = np.asarray(a, dtype=float)
    a_tilde = a + np.eye(a.shape[0])
    d = a_tilde.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    return a_tilde * inv_sqrt[:, None] * inv_sqrt[None, :]


def mean_aggregator(a: np.ndarray) -> np.ndarray:
    """Row-normalised adjacency; rows of isolated nodes stay zero."""
    a = np.asarray(a, dtype=float)
    deg = a.sum(axis=1, keepdims=True)
    return np.divide(a, deg, out=np.zeros_like(a), where=deg > 0)


def gcn_layer(a_hat, h, w, b) -> Tensor:
    """H' = Â H W + b."""
    return add(matmul(a_hat, matmul(h, w)), b)


def sage_layer(a, h, w_self, w_neigh, b, *, aggregator: np.ndarray | None = None) -> Tensor:
    """H'_i = W_self h_i + W_neigh mean_{j in N(i)} h_j + b (row-vector form)."""
    m = mean_aggregator(a) if aggregator is None else aggregator
    return add(add(matmul(h, w_self), matmul(m, matmul(h, w_neigh))), b)


def gat_layer(
    a, h, w, att, *, slope: float = 0.2, mask: np.ndarray | None = None,
    edges: tuple[np.ndarray, np.ndarray] | None = None,
) -> Tensor:
    """Single-head graph attention over each node's neighbours and itself.

    ``e_ij = LeakyReLU(att_src · Wh_i + att_dst · Wh_j)`` for ``j`` in
    ``N(i) ∪ {i}``, ``α_i = softmax_j(e_ij)`` and ``H'_i = Σ_j α_ij Wh_j``.
    Attention is computed on the edge list only (``edges`` or the non-zeros
    of ``mask``), so block-diagonal batches cost no more than their edges.
    """
    if edges is None:
        if mask is None:
            mask = (np.asarray(a) + np.eye(np.asarray(a).shape[0])) > 0
        edges = np.nonzero(mask)
    wh = matmul(h, w)
    att = as_tensor(att)
    width = wh.shape[1]
    src = matmul(wh, _slice_rows(att, 0, width))  # n x 1
    dst = matmul(wh, _slice_rows(att, width, 2 * width))  # n x 1
    return edge_attention(src, dst, wh, edges[0], edges[1], slope)


def _segment_sum(values: np.ndarray, index: np.ndarray, n: int) -> np.ndarray:
    if values.ndim == 1:
        return np.bincount(index, weights=values, minlength=n)
    out = np.zeros((n,) + values.shape[1:])
    np.add.at(out, index, values)
    return out


def edge_attention(src, dst, wh, rows: np.ndarray, cols: np.ndarray, slope: float = 0.2) -> Tensor:
    """Fused attention: scores on edges ``(rows[k], cols[k])``, per-row softmax, weighted sum of ``wh[cols]``.

    Every row must have at least one edge (self-attention guarantees it).
    """
    src, dst, wh = as_tensor(src), as_tensor(dst), as_tensor(wh)
    n = wh.shape[0]
    e = src.data[rows, 0] + dst.data[cols, 0]
    pos = e >= 0
    score = np.where(pos, e, slope * e)
    row_max = np.full(n, -np.inf)
    np.maximum.at(row_max, rows, score)
    ex = np.exp(score - row_max[rows])
    alpha = ex / _segment_sum(ex, rows, n)[rows]
    out = _segment_sum(alpha[:, None] * wh.data[cols], rows, n)

    def back(g):
        g_rows = g[rows]
        d_wh = _segment_sum(alpha[:, None] * g_rows, cols, n)
        d_alpha = np.einsum("ij,ij->i", g_rows, wh.data[cols])
        d_score = alpha * (d_alpha - _segment_sum(alpha * d_alpha, rows, n)[rows])
        d_e = np.where(pos, d_score, slope * d_score)
        return (
            _segment_sum(d_e, rows, n)[:, None],
            _segment_sum(d_e, cols, n)[:, None],
            d_wh,
        )

    return _node(out, (src, dst, wh), back)


def _slice_rows(t: Tensor, lo: int, hi: int) -> Tensor:
    data = t.data.reshape(-1, 1)

    def back(g):
        full = np.zeros_like(data)
        full[lo:hi] = g
        return (full.reshape(t.shape),)

    return _node(data[lo:hi], (t,), back)


def inner_product_logits(z) -> Tensor:
    """Edge logits Z Zᵀ."""
    z = as_tensor(z)
    return matmul(z, transpose(z))


def pair_logits(z, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """Logits ``z_i · z_j`` for the listed pairs only (the sparse form of ``Z Zᵀ``)."""
    z = as_tensor(z)
    rows, cols = np.asarray(rows), np.asarray(cols)
    out = np.einsum("ij,ij->i", z.data[rows], z.data[cols])

    def back(g):
        n = z.shape[0]
        dense = np.zeros((n, n))
        np.add.at(dense, (rows, cols), g)
        return ((dense + dense.T) @ z.data,)

    return _node(out, (z,), back)


def inner_product_decode(z) -> Tensor:
    """Edge probabilities σ(Z Zᵀ)."""
    return sigmoid(inner_product_logits(z))


def offdiag_mask(n: int) -> np.ndarray:
    return ~np.eye(n, dtype=bool)


def bce_loss(logits, a_target: np.ndarray, mask: np.ndarray | None = None) -> Tensor:
    """Mean BCE of ``σ(logits)`` over masked pairs (default: all off-diagonal pairs)."""
    logits = as_tensor(logits)
    n = logits.shape[0]
    mask = offdiag_mask(n) if mask is None else np.asarray(mask, dtype=bool)
    count = mask.sum()
    if count == 0:
        raise ValueError("no pairs to score")
    return bce_with_logits(logits, a_target, mask / count)


# ---------------------------------------------------------------------------
# optimisation

class Adam:
    def __init__(self, lr: float = 1e-3, betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Update ``params`` in place."""
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for name, g in grads.items():
            m = self.m.get(name, 0.0) * self.b1 + (1.0 - self.b1) * g
            v = self.v.get(name, 0.0) * self.b2 + (1.0 - self.b2) * g * g
            self.m[name], self.v[name] = m, v
            params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_dict(self) -> dict:
        return {"t": self.t, "m": self.m, "v": self.v}


def value_and_grad(
    loss_fn: Callable[[dict[str, Tensor]], Tensor], params: dict[str, np.ndarray]
) -> tuple[float, dict[str, np.ndarray]]:
    """Evaluate ``loss_fn`` on leaf tensors wrapping ``params`` and return gradients by name."""
    leaves = {k: param(v) for k, v in params.items()}
    loss = loss_fn(leaves)
    value = float(loss.data.item())
    if not np.isfinite(value):
        raise NumericalError(f"non-finite loss {value}")
    backward(loss)
    grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in leaves.items()}
    return value, grads


def check_gradients(
    loss_fn: Callable[[dict[str, Tensor]], Tensor],
    params: dict[str, np.ndarray],
    h: float = 1e-5,
    floor: float = 1e-6,
) -> tuple[float, dict[str, float]]:
    """Compare reverse-mode gradients with central finite differences.

    ``loss_fn`` must be deterministic (dropout off, batch norm in eval mode).
    The relative error of an entry is ``|a - n| / max(|a|, |n|, floor)``;
    returns the overall maximum and the maximum per parameter.
    """
    _, analytic = value_and_grad(loss_fn, params)
    per_param: dict[str, float] = {}
    for name, value in params.items():
        numeric = np.zeros_like(value)
        flat = value.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(loss_fn({k: Tensor(v) for k, v in params.items()}).data.item())
            flat[i] = orig - h
            down = float(loss_fn({k: Tensor(v) for k, v in params.items()}).data.item())
            flat[i] = orig
            numeric.reshape(-1)[i] = (up - down) / (2 * h)
        a = analytic[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), floor)
        per_param[name] = float(np.max(np.abs(a - numeric) / denom)) if a.size else 0.0
    return max(per_param.values(), default=0.0), per_param
