"""Reverse-mode automatic differentiation over dense numpy arrays.

Forward ops build a graph of ``Tensor`` nodes; ``backward`` walks the graph
in reverse topological order and accumulates gradients into ``.grad`` slots.
Training runs in float32; gradient checking builds float64 graphs.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

# Additive pre-softmax penalty for blocked attention slots.  Large enough
# that the post-softmax weight underflows to ~0 in float32.
MASK_OFFSET = -1e9

GELU_C = float(np.sqrt(2.0 / np.pi))


class Tensor:
    """Dense array node with an optional same-shape gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.grad is not None})"


class ParamStore:
    """Named map of learnable tensors sharing one precision."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self._tensors: dict[str, Tensor] = {}

    def add(self, name: str, array: np.ndarray) -> Tensor:
        if name in self._tensors:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(np.asarray(array), requires_grad=True, dtype=self.dtype)
        self._tensors[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.grad = None

    def num_values(self) -> int:
        return sum(t.data.size for t in self._tensors.values())


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _node(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._backward = backward_fn
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(ancestor) into every reachable grad slot."""
    if root.data.size != 1:
        raise ValueError(f"backward root must be scalar, got shape {root.data.shape}")
    if not root.requires_grad:
        return

    # Iterative post-order topological sort over requires_grad ancestors.
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------


def _check_matmul(a: Tensor, b: Tensor) -> None:
    if a.data.ndim < 2 or b.data.ndim < 2 or a.data.shape[-1] != b.data.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    if a.data.ndim != b.data.ndim or a.data.shape[:-2] != b.data.shape[:-2]:
        raise ValueError(f"matmul batch mismatch: {a.data.shape} @ {b.data.shape}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _check_matmul(a, b)
    out_data = a.data @ b.data

    def bw(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, g @ np.swapaxes(b.data, -1, -2))
        if b.requires_grad:
            _accumulate(b, np.swapaxes(a.data, -1, -2) @ g)

    return _node(out_data, (a, b), bw)


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out_data = a.data + b.data
    except ValueError:
        raise ValueError(f"add shape mismatch: {a.data.shape} + {b.data.shape}") from None

    def bw(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g, b.data.shape))

    return _node(out_data, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        out_data = a.data * b.data
    except ValueError:
        raise ValueError(f"mul shape mismatch: {a.data.shape} * {b.data.shape}") from None

    def bw(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(out_data, (a, b), bw)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    out_data = a.data * s

    def bw(g: np.ndarray) -> None:
        _accumulate(a, g * s)

    return _node(out_data, (a,), bw)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out_data = a.data.reshape(shape)

    def bw(g: np.ndarray) -> None:
        _accumulate(a, g.reshape(a.data.shape))

    return _node(out_data, (a,), bw)


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    out_data = np.transpose(a.data, axes)
    inverse = tuple(np.argsort(axes))

    def bw(g: np.ndarray) -> None:
        _accumulate(a, np.transpose(g, inverse))

    return _node(out_data, (a,), bw)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g: np.ndarray) -> None:
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                _accumulate(p, g[tuple(idx)])

    return _node(out_data, tuple(parts), bw)


def gather_rows(a: Tensor, indices) -> Tensor:
    """Select rows (axis 0) of ``a``; backward routes gradient only to them."""
    idx = np.asarray(indices, dtype=np.int64)
    out_data = a.data[idx]

    def bw(g: np.ndarray) -> None:
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        np.add.at(a.grad, idx, g)

    return _node(out_data, (a,), bw)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Row lookup into an embedding table; duplicate ids accumulate gradient."""
    return gather_rows(table, ids)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def bw(g: np.ndarray) -> None:
        gy = g * out_data
        _accumulate(a, gy - out_data * gy.sum(axis=axis, keepdims=True))

    return _node(out_data, (a,), bw)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply elementwise gamma/beta."""
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out_data = gamma.data * xhat + beta.data

    def bw(g: np.ndarray) -> None:
        if gamma.requires_grad:
            _accumulate(gamma, _unbroadcast(g * xhat, gamma.data.shape))
        if beta.requires_grad:
            _accumulate(beta, _unbroadcast(g, beta.data.shape))
        if x.requires_grad:
            gxhat = g * gamma.data
            m1 = gxhat.mean(axis=-1, keepdims=True)
            m2 = (gxhat * xhat).mean(axis=-1, keepdims=True)
            _accumulate(x, inv * (gxhat - m1 - xhat * m2))

    return _node(out_data, (x, gamma, beta), bw)


def gelu(x: Tensor) -> Tensor:
    """Gaussian error linear unit, tanh approximation."""
    u = GELU_C * (x.data + 0.044715 * x.data**3)
    t = np.tanh(u)
    out_data = 0.5 * x.data * (1.0 + t)

    def bw(g: np.ndarray) -> None:
        du = GELU_C * (1.0 + 3 * 0.044715 * x.data**2)
        _accumulate(x, g * (0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t**2) * du))

    return _node(out_data, (x,), bw)


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity when not training or p == 0."""
    if not training or p <= 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode requires an rng")
    keep = (rng.random(x.data.shape) >= p).astype(x.data.dtype) / (1.0 - p)
    out_data = x.data * keep

    def bw(g: np.ndarray) -> None:
        _accumulate(x, g * keep)

    return _node(out_data, (x,), bw)


def sum_all(a: Tensor) -> Tensor:
    out_data = np.asarray(a.data.sum(), dtype=a.data.dtype)

    def bw(g: np.ndarray) -> None:
        _accumulate(a, np.broadcast_to(g, a.data.shape).astype(a.data.dtype))

    return _node(out_data, (a,), bw)


def cross_entropy(logits: Tensor, target_ids, ignore_id: int | None = None) -> tuple[Tensor, int]:
    """Summed token-level cross entropy with a count of scored positions.

    Returns (loss_sum, count); positions whose target equals ``ignore_id``
    contribute nothing to either.  Log-sum-exp is computed stably.
    """
    targets = np.asarray(target_ids, dtype=np.int64)
    if logits.data.ndim != 2 or targets.ndim != 1 or logits.data.shape[0] != targets.shape[0]:
        raise ValueError(
            f"cross_entropy shape mismatch: logits {logits.data.shape} vs targets {targets.shape}"
        )
    keep = np.ones(targets.shape[0], dtype=bool)
    if ignore_id is not None:
        keep = targets != ignore_id
    count = int(keep.sum())
    if targets.min(initial=0) < 0 or targets.max(initial=0) >= logits.data.shape[1]:
        raise ValueError(
            f"cross_entropy target ids out of range [0, {logits.data.shape[1]})"
        )

    m = logits.data.max(axis=-1, keepdims=True)
    z = logits.data - m
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    logp = z - lse
    rows = np.arange(targets.shape[0])
    picked = np.where(keep, logp[rows, targets], 0.0)
    out_data = np.asarray(-picked.sum(), dtype=logits.data.dtype)

    def bw(g: np.ndarray) -> None:
        grad = np.exp(logp)
        grad[rows, targets] -= 1.0
        grad[~keep] = 0.0
        _accumulate(logits, float(g) * grad)

    return _node(out_data, (logits,), bw), count


def constant(array, dtype=None) -> Tensor:
    return Tensor(np.asarray(array), requires_grad=False, dtype=dtype)


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------


def grad_check(
    build: Callable[[], Tensor],
    params: ParamStore,
    samples: int,
    h: float = 1e-5,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``build`` must construct a fresh scalar graph from the current parameter
    values and be deterministic (dropout off).  ``samples`` coordinates are
    drawn uniformly across all parameters.
    """
    if rng is None:
        rng = np.random.default_rng(0)

    params.zero_grad()
    out = build()
    backward(out)
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in params.items()
    }

    coords: list[tuple[str, int]] = []
    for name, t in params.items():
        coords.extend((name, i) for i in range(t.data.size))
    picks = rng.choice(len(coords), size=min(samples, len(coords)), replace=False)

    worst = 0.0
    for ci in picks:
        name, flat = coords[int(ci)]
        t = params[name]
        orig = t.data.flat[flat]
        t.data.flat[flat] = orig + h
        fp = build().item()
        t.data.flat[flat] = orig - h
        fm = build().item()
        t.data.flat[flat] = orig
        numeric = (fp - fm) / (2.0 * h)
        ana = float(analytic[name].flat[flat])
        denom = max(abs(ana), abs(numeric), 1e-8)
        worst = max(worst, abs(ana - numeric) / denom)
    return worst
