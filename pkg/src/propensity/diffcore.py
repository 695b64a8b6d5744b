"""Minimal reverse-mode differentiation over numpy arrays.

A :class:`Node` wraps a value and, once :func:`backward` has run, the
gradient of a scalar loss with respect to that value. Each operation below
builds a new node and records a closure mapping the upstream gradient to
one gradient per parent.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import expit

LOG_CLAMP = 1e-12


class Node:
    """A value in the computation graph.

    Parameters
    ----------
    value : array_like
        Stored as a float64 array.
    requires_grad : bool, default=False
        Leaves with ``requires_grad`` receive gradients from :func:`backward`.
    """

    __slots__ = ("value", "_grad", "requires_grad", "_parents", "_backward")

    def __init__(self, value, requires_grad: bool = False):
        self.value = np.asarray(value, dtype=np.float64)
        self._grad = None  # allocated on first access
        self.requires_grad = requires_grad
        self._parents: tuple[Node, ...] = ()
        self._backward: Callable[[np.ndarray], tuple] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            self._grad = np.zeros_like(self.value)
        return self._grad

    @grad.setter
    def grad(self, value) -> None:
        self._grad = value

    def zero_grad(self) -> None:
        self._grad = None

    def __repr__(self) -> str:
        return f"Node(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, _as_node(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(_as_node(other), -1.0))

    def __mul__(self, other):
        if isinstance(other, Node):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


def _as_node(x) -> Node:
    return x if isinstance(x, Node) else Node(x)


def _make(value, parents: Sequence[Node], backward_fn) -> Node:
    out = Node(value)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementwise and linear-algebra primitives
# ---------------------------------------------------------------------------

def add(a: Node, b: Node) -> Node:
    out_value = a.value + b.value

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(out_value, (a, b), backward)


def mul(a: Node, b: Node) -> Node:
    out_value = a.value * b.value

    def backward(g):
        return _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)

    return _make(out_value, (a, b), backward)


def scale(a: Node, c: float) -> Node:
    return _make(a.value * c, (a,), lambda g: (g * c,))


def matmul(a: Node, b: Node) -> Node:
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def backward(g):
        return g @ b.value.T, a.value.T @ g

    return _make(a.value @ b.value, (a, b), backward)


def affine(X: Node, W: Node, b: Node) -> Node:
    """``X @ W + b`` for ``X`` of shape (batch, in), ``W`` (in, out), ``b`` (out,)."""
    if X.value.ndim != 2 or W.value.ndim != 2 or b.value.ndim != 1:
        raise ValueError("affine expects X 2-D, W 2-D, b 1-D")
    if X.shape[1] != W.shape[0] or W.shape[1] != b.shape[0]:
        raise ValueError(f"affine shape mismatch: X{X.shape} W{W.shape} b{b.shape}")

    def backward(g):
        return g @ W.value.T, X.value.T @ g, g.sum(axis=0)

    return _make(X.value @ W.value + b.value, (X, W, b), backward)


def relu(Z: Node) -> Node:
    # subgradient at exactly zero is 0
    mask = Z.value > 0
    return _make(np.where(mask, Z.value, 0.0), (Z,), lambda g: (g * mask,))


def softplus(Z: Node) -> Node:
    """``ln(1 + e^z)``, evaluated without overflow."""
    z = Z.value
    return _make(np.logaddexp(0.0, z), (Z,), lambda g: (g * expit(z),))


def log(Z: Node) -> Node:
    return _make(np.log(Z.value), (Z,), lambda g: (g / Z.value,))


def square(Z: Node) -> Node:
    return _make(Z.value**2, (Z,), lambda g: (2.0 * g * Z.value,))


def total(Z: Node) -> Node:
    """Sum of all elements, as a 0-d node."""
    shape = Z.shape
    return _make(np.asarray(Z.value.sum()), (Z,),
                 lambda g: (np.broadcast_to(g, shape).copy(),))


def concat(nodes: Sequence[Node], axis: int = 1) -> Node:
    nodes = list(nodes)
    sizes = [n.shape[axis] for n in nodes]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(np.take(g, np.arange(lo, hi), axis=axis)
                     for lo, hi in zip(bounds[:-1], bounds[1:]))

    return _make(np.concatenate([n.value for n in nodes], axis=axis), nodes, backward)


def softmax(Z: Node) -> Node:
    """Row-wise softmax with max subtraction."""
    if Z.value.ndim != 2 or Z.shape[1] < 2:
        raise ValueError("softmax expects a (batch, K>=2) input")
    shifted = Z.value - Z.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    P = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        return (P * (g - (g * P).sum(axis=1, keepdims=True)),)

    return _make(P, (Z,), backward)


def cross_entropy(P: Node, y) -> Node:
    """Mean of ``-ln P[i, y_i]``; probabilities are clamped at 1e-12 first."""
    y = np.asarray(y, dtype=np.intp)
    n, k = P.shape
    if y.shape != (n,):
        raise ValueError("labels must be a vector matching the batch size")
    if np.any(y < 0) or np.any(y >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    rows = np.arange(n)
    picked = P.value[rows, y]
    clamped = np.maximum(picked, LOG_CLAMP)
    loss = -np.log(clamped).mean()

    def backward(g):
        grad = np.zeros_like(P.value)
        live = picked > LOG_CLAMP
        grad[rows[live], y[live]] = -g / (n * picked[live])
        return (grad,)

    return _make(np.asarray(loss), (P,), backward)


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------

def embedding_dim(cardinality: int) -> int:
    """Default embedding width for a column with ``cardinality`` slots."""
    return min(50, (cardinality + 1) // 2)


class EmbeddingTable:
    """Lookup table of ``cardinality`` rows; row 0 is the unknown slot."""

    def __init__(self, cardinality: int, dim: int | None = None, rng=None):
        if cardinality < 1:
            raise ValueError("cardinality must be >= 1")
        self.cardinality = int(cardinality)
        self.dim = int(dim) if dim is not None else max(1, embedding_dim(cardinality))
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        rng = np.random.default_rng(rng)
        self.weights = Node(glorot_uniform(rng, self.cardinality, self.dim), requires_grad=True)


def embed(table: EmbeddingTable, idx) -> Node:
    idx = np.asarray(idx, dtype=np.intp)
    if idx.ndim != 1:
        raise ValueError("embedding indices must be 1-D")
    if np.any(idx < 0) or np.any(idx >= table.cardinality):
        raise IndexError(f"embedding index out of range [0, {table.cardinality})")
    W = table.weights

    def backward(g):
        grad = np.zeros_like(W.value)
        np.add.at(grad, idx, g)
        return (grad,)

    return _make(W.value[idx], (W,), backward)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


# ---------------------------------------------------------------------------
# backward pass and gradient checking
# ---------------------------------------------------------------------------

def _topo_order(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Node) -> None:
    """Accumulate ``d loss / d leaf`` into every ``requires_grad`` leaf.

    Only leaves store gradients; they add up across calls until
    :meth:`Node.zero_grad`.
    """
    if loss.value.size != 1:
        raise ValueError("backward needs a scalar loss")
    order = _topo_order(loss)
    upstream = {id(loss): np.ones_like(loss.value)}
    for node in reversed(order):
        g = upstream.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node._grad is None else node._grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if parent.requires_grad:
                key = id(parent)
                upstream[key] = upstream[key] + pg if key in upstream else pg


def finite_diff_check(f: Callable[[], Node], params: Iterable[Node], h: float = 1e-5) -> float:
    """Max relative error between backward-pass and central-difference gradients.

    ``f`` rebuilds the graph from the current parameter values and returns a
    scalar node. The denominator of each relative error is
    ``max(|analytic|, |numeric|, 1e-8)``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    params = list(params)
    for p in params:
        p.zero_grad()
    backward(f())
    worst = 0.0
    for p in params:
        analytic = p.grad.copy()
        flat = p.value.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(f().value)
            flat[i] = orig - h
            down = float(f().value)
            flat[i] = orig
            numeric = (up - down) / (2 * h)
            a = analytic.reshape(-1)[i]
            denom = max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, abs(a - numeric) / denom)
    return worst
