"""Minimal reverse-mode gradient tape over dense float64 arrays.

Only the operations the model needs exist here: matmul, elementwise
sigmoid/tanh/multiply/add, softmax, concatenation, slicing and the reductions
used by the loss. Values are plain numpy arrays; a fresh graph is built per
forward pass and freed with it.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """A value in the computation graph. ``backward()`` on a scalar output
    accumulates gradients into every reachable node's ``grad``."""

    __slots__ = ("value", "grad", "parents", "_vjp", "name")

    def __init__(self, value, parents=(), vjp=None, name=""):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self._vjp = vjp  # callable(grad_out) -> tuple of parent gradients
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)

    def backward(self):
        if self.value.ndim != 0:
            raise ValueError("backward() expects a scalar output")
        order = _topo_order(self)
        for node in order:
            if node.grad is None:
                node.grad = np.zeros_like(node.value)
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._vjp is None:
                continue
            for parent, contribution in zip(node.parents, node._vjp(node.grad)):
                if contribution is not None:
                    parent.grad += contribution


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def constant(value, name="") -> Tensor:
    return Tensor(value, name=name)


def add(a: Tensor, b: Tensor) -> Tensor:
    return Tensor(
        a.value + b.value,
        parents=(a, b),
        vjp=lambda g: (_unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    return Tensor(
        a.value * b.value,
        parents=(a, b),
        vjp=lambda g: (
            _unbroadcast(g * b.value, a.value.shape),
            _unbroadcast(g * a.value, b.value.shape),
        ),
    )


def scale(a: Tensor, c: float) -> Tensor:
    return Tensor(a.value * c, parents=(a,), vjp=lambda g: (g * c,))


def add_const(a: Tensor, c: float) -> Tensor:
    return Tensor(a.value + c, parents=(a,), vjp=lambda g: (g,))


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, scale(b, -1.0))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.value, b.value

    def vjp(g):
        if av.ndim == 2 and bv.ndim == 2:
            return g @ bv.T, av.T @ g
        if av.ndim == 1 and bv.ndim == 2:
            return bv @ g, np.outer(av, g)
        if av.ndim == 2 and bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        return g * bv, g * av  # 1-D dot

    return Tensor(av @ bv, parents=(a, b), vjp=vjp)


def sigmoid(a: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-a.value))
    return Tensor(out, parents=(a,), vjp=lambda g: (g * out * (1.0 - out),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.value)
    return Tensor(out, parents=(a,), vjp=lambda g: (g * (1.0 - out * out),))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=axis, keepdims=True)

    def vjp(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return ((g - inner) * out,)

    return Tensor(out, parents=(a,), vjp=vjp)


def masked_fill(a: Tensor, keep: np.ndarray, fill: float) -> Tensor:
    """Entries where ``keep`` is False are replaced by ``fill``; the graph
    sees no dependence on the replaced entries."""
    keep = np.asarray(keep, dtype=bool)
    return Tensor(
        np.where(keep, a.value, fill),
        parents=(a,),
        vjp=lambda g: (np.where(keep, g, 0.0),),
    )


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    sizes = [t.value.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    return Tensor(
        np.concatenate([t.value for t in tensors], axis=axis),
        parents=tuple(tensors),
        vjp=lambda g: tuple(np.split(g, splits, axis=axis)),
    )


def stack_cols(tensors: list[Tensor]) -> Tensor:
    """Stack equal-length 1-D tensors as columns of a 2-D result."""
    return Tensor(
        np.stack([t.value for t in tensors], axis=1),
        parents=tuple(tensors),
        vjp=lambda g: tuple(g[:, i] for i in range(len(tensors))),
    )


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    def vjp(g):
        full = np.zeros_like(a.value)
        full[..., start:stop] = g
        return (full,)

    return Tensor(a.value[..., start:stop], parents=(a,), vjp=vjp)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    def vjp(g):
        full = np.zeros_like(a.value)
        full[start:stop] = g
        return (full,)

    return Tensor(a.value[start:stop], parents=(a,), vjp=vjp)


def gather_time(steps: list[Tensor], indices: np.ndarray) -> Tensor:
    """Per-row time selection: result[b] = steps[indices[b]].value[b].

    ``steps`` is a length-n list of (B, k) tensors; ``indices`` has one time
    index per batch row.
    """
    indices = np.asarray(indices, dtype=np.int64)
    value = np.stack([steps[int(t)].value[b] for b, t in enumerate(indices)])

    def vjp(g):
        grads = [np.zeros_like(s.value) for s in steps]
        for b, t in enumerate(indices):
            grads[int(t)][b] = g[b]
        return tuple(grads)

    return Tensor(value, parents=tuple(steps), vjp=vjp)


def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def vjp(g):
        if axis is None:
            return (np.full_like(a.value, float(g)),)
        expanded = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(expanded, a.value.shape).copy(),)

    return Tensor(a.value.sum(axis=axis, keepdims=keepdims), parents=(a,), vjp=vjp)


def reduce_mean(a: Tensor) -> Tensor:
    size = a.value.size
    return Tensor(
        a.value.mean(), parents=(a,), vjp=lambda g: (np.full_like(a.value, float(g) / size),)
    )


def sigmoid_values(z: np.ndarray) -> np.ndarray:
    """Plain-array sigmoid that never overflows."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    positive = z >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-z[positive]))
    exp_z = np.exp(z[~positive])
    out[~positive] = exp_z / (1.0 + exp_z)
    return out


def bce_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Elementwise binary cross-entropy on logits, numerically stable."""
    z, y = logits.value, np.asarray(targets, dtype=np.float64)
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    sig = sigmoid_values(z)
    return Tensor(loss, parents=(logits,), vjp=lambda g: (g * (sig - y),))
