"""Small reverse-mode differentiation engine over float64 numpy arrays.

A :class:`Tape` records every operation in construction order, so the
recorded sequence is already a topological order of the graph.  Trainable
leaves are registered by name; :func:`backward` returns a fresh dict of
gradients for them and keeps no state between calls.

Example::

    tape = Tape()
    w = tape.param("w", np.array([0.0]))
    loss = sum_all(sigmoid(w))
    grads = backward(tape, loss)    # {"w": array([0.25])}
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

_TINY = np.finfo(np.float64).tiny
_BELOW_ONE = np.nextafter(1.0, 0.0)


class DimensionError(ValueError):
    pass


class ContractError(ValueError):
    pass


class Node:
    __slots__ = ("value", "tape", "parents", "backward_fn", "name", "index", "needs_grad")

    def __init__(self, value, tape, parents=(), backward_fn=None, name=None, needs_grad=False):
        self.value = value
        self.tape = tape
        self.parents = parents
        self.backward_fn = backward_fn
        self.name = name
        self.needs_grad = needs_grad
        self.index = len(tape.nodes)
        tape.nodes.append(self)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __getitem__(self, idx):
        return take(self, idx)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Node#{self.index}{label}(shape={self.shape})"


class Tape:
    """Ordered record of one forward pass."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.params: dict[str, Node] = {}

    def param(self, name: str, value) -> Node:
        if name in self.params:
            raise ContractError(f"parameter {name!r} registered twice")
        node = Node(np.array(value, dtype=np.float64), self, name=name, needs_grad=True)
        self.params[name] = node
        return node

    def const(self, value) -> Node:
        return Node(np.asarray(value, dtype=np.float64), self)

    def __len__(self):
        return len(self.nodes)

    def grad_slots(self) -> int:
        """Number of scalar gradient slots over all trainable leaves."""
        return sum(node.value.size for node in self.params.values())


def _lift(x, tape: Tape) -> Node:
    if isinstance(x, Node):
        if x.tape is not tape:
            raise ContractError("operands belong to different tapes")
        return x
    return tape.const(x)


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, Node):
            return x.tape
    raise ContractError("at least one operand must be a tape node")


def _record(value, parents: Sequence[Node], backward_fn: Callable) -> Node:
    tape = parents[0].tape
    needs = any(p.needs_grad for p in parents)
    return Node(value, tape, tuple(parents), backward_fn if needs else None, needs_grad=needs)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(a: Node, b: Node, op: str) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not conform") from None


# --- primitives -----------------------------------------------------------


def add(a, b) -> Node:
    tape = _tape_of(a, b)
    a, b = _lift(a, tape), _lift(b, tape)
    _check_broadcast(a, b, "add")

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record(a.value + b.value, (a, b), back)


def sub(a, b) -> Node:
    tape = _tape_of(a, b)
    a, b = _lift(a, tape), _lift(b, tape)
    _check_broadcast(a, b, "sub")

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _record(a.value - b.value, (a, b), back)


def mul(a, b) -> Node:
    """Elementwise product with broadcasting (covers scalar-vector scaling)."""
    tape = _tape_of(a, b)
    a, b = _lift(a, tape), _lift(b, tape)
    _check_broadcast(a, b, "mul")

    def back(g):
        return _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)

    return _record(a.value * b.value, (a, b), back)


def matvec(W: Node, x: Node) -> Node:
    """``W @ x`` for an (n, m) matrix and a length-m vector."""
    tape = _tape_of(W, x)
    W, x = _lift(W, tape), _lift(x, tape)
    if W.value.ndim != 2 or x.value.ndim != 1 or W.shape[1] != x.shape[0]:
        raise DimensionError(f"matvec: matrix {W.shape} and vector {x.shape} do not conform")

    def back(g):
        return np.outer(g, x.value), W.value.T @ g

    return _record(W.value @ x.value, (W, x), back)


def linear(x: Node, W: Node) -> Node:
    """Apply ``W`` (n, m) to the last axis of ``x`` (..., m), giving (..., n)."""
    tape = _tape_of(x, W)
    x, W = _lift(x, tape), _lift(W, tape)
    if W.value.ndim != 2 or x.shape[-1:] != W.shape[1:]:
        raise DimensionError(f"linear: input {x.shape} and matrix {W.shape} do not conform")

    def back(g):
        gx = g @ W.value
        gW = g.reshape(-1, g.shape[-1]).T @ x.value.reshape(-1, x.shape[-1])
        return gx, gW

    return _record(x.value @ W.value.T, (x, W), back)


def affine(W: Node, x: Node, b: Node) -> Node:
    return add(linear(x, W), b)


def sigmoid(x: Node) -> Node:
    """Logistic function, clamped so the result stays strictly inside (0, 1)."""
    v = x.value
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    np.clip(out, _TINY, _BELOW_ONE, out=out)

    def back(g):
        return (g * out * (1.0 - out),)

    return _record(out, (x,), back)


def tanh(x: Node) -> Node:
    out = np.tanh(x.value)

    def back(g):
        return (g * (1.0 - out * out),)

    return _record(out, (x,), back)


def concat(xs: Sequence[Node], axis: int = -1) -> Node:
    tape = _tape_of(*xs)
    xs = [_lift(x, tape) for x in xs]
    try:
        out = np.concatenate([x.value for x in xs], axis=axis)
    except ValueError:
        raise DimensionError(f"concat: shapes {[x.shape for x in xs]} do not conform") from None
    cuts = np.cumsum([x.shape[axis] for x in xs])[:-1]

    def back(g):
        return tuple(np.split(g, cuts, axis=axis))

    return _record(out, xs, back)


def stack(xs: Sequence[Node], axis: int = 0) -> Node:
    tape = _tape_of(*xs)
    xs = [_lift(x, tape) for x in xs]
    try:
        out = np.stack([x.value for x in xs], axis=axis)
    except ValueError:
        raise DimensionError(f"stack: shapes {[x.shape for x in xs]} do not conform") from None

    def back(g):
        return tuple(np.moveaxis(g, axis, 0))

    return _record(out, xs, back)


def reshape(x: Node, shape: tuple[int, ...]) -> Node:
    try:
        out = x.value.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot view {x.shape} as {shape}") from None

    def back(g):
        return (g.reshape(x.shape),)

    return _record(out, (x,), back)


def take(x: Node, idx) -> Node:
    """Basic (slice/integer) indexing."""
    out = x.value[idx]

    def back(g):
        gx = np.zeros_like(x.value)
        gx[idx] += g
        return (gx,)

    return _record(np.array(out), (x,), back)


def sum_axis(x: Node, axis: int) -> Node:
    out = x.value.sum(axis=axis)

    def back(g):
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return _record(out, (x,), back)


def sum_all(x: Node) -> Node:
    def back(g):
        return (np.full(x.shape, float(g)),)

    return _record(np.array(x.value.sum()), (x,), back)


def mse(pred: Node, actual) -> Node:
    """Mean of squared differences over every element; returns a scalar node."""
    tape = pred.tape
    actual = _lift(actual, tape)
    if pred.shape != actual.shape:
        raise DimensionError(f"mse: prediction {pred.shape} and target {actual.shape} differ")
    diff = pred.value - actual.value
    m = diff.size

    def back(g):
        gd = (2.0 / m) * float(g) * diff
        return gd, -gd

    return _record(np.array(np.mean(diff * diff)), (pred, actual), back)


def backward(tape: Tape, loss: Node) -> dict[str, np.ndarray]:
    """Gradients of the scalar ``loss`` w.r.t. every registered parameter.

    Slots start at zero on every call; parameters the loss does not depend
    on get an all-zero gradient.
    """
    if loss.tape is not tape:
        raise ContractError("loss node is not on this tape")
    if loss.value.size != 1:
        raise ContractError(f"loss must be scalar, got shape {loss.shape}")
    grads: list[np.ndarray | None] = [None] * (loss.index + 1)
    grads[loss.index] = np.ones_like(loss.value)
    for node in reversed(tape.nodes[: loss.index + 1]):
        g = grads[node.index]
        if g is None or node.backward_fn is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if not parent.needs_grad:
                continue
            if grads[parent.index] is None:
                grads[parent.index] = np.array(pg, dtype=np.float64)
            else:
                grads[parent.index] = grads[parent.index] + pg
    out = {}
    for name, node in tape.params.items():
        g = grads[node.index] if node.index <= loss.index else None
        out[name] = np.zeros_like(node.value) if g is None else g
    return out
