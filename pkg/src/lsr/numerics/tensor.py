"""Dense float64 tensors with a reverse-mode autodiff tape.

A :class:`Tape` is activated with ``with Tape() as tape:``; every operation
on tensors that need gradients is appended to it together with a backward
rule.  ``tape.backward(loss)`` walks the record once in reverse order.
"""

from __future__ import annotations

import itertools
import threading
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


_local = threading.local()


def _active_tape() -> "Tape | None":
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


class Tensor:
    """A float64 array that may take part in the active tape.

    Tensors are treated as immutable values; the only sanctioned mutation is
    the optimizer overwriting ``data`` of a parameter between batches.
    """

    __slots__ = ("data", "requires_grad", "tape_id", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise NonFiniteError(f"non-finite values in tensor {name or ''}".strip())
        self.data = arr
        self.requires_grad = requires_grad
        self.tape_id: int | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None):
        return sum_(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Record:
    __slots__ = ("inputs", "output", "backward", "op")

    def __init__(self, op, inputs, output, backward):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward = backward


class Tape:
    """Ordered record of differentiable operations.

    Inputs are always recorded before the operation that consumes them, so
    a single reverse sweep is a valid topological traversal.
    """

    def __init__(self):
        self.records: list[_Record] = []
        self._ids = itertools.count()
        self._watched: dict[int, Tensor] = {}

    def __enter__(self) -> "Tape":
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _local.stack.pop()

    def _id_for(self, t: Tensor) -> int:
        if t.tape_id is None or self._watched.get(t.tape_id) is not t:
            t.tape_id = next(self._ids)
            self._watched[t.tape_id] = t
        return t.tape_id

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor, backward) -> None:
        ids = tuple(self._id_for(t) if t.requires_grad else None for t in inputs)
        output.requires_grad = True
        output.tape_id = next(self._ids)
        self._watched[output.tape_id] = output
        self.records.append(_Record(op, ids, output.tape_id, backward))

    def backward(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        """Gradients of a scalar ``loss`` w.r.t. every tensor on this tape.

        The returned mapping is keyed by tensor identity; tensors that do not
        influence the loss are absent.
        """
        if loss.data.size != 1:
            raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
        if loss.tape_id is None or self._watched.get(loss.tape_id) is not loss:
            raise ValueError("backward: loss was not produced on this tape")
        grads: dict[int, np.ndarray] = {loss.tape_id: np.ones_like(loss.data)}
        for rec in reversed(self.records):
            g = grads.get(rec.output)
            if g is None:
                continue
            in_grads = rec.backward(g)
            for tid, ig in zip(rec.inputs, in_grads):
                if tid is None or ig is None:
                    continue
                if tid in grads:
                    grads[tid] = grads[tid] + ig
                else:
                    grads[tid] = ig
        return {self._watched[tid]: g for tid, g in grads.items()}


def backward(loss: Tensor, tape: Tape | None = None) -> dict[Tensor, np.ndarray]:
    tape = tape or _active_tape()
    if tape is None:
        raise ValueError("backward: no active tape")
    return tape.backward(loss)


def _make(op: str, value: np.ndarray, inputs: Sequence[Tensor], backward) -> Tensor:
    if not np.isfinite(value).all():
        raise NonFiniteError(f"{op}: produced non-finite values")
    out = Tensor.__new__(Tensor)
    out.data = value
    out.requires_grad = False
    out.tape_id = None
    out.name = None
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        tape.record(op, inputs, out, backward)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}") from None


# -- elementwise binary ----------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)
    sa, sb = a.shape, b.shape
    return _make("add", a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)
    sa, sb = a.shape, b.shape
    return _make("sub", a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)
    ad, bd = a.data, b.data
    return _make("mul", ad * bd, (a, b),
                 lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make("scale", a.data * c, (a,), lambda g: (g * c,))


# -- elementwise unary -----------------------------------------------------

def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _make("tanh", y, (a,), lambda g: (g * (1.0 - y * y),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    return _make("sigmoid", y, (a,), lambda g: (g * y * (1.0 - y),))


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        y = np.exp(a.data)
    return _make("exp", y, (a,), lambda g: (g * y,))


def log(a: Tensor) -> Tensor:
    x = a.data
    if (x <= 0).any():
        raise NonFiniteError("log: non-positive input")
    return _make("log", np.log(x), (a,), lambda g: (g / x,))


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    inside = (a.data >= lo) & (a.data <= hi)
    return _make("clip", np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,))


# -- linear algebra / layout ----------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D matmul, or batched matmul over identical leading dims."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2] or a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul: shape mismatch {a.shape} vs {b.shape}")
    ad, bd = a.data, b.data
    return _make("matmul", ad @ bd, (a, b),
                 lambda g: (g @ np.swapaxes(bd, -1, -2), np.swapaxes(ad, -1, -2) @ g))


def transpose(a: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    axes = tuple(axes) if axes is not None else tuple(reversed(range(a.ndim)))
    inv = tuple(np.argsort(axes))
    return _make("transpose", np.transpose(a.data, axes), (a,),
                 lambda g: (np.transpose(g, inv),))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    old = a.shape
    try:
        y = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {old} as {tuple(shape)}") from None
    return _make("reshape", y, (a,), lambda g: (g.reshape(old),))


def sum_(a: Tensor, axis: int | None = None) -> Tensor:
    shape = a.shape
    if axis is None:
        return _make("sum", np.asarray(a.data.sum()), (a,),
                     lambda g: (np.broadcast_to(g, shape).copy(),))
    return _make("sum", a.data.sum(axis=axis), (a,),
                 lambda g: (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),))


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    count = a.data.size if axis is None else a.shape[axis]
    return scale(sum_(a, axis), 1.0 / count)


def mean_rows(a: Tensor) -> Tensor:
    return mean(a, axis=0)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    ref = parts[0].shape
    ax = axis % len(ref)
    for p in parts[1:]:
        if len(p.shape) != len(ref) or any(
                s != r for i, (s, r) in enumerate(zip(p.shape, ref)) if i != ax):
            raise ShapeError(f"concat: shape mismatch {ref} vs {p.shape}")
    bounds = np.cumsum([0] + [p.shape[ax] for p in parts])

    def bw(g):
        return tuple(np.take(g, np.arange(lo, hi), axis=ax) for lo, hi in zip(bounds[:-1], bounds[1:]))

    return _make("concat", np.concatenate([p.data for p in parts], axis=ax), parts, bw)


def getitem(a: Tensor, index) -> Tensor:
    """Basic or integer-array indexing; gradients scatter-add back."""
    shape = a.shape

    fancy = any(isinstance(i, (np.ndarray, list)) for i in
                (index if isinstance(index, tuple) else (index,)))

    def bw(g):
        out = np.zeros(shape)
        if fancy:
            np.add.at(out, index, g)
        else:
            out[index] = g
        return (out,)

    return _make("getitem", np.array(a.data[index]), (a,), bw)


def take_rows(a: Tensor, idx: Sequence[int]) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    return getitem(a, idx)


def diag(v: Tensor) -> Tensor:
    """Square matrix with ``v`` on the diagonal."""
    if v.ndim != 1:
        raise ShapeError(f"diag: expected vector, got {v.shape}")
    return _make("diag", np.diag(v.data), (v,), lambda g: (np.diag(g).copy(),))


def diagonal(m: Tensor) -> Tensor:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"diagonal: expected square matrix, got {m.shape}")
    n = m.shape[0]
    return _make("diagonal", np.diag(m.data).copy(), (m,), lambda g: (np.diag(g),))


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Inverted dropout; identity outside train mode."""
    if not train or rate <= 0.0:
        return a
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return mul(a, Tensor(keep))


def stack_rows(vectors: Iterable[Tensor]) -> Tensor:
    vectors = list(vectors)
    return concat([reshape(v, (1,) + v.shape) for v in vectors], axis=0)
