"""Tensors, tapes and the reverse pass.

A `Tape` records one vector-Jacobian closure per operation whose output
depends on a tensor with ``requires_grad``.  Ops record onto the innermost
active tape (``with Tape(): ...``); `backward` replays the records in reverse.
Tapes are per-thread: each thread keeps its own stack of active tapes.
"""
from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from typing import Callable, NamedTuple, Sequence

import numpy as np

_node_ids = itertools.count(1)
_local = threading.local()


def _stack() -> list:
    if not hasattr(_local, "tapes"):
        _local.tapes = []
        _local.grad_enabled = True
    return _local.tapes


def active_tape() -> "Tape | None":
    stack = _stack()
    return stack[-1] if stack else None


def grad_enabled() -> bool:
    _stack()
    return _local.grad_enabled


@contextmanager
def no_grad():
    """Evaluate ops without recording; outputs never require grad."""
    _stack()
    prev = _local.grad_enabled
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = prev


class Record(NamedTuple):
    out_id: int
    inputs: tuple
    vjp: Callable
    op: str


class Tape:
    def __init__(self):
        self.records: list[Record] = []

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc):
        _stack().pop()

    def __len__(self) -> int:
        return len(self.records)

    def clear(self) -> None:
        self.records.clear()


class Tensor:
    __slots__ = ("value", "requires_grad", "node_id", "tape", "is_leaf", "name")
    __array_priority__ = 1000  # make ndarray <op> Tensor dispatch to Tensor

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.node_id = next(_node_ids)
        self.tape: Tape | None = None
        self.is_leaf = True
        self.name = name

    # -- array-like conveniences -------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return self.value.size

    def item(self) -> float:
        return float(self.value)

    def numpy(self) -> np.ndarray:
        return self.value

    def detach(self) -> "Tensor":
        return Tensor(self.value)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # -- operators (implemented in ops) -------------------------------------
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(other, self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, idx):
        from . import ops
        return ops.getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        from . import ops
        return ops.sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import ops
        return ops.mean(self, axis, keepdims)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_output(value: np.ndarray, inputs: Sequence[Tensor], vjp: Callable, op: str) -> Tensor:
    """Wrap an op result, recording it on the active tape when gradients are needed."""
    out = Tensor(value)
    out.is_leaf = False
    if grad_enabled() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape = active_tape()
        out.tape = tape
        if tape is not None:
            tape.records.append(Record(out.node_id, tuple(inputs), vjp, op))
    return out


class GradientMap(dict):
    """node_id -> gradient array; also indexable by the Tensor itself."""

    def __getitem__(self, key):
        if isinstance(key, Tensor):
            key = key.node_id
        return super().__getitem__(key)

    def __contains__(self, key):
        if isinstance(key, Tensor):
            key = key.node_id
        return super().__contains__(key)

    def get(self, key, default=None):
        if isinstance(key, Tensor):
            key = key.node_id
        return super().get(key, default)


def backward(loss: Tensor, retain: bool = False) -> GradientMap:
    """Gradients of a scalar `loss` for every leaf tensor that requires grad.

    The tape is cleared afterwards unless ``retain`` is set.
    """
    if loss.value.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not np.isfinite(loss.value).all():
        raise FloatingPointError(f"loss is not finite: {loss.value}")
    if not loss.requires_grad:
        return GradientMap()
    if loss.is_leaf:
        return GradientMap({loss.node_id: np.ones_like(loss.value)})
    tape = loss.tape
    if tape is None:
        raise RuntimeError("loss was not computed on a tape; wrap the forward pass in `with Tape():`")

    grads: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.value)}
    leaves: dict[int, Tensor] = {}
    for rec in reversed(tape.records):
        g = grads.pop(rec.out_id, None)
        if g is None:
            continue
        for t, gi in zip(rec.inputs, rec.vjp(g)):
            if gi is None or not t.requires_grad:
                continue
            if gi.shape != t.value.shape:
                raise RuntimeError(f"{rec.op}: gradient shape {gi.shape} != value shape {t.value.shape}")
            prev = grads.get(t.node_id)
            grads[t.node_id] = gi if prev is None else prev + gi
            if t.is_leaf:
                leaves[t.node_id] = t
    if not retain:
        tape.clear()
    return GradientMap({nid: grads[nid] for nid in leaves})
