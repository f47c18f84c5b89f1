"""Dense tensors, the operation tape and the reverse pass."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class Tensor:
    """An n-dimensional real array with an optional adjoint buffer.

    ``requires_grad`` marks leaves (parameters) and everything computed from
    them while a :class:`Tape` is recording.
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"

    # Operator sugar; the real work lives in ``ops``.
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
        return ops.scale(self, -1.0)

    def __pow__(self, p: float):
        from . import ops
        return ops.power(self, p)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops
        return ops.getitem(self, index)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import ops
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    def sum(self, axis=None, keepdims: bool = False):
        from . import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from . import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Node:
    __slots__ = ("out", "inputs", "vjp", "label")

    def __init__(self, out: Tensor, inputs: Sequence[Tensor], vjp: Callable, label: str):
        self.out = out
        self.inputs = tuple(inputs)
        self.vjp = vjp
        self.label = label


class Tape:
    """Ordered record of executed operations.

    Use as a context manager; operations executed inside the block on
    tensors that require gradients are appended in execution order.
    """

    _active: list["Tape"] = []

    def __init__(self):
        self.nodes: list[Node] = []

    def __enter__(self) -> "Tape":
        Tape._active.append(self)
        return self

    def __exit__(self, *exc) -> None:
        Tape._active.remove(self)

    def __len__(self) -> int:
        return len(self.nodes)

    def clear(self) -> None:
        self.nodes.clear()

    @classmethod
    def current(cls) -> Optional["Tape"]:
        return cls._active[-1] if cls._active else None


def record(out_data: np.ndarray, inputs: Sequence[Tensor], vjp: Callable, label: str) -> Tensor:
    """Wrap ``out_data`` and put the op on the active tape if it needs grads.

    ``vjp(g)`` must return one gradient (or None) per input.
    """
    tape = Tape.current()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs)
    if needs:
        tape.nodes.append(Node(out, inputs, vjp, label))
    return out


def backward(loss: Tensor, tape: Tape, params: Optional[Sequence[Tensor]] = None) -> None:
    """Populate ``.grad`` on every tensor reachable from ``loss``.

    Gradients overwrite (not accumulate into) previous values. Tensors in
    ``params`` that the loss does not depend on receive a zero adjoint.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    adj: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    seen: dict[int, Tensor] = {id(loss): loss}
    for node in reversed(tape.nodes):
        g = adj.get(id(node.out))
        if g is None:
            continue
        grads = node.vjp(g)
        for t, gt in zip(node.inputs, grads):
            if gt is None or not t.requires_grad:
                continue
            key = id(t)
            if key in adj:
                adj[key] = adj[key] + gt
            else:
                adj[key] = gt
                seen[key] = t
    for key, t in seen.items():
        t.grad = adj[key]
    for p in params or ():
        if id(p) not in seen:
            p.grad = np.zeros_like(p.data)
