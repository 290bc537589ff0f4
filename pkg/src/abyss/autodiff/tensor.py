"""Dense tensors with reverse-mode automatic differentiation.

Dynamic define-by-run graph over numpy arrays. Every op returns a new
Tensor; when grad recording is enabled and an input requires grad, the
output carries a backward closure that scatters the upstream gradient
into its parents. `backward()` runs a topological sweep from a scalar.
"""

from __future__ import annotations

import contextlib

import numpy as np

_GRAD_ENABLED = True


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (pure numpy speed)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_prev", "_backward", "_done")

    def __init__(self, data, requires_grad=False, _prev=(), _backward=None):
        if not isinstance(data, np.ndarray):
            data = np.asarray(data, dtype=np.float64)
        self.data = data
        self.grad = None
        self.requires_grad = requires_grad
        self._prev = _prev
        self._backward = _backward
        self._done = False

    # -- introspection ----------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def item(self):
        return self.data.item()

    def numpy(self):
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            np.add(self.grad, g, out=self.grad)

    # -- autodiff ----------------------------------------------------------
    def backward(self):
        """Reverse sweep from a scalar; grads accumulate into leaves."""
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar loss, got shape {self.shape}")
        if self._done:
            raise RuntimeError("backward() already ran on this tensor; rebuild the graph or zero grads first")
        self._done = True

        topo, visited, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if id(p) not in visited:
                    stack.append((p, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if not node.requires_grad:
                    node.grad = None  # interior grads are transient

    # -- operator sugar ------------------------------------------------------
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
        return neg(self)

    def __truediv__(self, other):
        return div(self, other)

    def __pow__(self, c):
        return power(self, c)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x, dtype=dtype) if dtype is not None else np.asarray(x, dtype=np.float64)
    return Tensor(arr)


def _track(*inputs):
    return _GRAD_ENABLED and any(isinstance(t, Tensor) and t.requires_grad for t in inputs)


def _out(data, inputs, backward, track):
    if track:
        return Tensor(data, requires_grad=True, _prev=tuple(t for t in inputs if isinstance(t, Tensor)), _backward=backward)
    return Tensor(data)


def unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum gradient over axes that were broadcast to reach `g.shape`."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- arithmetic ---------------------------------------------------------------

def add(a, b):
    if isinstance(b, (int, float)):
        a = as_tensor(a)
        track = _track(a)

        def backward_s(g):
            if a.requires_grad:
                a._accumulate(g)

        return _out(a.data + b, (a,), backward_s, track)
    a, b = as_tensor(a), as_tensor(b)
    track = _track(a, b)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(unbroadcast(g, b.shape))

    return _out(out_data, (a, b), backward, track)


def sub(a, b):
    if isinstance(b, (int, float)):
        return add(a, -b)
    if isinstance(a, (int, float)):
        return add(neg(b), a)
    a, b = as_tensor(a), as_tensor(b)
    track = _track(a, b)
    out_data = a.data - b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(-unbroadcast(g, b.shape))

    return _out(out_data, (a, b), backward, track)


def mul(a, b):
    if isinstance(b, (int, float)):
        a = as_tensor(a)
        track = _track(a)

        def backward_s(g):
            if a.requires_grad:
                a._accumulate(g * b)

        return _out(a.data * b, (a,), backward_s, track)
    a, b = as_tensor(a), as_tensor(b)
    track = _track(a, b)
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(unbroadcast(g * a.data, b.shape))

    return _out(out_data, (a, b), backward, track)


def div(a, b):
    if isinstance(b, (int, float)):
        return mul(a, 1.0 / b)
    a, b = as_tensor(a), as_tensor(b)
    track = _track(a, b)
    out_data = a.data / b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(unbroadcast(-g * out_data / b.data, b.shape))

    return _out(out_data, (a, b), backward, track)


def neg(a):
    a = as_tensor(a)
    track = _track(a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(-g)

    return _out(-a.data, (a,), backward, track)


def power(a, c: float):
    a = as_tensor(a)
    track = _track(a)
    out_data = a.data ** c

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * c * a.data ** (c - 1))

    return _out(out_data, (a,), backward, track)


def exp(a):
    a = as_tensor(a)
    track = _track(a)
    out_data = np.exp(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * out_data)

    return _out(out_data, (a,), backward, track)


def log(a):
    a = as_tensor(a)
    track = _track(a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g / a.data)

    return _out(np.log(a.data), (a,), backward, track)


def sqrt(a):
    a = as_tensor(a)
    track = _track(a)
    out_data = np.sqrt(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * 0.5 / out_data)

    return _out(out_data, (a,), backward, track)


# -- linear algebra -----------------------------------------------------------

def matmul(a, b):
    """Stacked matrix product with numpy broadcasting on batch dims."""
    a, b = as_tensor(a), as_tensor(b)
    track = _track(a, b)
    out_data = np.matmul(a.data, b.data)

    def backward(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a._accumulate(unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b._accumulate(unbroadcast(gb, b.shape))

    return _out(out_data, (a, b), backward, track)


def transpose(a, axes):
    a = as_tensor(a)
    track = _track(a)
    inv = np.argsort(axes)

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.transpose(g, inv))

    return _out(np.transpose(a.data, axes), (a,), backward, track)


def reshape(a, shape):
    a = as_tensor(a)
    track = _track(a)
    old_shape = a.shape

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.reshape(old_shape))

    return _out(a.data.reshape(shape), (a,), backward, track)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    track = _track(*tensors)
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            if t.requires_grad:
                t._accumulate(piece)

    return _out(out_data, tuple(tensors), backward, track)


def _is_basic_index(key) -> bool:
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(p, (int, slice, type(None), type(Ellipsis))) for p in parts)


def getitem(a, key):
    a = as_tensor(a)
    track = _track(a)

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            if _is_basic_index(key):
                full[key] += g
            else:
                np.add.at(full, key, g)
            a._accumulate(full)

    return _out(a.data[key], (a,), backward, track)


def take_rows(a, idx):
    """Gather rows along axis 0; gradient scatter-adds back."""
    a = as_tensor(a)
    idx = np.asarray(idx)
    track = _track(a)

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            np.add.at(full, idx, g)
            a._accumulate(full)

    return _out(a.data[idx], (a,), backward, track)


def put_rows(a, idx, length):
    """Scatter rows of `a` into a zero tensor of `length` rows (idx unique)."""
    a = as_tensor(a)
    idx = np.asarray(idx)
    track = _track(a)
    out_data = np.zeros((length,) + a.shape[1:], dtype=a.dtype)
    out_data[idx] = a.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g[idx])

    return _out(out_data, (a,), backward, track)


def take_along_last(a, idx):
    """Pick one entry per row along the last axis: out[..., ] = a[..., idx]."""
    a = as_tensor(a)
    idx = np.asarray(idx)
    track = _track(a)
    expanded = np.expand_dims(idx, -1)
    out_data = np.take_along_axis(a.data, expanded, axis=-1).squeeze(-1)

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            np.put_along_axis(full, expanded, np.expand_dims(g, -1), axis=-1)
            a._accumulate(full)

    return _out(out_data, (a,), backward, track)


# -- reductions ----------------------------------------------------------------

def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    track = _track(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if a.requires_grad:
            if axis is None:
                a._accumulate(np.broadcast_to(g, a.shape))
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                a._accumulate(np.broadcast_to(gg, a.shape))

    return _out(out_data, (a,), backward, track)


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    n = a.size if axis is None else a.shape[axis]
    return mul(tsum(a, axis, keepdims), 1.0 / n)


def stop_gradient(a) -> Tensor:
    return as_tensor(a).detach()
