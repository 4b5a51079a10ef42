"""Dense tensors with a tape-free reverse-mode gradient.

Every op returns a new :class:`Tensor` that remembers its parents and a
closure propagating the output gradient back to them.  ``backward`` walks
the graph in reverse topological order.
"""
from __future__ import annotations

import numpy as np

from .. import kernels

CHECK_FINITE = True


class NonFiniteError(FloatingPointError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward", "name")

    def __init__(self, data, parents=(), backward=None, name=None):
        self.data = np.asarray(data)
        self.grad = None
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<Tensor{label} shape={self.shape} dtype={self.dtype}>"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __getitem__(self, key):
        return index(self, key)


class Param(Tensor):
    """A trainable tensor. Holds its gradient and Adam moments."""

    __slots__ = ("m", "v", "step")

    def __init__(self, data, name=None):
        super().__init__(np.array(data), name=name)
        self.grad = np.zeros_like(self.data)
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)
        self.step = 0

    def zero_grad(self):
        self.grad[...] = 0.0


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _node(data, parents, backward):
    if CHECK_FINITE and data.dtype.kind == "f" and not np.isfinite(data).all():
        raise NonFiniteError("non-finite value produced by forward op")
    return Tensor(data, parents, backward)


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------- arithmetic


def _pair(a, b):
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        return a, Tensor(np.asarray(b, dtype=a.dtype))
    if isinstance(b, Tensor) and not isinstance(a, Tensor):
        return Tensor(np.asarray(a, dtype=b.dtype)), b
    return as_tensor(a), as_tensor(b)


def add(a, b):
    a, b = _pair(a, b)
    out = a.data + b.data

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(out, (a, b), back)


def sub(a, b):
    a, b = _pair(a, b)
    out = a.data - b.data

    def back(g):
        return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)

    return _node(out, (a, b), back)


def mul(a, b):
    a, b = _pair(a, b)
    out = a.data * b.data

    def back(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _node(out, (a, b), back)


def matmul(a, b):
    """``a @ b`` with numpy batching rules; 1-d operands are not supported."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul needs operands of rank >= 2")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def back(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _node(out, (a, b), back)


def linear(x, weight, bias=None):
    """``x @ weight.T + bias`` where weight is (out, in)."""
    y = matmul(x, transpose(weight))
    return y if bias is None else add(y, bias)


def inner(a, b, axis=-1):
    """Inner product along ``axis``."""
    return sum_(mul(a, b), axis=axis)


# ------------------------------------------------------------ nonlinearities


def tanh(x):
    y = np.tanh(x.data)
    return _node(y, (x,), lambda g: (g * (1.0 - y * y),))


def relu(x):
    keep = x.data > 0
    return _node(np.where(keep, x.data, 0.0).astype(x.dtype), (x,), lambda g: (g * keep,))


def sigmoid(x):
    y = 1.0 / (1.0 + np.exp(-x.data))
    return _node(y, (x,), lambda g: (g * y * (1.0 - y),))


def log(x, eps=0.0):
    """Natural log; with ``eps`` > 0 the input is clamped below at ``eps``."""
    xd = np.maximum(x.data, eps) if eps else x.data
    live = x.data > eps if eps else np.ones(x.shape, dtype=bool)

    def back(g):
        return (np.where(live, g / xd, 0.0),)

    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(xd)
    return _node(out, (x,), back)


def softmax(x, axis=-1, mask=None):
    """Softmax along ``axis``. Entries where ``mask`` is False get exactly 0.

    A row with every entry masked yields all zeros.
    """
    z = x.data
    if mask is not None:
        mask = np.broadcast_to(mask, z.shape)
        z = np.where(mask, z, -np.inf)
    zmax = np.max(z, axis=axis, keepdims=True)
    zmax = np.where(np.isfinite(zmax), zmax, 0.0)
    e = np.exp(z - zmax)
    s = e.sum(axis=axis, keepdims=True)
    y = np.divide(e, s, out=np.zeros_like(e), where=s > 0)

    def back(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _node(y, (x,), back)


def dropout(x, rate, train, rng=None):
    """Inverted dropout; identity when ``train`` is False or ``rate`` is 0."""
    if not train or rate <= 0.0:
        return x
    if rate >= 1.0:
        raise ValueError("dropout rate must be < 1")
    rng = rng if rng is not None else np.random.default_rng()
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return _node(x.data * keep, (x,), lambda g: (g * keep,))


# ---------------------------------------------------------------- reductions


def sum_(x, axis=None, keepdims=False):
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _node(np.asarray(out), (x,), back)


def mean(x, axis=None, keepdims=False):
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum_(x, axis=axis, keepdims=keepdims), 1.0 / n)


def set_mean(x, weights):
    """Mean over sets encoded as a 0/1 membership matrix.

    ``weights[..., i, j]`` is 1 when row j of ``x`` belongs to set i; empty
    sets produce a zero vector.
    """
    w = np.asarray(weights, dtype=x.dtype)
    deg = w.sum(axis=-1, keepdims=True)
    norm = np.divide(w, deg, out=np.zeros_like(w), where=deg > 0)
    return matmul(Tensor(norm), x)


# ------------------------------------------------------------------- shaping


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def back(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _node(out, tuple(tensors), back)


def reshape(x, shape):
    return _node(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x):
    """Swap the last two axes."""
    return _node(np.swapaxes(x.data, -1, -2), (x,), lambda g: (np.swapaxes(g, -1, -2),))


def broadcast_to(x, shape):
    out = np.broadcast_to(x.data, shape).copy()
    return _node(out, (x,), lambda g: (_unbroadcast(g, x.shape),))


def expand(x, axis):
    return _node(np.expand_dims(x.data, axis), (x,), lambda g: (np.squeeze(g, axis),))


def index(x, key):
    out = x.data[key]

    def back(g):
        full = np.zeros_like(x.data)
        np.add.at(full, key, g)
        return (full,)

    return _node(np.asarray(out), (x,), back)


def embedding(table, idx):
    """Row lookup ``table[idx]`` for an integer array of any shape."""
    idx = np.asarray(idx, dtype=np.int64)
    out = table.data[idx]

    def back(g):
        full = np.zeros_like(table.data)
        kernels.scatter_add_rows(full, idx.reshape(-1), g.reshape(-1, table.shape[-1]))
        return (full,)

    return _node(out, (table,), back)


def gather_rows(x, idx):
    """Batched row gather: ``out[b, t] = x[b, idx[b, t]]`` for x of shape (B, U, d)."""
    b, u, d = x.shape
    idx = np.asarray(idx, dtype=np.int64)
    flat = idx + (np.arange(b, dtype=np.int64) * u)[:, None]
    return embedding(reshape(x, (b * u, d)), flat)


def pick(x, idx):
    """``out[b] = x[b, idx[b]]`` for a 2-d ``x``."""
    rows = np.arange(x.shape[0])
    idx = np.asarray(idx, dtype=np.int64)
    out = x.data[rows, idx]

    def back(g):
        full = np.zeros_like(x.data)
        full[rows, idx] = g
        return (full,)

    return _node(out, (x,), back)


def scatter_add(x, idx, size):
    """``out[b, idx[b, t]] += x[b, t]`` into a (B, size) result."""
    b, t = x.shape
    idx = np.asarray(idx, dtype=np.int64)
    out = np.zeros((b, size), dtype=x.dtype)
    flat = (idx + (np.arange(b, dtype=np.int64) * size)[:, None]).reshape(-1)
    kernels.scatter_add_rows(out.reshape(-1, 1), flat, x.data.reshape(-1, 1))

    def back(g):
        return (g.reshape(-1)[flat].reshape(b, t),)

    return _node(out, (x,), back)


def where(cond, x, fill=0.0):
    """Keep ``x`` where ``cond`` is True, else the constant ``fill``."""
    cond = np.asarray(cond)
    out = np.where(cond, x.data, fill).astype(x.dtype)
    return _node(out, (x,), lambda g: (_unbroadcast(np.where(cond, g, 0.0), x.shape),))


# ------------------------------------------------------------------ backward


def _toposort(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss):
    """Accumulate d(loss)/d(param) into ``.grad`` of every reachable Param.

    Param gradients accumulate across calls; zero them between steps.
    """
    if not isinstance(loss, Tensor) or loss._backward is None:
        raise RuntimeError("backward() needs a loss produced by forward ops")
    if loss.data.size != 1:
        raise ValueError("backward() needs a scalar loss")
    order = _toposort(loss)
    for node in order:
        if not isinstance(node, Param):
            node.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is None or node.grad is None:
            continue
        grads = node._backward(node.grad)
        for parent, g in zip(node._parents, grads):
            if g is None:
                continue
            if isinstance(parent, Param):
                parent.grad += g
            elif parent._backward is not None:
                parent.grad = g if parent.grad is None else parent.grad + g
        if not isinstance(node, Param):
            node.grad = None
