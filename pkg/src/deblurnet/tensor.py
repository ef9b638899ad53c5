"""Minimal reverse-mode autodiff tensor.

Every differentiable op builds its output with :meth:`Tensor._make`, passing the
parent tensors and a closure that maps the output gradient to one gradient
per parent. :meth:`Tensor.backward` walks the graph in reverse topological
order and accumulates into ``.grad``.
"""
import contextlib
import os

import numpy as np

DEFAULT_DTYPE = np.float32

_grad_enabled = True
_debug = bool(os.environ.get("DEBLURNET_DEBUG"))


def set_debug(flag):
    """Check every op output for NaN/Inf when enabled."""
    global _debug
    _debug = bool(flag)


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = np.ascontiguousarray(arr)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self.name = name

    @classmethod
    def _make(cls, data, parents, backward):
        out = cls(data)
        if _debug and not np.all(np.isfinite(out.data)):
            raise FloatingPointError("op produced non-finite values")
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __mul__(self, scalar):
        return scale(self, scalar)

    __rmul__ = __mul__

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))

        grads = {id(self): np.asarray(grad, dtype=self.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


def add(a, b):
    if a.shape != b.shape:
        raise ValueError(f"add expects identical shapes, got {a.shape} and {b.shape}")
    return Tensor._make(a.data + b.data, (a, b), lambda g: (g, g))


def scale(a, s):
    s = a.dtype.type(s)
    return Tensor._make(a.data * s, (a,), lambda g: (g * s,))


def tensor_sum(a):
    return Tensor._make(
        np.asarray(a.data.sum(), dtype=a.dtype), (a,),
        lambda g: (np.full(a.shape, g, dtype=a.dtype),))


def tensor_mean(a):
    n = a.size
    return Tensor._make(
        np.asarray(a.data.mean(), dtype=a.dtype), (a,),
        lambda g: (np.full(a.shape, g / n, dtype=a.dtype),))
