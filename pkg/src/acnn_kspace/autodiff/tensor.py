"""Tape-free reverse-mode autodiff over numpy arrays.

Every :class:`Tensor` produced by an operation remembers its parents and a
closure that pushes its gradient back to them. ``loss.backward()`` orders the
graph topologically and runs those closures once each.
"""

import numpy as np


class GraphError(RuntimeError):
    """Raised for misuse of the computation graph (e.g. backward on a non-scalar)."""


def unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, parents=(), op="", dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=dtype)
        if self.data.dtype.kind not in "f":
            self.data = self.data.astype(np.float32)
        self.requires_grad = requires_grad
        self.grad = None
        self.op = op
        self._parents = parents
        self._backward = None

    # -- construction helpers -------------------------------------------------
    @classmethod
    def _make(cls, data, parents, op, backward):
        needs = any(p.requires_grad for p in parents)
        out = cls(data, requires_grad=needs, parents=parents if needs else (), op=op)
        if needs:
            out._backward = backward
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if not self.requires_grad:
            return
        g = unbroadcast(g, self.data.shape).astype(self.data.dtype, copy=False)
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    # -- backward -------------------------------------------------------------
    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise GraphError(f"backward() needs a scalar loss, got shape {self.shape}")
            grad = np.ones_like(self.data)
        if not self.requires_grad:
            raise GraphError("loss does not depend on any tensor that requires gradients")

        order, seen = [], set()
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:  # leaf
                node._accumulate(g)
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                pg = unbroadcast(pg, parent.data.shape)
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

    # -- arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = as_tensor(other, self.dtype)
        return Tensor._make(self.data + other.data, (self, other), "add", lambda g: (g, g))

    __radd__ = __add__

    def __neg__(self):
        return Tensor._make(-self.data, (self,), "neg", lambda g: (-g,))

    def __sub__(self, other):
        other = as_tensor(other, self.dtype)
        return Tensor._make(self.data - other.data, (self, other), "sub", lambda g: (g, -g))

    def __rsub__(self, other):
        return as_tensor(other, self.dtype) - self

    def __mul__(self, other):
        other = as_tensor(other, self.dtype)
        a, b = self.data, other.data
        return Tensor._make(a * b, (self, other), "mul", lambda g: (g * b, g * a))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other, self.dtype)
        a, b = self.data, other.data
        return Tensor._make(
            a / b, (self, other), "div", lambda g: (g / b, -g * a / (b * b))
        )

    def __pow__(self, p):
        a = self.data
        return Tensor._make(a**p, (self,), "pow", lambda g: (g * p * a ** (p - 1),))

    def sum(self, axis=None, keepdims=False):
        a = self.data
        out = a.sum(axis=axis, keepdims=keepdims)

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, a.shape),)

        return Tensor._make(out, (self,), "sum", backward)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod([self.data.shape[i] for i in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def astype(self, dtype):
        src = self.data.dtype
        return Tensor._make(
            self.data.astype(dtype), (self,), "cast", lambda g: (g.astype(src),)
        )

    def reshape(self, *shape):
        src = self.data.shape
        return Tensor._make(
            self.data.reshape(*shape), (self,), "reshape", lambda g: (g.reshape(src),)
        )

    def __getitem__(self, idx):
        src = self.data.shape
        dtype = self.data.dtype

        # basic slicing only, so every source element is hit at most once
        def backward(g):
            full = np.zeros(src, dtype=dtype)
            full[idx] = g
            return (full,)

        return Tensor._make(self.data[idx], (self,), "getitem", backward)


class Parameter(Tensor):
    """A named leaf tensor owned by a module."""

    def __init__(self, data, name="", trainable=True):
        super().__init__(np.array(data, copy=True), requires_grad=trainable)
        self.name = name
        self.trainable = trainable

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape}, trainable={self.trainable})"


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))
