"""Reverse-mode automatic differentiation on an append-only tape.

Every node holds a numpy value (a 0-d array for scalars, or a vector of
samples on a collocation grid) so that one node can stand for a whole
vectorised expression.  Elementwise nodes store their local partials;
the structured linear nodes (``matvec``, ``dot``, ``total``, ``take``)
store the constant operator instead and apply its transpose on the way
back.

The module-level functions (:func:`sin`, :func:`matvec`, ...) accept
either :class:`AdValue` or plain numpy input, so residual code can be
written once and run both on a tape and as a plain numeric evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import ArgumentError, DataError

__all__ = [
    "Tape", "AdValue", "sin", "cos", "exp", "sqrt", "max0", "square",
    "pow_int", "matvec", "dot", "total", "take", "value_of",
]


@dataclass(frozen=True)
class Node:
    kind: str
    parents: tuple[int, ...]
    partials: tuple[np.ndarray, ...]
    value: np.ndarray
    data: Any = None


# kind -> (forward(x), partial(x, y))
_UNARY: dict[str, tuple[Callable, Callable]] = {
    "neg": (np.negative, lambda x, y: np.full_like(x, -1.0)),
    "sin": (np.sin, lambda x, y: np.cos(x)),
    "cos": (np.cos, lambda x, y: -np.sin(x)),
    "exp": (np.exp, lambda x, y: y),
    "sqrt": (np.sqrt, lambda x, y: 0.5 / y),
    "square": (np.square, lambda x, y: 2.0 * x),
    # subgradient 0 at the kink
    "max0": (lambda x: np.maximum(x, 0.0), lambda x, y: (x > 0.0).astype(float)),
}

# kind -> (forward(a, b), partials(a, b, y))
_BINARY: dict[str, tuple[Callable, Callable]] = {
    "add": (np.add, lambda a, b, y: (np.ones_like(y), np.ones_like(y))),
    "sub": (np.subtract, lambda a, b, y: (np.ones_like(y), np.full_like(y, -1.0))),
    "mul": (np.multiply, lambda a, b, y: (np.broadcast_to(b, y.shape), np.broadcast_to(a, y.shape))),
    "div": (np.divide, lambda a, b, y: (np.broadcast_to(1.0 / b, y.shape), np.broadcast_to(-y / b, y.shape))),
}


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


class Tape:
    """Append-only record of a computation; parents always precede children."""

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self.inputs: list[int] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def _push(self, kind, parents, partials, value, data=None) -> "AdValue":
        self.nodes.append(Node(kind, tuple(parents), tuple(partials), value, data))
        return AdValue(self, len(self.nodes) - 1)

    def input(self, x) -> "AdValue":
        """Register an independent variable (scalar or array)."""
        v = np.array(x, dtype=float)
        if not np.all(np.isfinite(v)):
            raise DataError("non-finite input value")
        out = self._push("input", (), (), v)
        self.inputs.append(out.index)
        return out

    def lift(self, x) -> "AdValue":
        """Register a constant; its gradient is never propagated."""
        v = np.array(x, dtype=float)
        if not np.all(np.isfinite(v)):
            raise DataError("non-finite constant")
        return self._push("const", (), (), v)

    # ---- op recording -------------------------------------------------
    def unary(self, kind: str, x: "AdValue") -> "AdValue":
        fwd, dfn = _UNARY[kind]
        xv = x.value
        if kind == "sqrt" and np.any(xv < 0):
            raise DataError(f"sqrt of negative value at node {x.index}")
        with np.errstate(divide="ignore"):
            y = fwd(xv)
            return self._push(kind, (x.index,), (dfn(xv, y),), y)

    def binary(self, kind: str, a: "AdValue", b: "AdValue") -> "AdValue":
        fwd, dfn = _BINARY[kind]
        if kind == "div" and np.any(b.value == 0):
            raise DataError(f"division by zero: denominator node {b.index}")
        y = fwd(a.value, b.value)
        pa, pb = dfn(a.value, b.value, y)
        return self._push(kind, (a.index, b.index), (pa, pb), y)

    def pow_int(self, x: "AdValue", n: int) -> "AdValue":
        if int(n) != n:
            raise ArgumentError(f"pow_int needs an integer exponent, got {n}")
        n = int(n)
        xv = x.value
        if n < 0 and np.any(xv == 0):
            raise DataError(f"negative power of zero at node {x.index}")
        y = xv**n if n >= 0 else 1.0 / xv ** (-n)
        d = n * xv ** (n - 1) if n != 0 else np.zeros_like(xv)
        return self._push("pow_int", (x.index,), (d,), y, n)

    def matvec(self, a: np.ndarray, x: "AdValue") -> "AdValue":
        return self._push("matvec", (x.index,), (), a @ x.value, a)

    def dot(self, w: np.ndarray, x: "AdValue") -> "AdValue":
        return self._push("dot", (x.index,), (), np.asarray(w @ x.value, dtype=float), w)

    def total(self, x: "AdValue") -> "AdValue":
        return self._push("total", (x.index,), (), np.asarray(x.value.sum(), dtype=float))

    def take(self, x: "AdValue", idx) -> "AdValue":
        return self._push("take", (x.index,), (), np.array(x.value[idx], dtype=float), idx)

    # ---- sweeps -------------------------------------------------------
    def backward(self, output: "AdValue") -> list[np.ndarray]:
        """Gradient of a scalar ``output`` with respect to every input, in registration order."""
        if not isinstance(output, AdValue) or output.tape is not self:
            raise ArgumentError("output is not a value on this tape")
        if output.value.size != 1:
            raise ArgumentError(f"backward needs a scalar output, got shape {output.value.shape}")
        adj: list[np.ndarray | None] = [None] * (output.index + 1)
        adj[output.index] = np.ones_like(output.value)
        nodes = self.nodes
        for i in range(output.index, -1, -1):
            g = adj[i]
            if g is None:
                continue
            node = nodes[i]
            kind = node.kind
            if kind in ("input", "const"):
                continue
            if kind == "matvec":
                contribs = ((node.parents[0], node.data.T @ g),)
            elif kind == "dot":
                contribs = ((node.parents[0], node.data * g),)
            elif kind == "total":
                p = node.parents[0]
                contribs = ((p, np.broadcast_to(g, nodes[p].value.shape)),)
            elif kind == "take":
                p = node.parents[0]
                back = np.zeros_like(nodes[p].value)
                np.add.at(back, node.data, g)
                contribs = ((p, back),)
            else:
                contribs = tuple((p, g * d) for p, d in zip(node.parents, node.partials))
            for p, c in contribs:
                c = _unbroadcast(np.asarray(c), nodes[p].value.shape)
                adj[p] = c.copy() if adj[p] is None else adj[p] + c
        return [
            adj[j] if j < len(adj) and adj[j] is not None else np.zeros_like(nodes[j].value)
            for j in self.inputs
        ]

    def gradient_vector(self, output: "AdValue") -> np.ndarray:
        """:meth:`backward` flattened and concatenated over inputs."""
        return np.concatenate([g.ravel() for g in self.backward(output)]) if self.inputs else np.zeros(0)

    def replay(self) -> list[np.ndarray]:
        """Recompute every node value from inputs and constants."""
        vals: list[np.ndarray] = []
        for node in self.nodes:
            k = node.kind
            pv = [vals[p] for p in node.parents]
            if k in ("input", "const"):
                y = node.value.copy()
            elif k in _UNARY:
                with np.errstate(divide="ignore"):
                    y = _UNARY[k][0](pv[0])
            elif k in _BINARY:
                y = _BINARY[k][0](pv[0], pv[1])
            elif k == "pow_int":
                n = node.data
                y = pv[0] ** n if n >= 0 else 1.0 / pv[0] ** (-n)
            elif k == "matvec":
                y = node.data @ pv[0]
            elif k == "dot":
                y = np.asarray(node.data @ pv[0], dtype=float)
            elif k == "total":
                y = np.asarray(pv[0].sum(), dtype=float)
            elif k == "take":
                y = np.array(pv[0][node.data], dtype=float)
            else:  # pragma: no cover
                raise DataError(f"unknown node kind {k!r}")
            vals.append(y)
        return vals


class AdValue:
    """Handle to a tape node; carries the primal value for convenience."""

    __slots__ = ("tape", "index")
    __array_ufunc__ = None  # make numpy defer to our reflected operators

    def __init__(self, tape: Tape, index: int) -> None:
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.index].value

    def __repr__(self) -> str:
        return f"AdValue(#{self.index}, {self.value!r})"

    def _wrap(self, other) -> "AdValue":
        if isinstance(other, AdValue):
            if other.tape is not self.tape:
                raise ArgumentError("cannot mix values from different tapes")
            return other
        return self.tape.lift(other)

    def __add__(self, o):
        return self.tape.binary("add", self, self._wrap(o))

    def __radd__(self, o):
        return self.tape.binary("add", self._wrap(o), self)

    def __sub__(self, o):
        return self.tape.binary("sub", self, self._wrap(o))

    def __rsub__(self, o):
        return self.tape.binary("sub", self._wrap(o), self)

    def __mul__(self, o):
        return self.tape.binary("mul", self, self._wrap(o))

    def __rmul__(self, o):
        return self.tape.binary("mul", self._wrap(o), self)

    def __truediv__(self, o):
        return self.tape.binary("div", self, self._wrap(o))

    def __rtruediv__(self, o):
        return self.tape.binary("div", self._wrap(o), self)

    def __neg__(self):
        return self.tape.unary("neg", self)

    def __pow__(self, n):
        return self.tape.pow_int(self, n)

    def __float__(self) -> float:
        return float(self.value)


def _unary(kind: str, np_fn: Callable):
    def op(x):
        if isinstance(x, AdValue):
            return x.tape.unary(kind, x)
        return np_fn(x)

    op.__name__ = kind
    return op


sin = _unary("sin", np.sin)
cos = _unary("cos", np.cos)
exp = _unary("exp", np.exp)
sqrt = _unary("sqrt", np.sqrt)
square = _unary("square", np.square)
max0 = _unary("max0", lambda x: np.maximum(x, 0.0))


def pow_int(x, n: int):
    if isinstance(x, AdValue):
        return x.tape.pow_int(x, n)
    return np.asarray(x, dtype=float) ** n


def matvec(a: np.ndarray, x):
    """``a @ x`` for a constant matrix ``a``."""
    if isinstance(x, AdValue):
        return x.tape.matvec(a, x)
    return a @ x


def dot(w: np.ndarray, x):
    """``w @ x`` for a constant weight vector ``w``."""
    if isinstance(x, AdValue):
        return x.tape.dot(w, x)
    return w @ x


def total(x):
    if isinstance(x, AdValue):
        return x.tape.total(x)
    return np.sum(x)


def take(x, idx):
    if isinstance(x, AdValue):
        return x.tape.take(x, idx)
    return np.asarray(x)[idx]


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, AdValue) else np.asarray(x, dtype=float)
