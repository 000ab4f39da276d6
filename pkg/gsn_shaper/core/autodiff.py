"""
Reverse-mode automatic differentiation for gsn-shaper

A Tape records every primitive applied to float64 tensors, in evaluation
order, together with the vector-Jacobian product needed to run it
backwards. Trainable objects register their parameters as leaves on a
fresh tape for each forward pass; backward() then returns exact
gradients for every leaf.

A Tape and the Tensors on it belong to the thread that built them.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence, Union, Dict, List, Tuple

import numpy as np
from scipy.special import expit

from gsn_shaper.exceptions import DomainError, GsnError, NumericError, ShapeError

Vjp = Callable[[np.ndarray], Tuple[np.ndarray, ...]]
ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]


@dataclass
class Node:
    """One recorded evaluation step."""
    op: str
    inputs: Tuple[int, ...]
    value: np.ndarray
    vjp: Optional[Vjp] = None
    name: Optional[str] = None
    is_leaf: bool = False


class Tensor:
    """Handle to a node on a tape."""

    __slots__ = ("tape", "index")
    __array_priority__ = 100.0

    def __init__(self, tape: Tape, index: int):
        self.tape = tape
        self.index = index

    @property
    def node(self) -> Node:
        return self.tape.nodes[self.index]

    @property
    def value(self) -> np.ndarray:
        return self.node.value

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.node.value.shape

    @property
    def ndim(self) -> int:
        return self.node.value.ndim

    def numpy(self) -> np.ndarray:
        """Copy of the forward value."""
        return self.node.value.copy()

    def item(self) -> float:
        if self.node.value.size != 1:
            raise ShapeError("item", self.shape, ())
        return float(self.node.value.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(op={self.node.op!r}, shape={self.shape})"

    def __add__(self, other: ArrayLike) -> Tensor:
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> Tensor:
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> Tensor:
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> Tensor:
        return mul(other, self)

    def __truediv__(self, other: float) -> Tensor:
        if isinstance(other, Tensor) or np.ndim(other) != 0:
            raise GsnError("division is only supported by a scalar constant")
        return mul(self, 1.0 / float(other))

    def __neg__(self) -> Tensor:
        return neg(self)

    def __matmul__(self, other: ArrayLike) -> Tensor:
        return matmul(self, other)

    def __rmatmul__(self, other: ArrayLike) -> Tensor:
        return matmul(other, self)

    @property
    def T(self) -> Tensor:
        return transpose(self)


class Gradients:
    """Leaf gradients returned by Tape.backward()."""

    def __init__(self, tape: Tape, grads: Dict[int, np.ndarray]):
        self._tape = tape
        self._grads = grads

    def __getitem__(self, key: Union[Tensor, int]) -> np.ndarray:
        index = key.index if isinstance(key, Tensor) else key
        if index not in self._grads:
            raise KeyError(f"node {index} is not a leaf of this tape")
        return self._grads[index]

    def __iter__(self) -> Iterator[int]:
        return iter(self._grads)

    def __len__(self) -> int:
        return len(self._grads)

    def by_name(self) -> Dict[str, np.ndarray]:
        """Gradients of the named leaves."""
        return {
            self._tape.nodes[i].name: g
            for i, g in self._grads.items()
            if self._tape.nodes[i].name is not None
        }


@dataclass
class Tape:
    """Ordered record of evaluated primitives."""
    nodes: List[Node] = field(default_factory=list)
    bindings: Dict[int, Dict[str, Tensor]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.nodes)

    def leaf(self, value: ArrayLike, name: Optional[str] = None) -> Tensor:
        """Register a differentiable input."""
        array = _as_array(value)
        _check_finite("leaf", array)
        self.nodes.append(Node("leaf", (), array, name=name, is_leaf=True))
        return Tensor(self, len(self.nodes) - 1)

    def constant(self, value: ArrayLike) -> Tensor:
        """Register a value that receives no gradient."""
        if isinstance(value, Tensor):
            value = value.value
        array = _as_array(value)
        _check_finite("constant", array)
        self.nodes.append(Node("constant", (), array))
        return Tensor(self, len(self.nodes) - 1)

    def record(self, op: str, inputs: Sequence[Tensor], value: np.ndarray, vjp: Vjp) -> Tensor:
        """Append a primitive evaluation; inputs always precede the new node."""
        _check_finite(op, value)
        self.nodes.append(Node(op, tuple(t.index for t in inputs), value, vjp))
        return Tensor(self, len(self.nodes) - 1)

    def leaves(self) -> List[Tensor]:
        return [Tensor(self, i) for i, n in enumerate(self.nodes) if n.is_leaf]

    def backward(self, output: Tensor) -> Gradients:
        """Exact reverse-mode accumulation of d(output)/d(leaf) for every leaf."""
        if output.tape is not self:
            raise GsnError("output does not belong to this tape")
        if output.value.size != 1:
            raise ShapeError("backward (scalar output required)", output.shape)

        adjoints: Dict[int, np.ndarray] = {output.index: np.ones_like(output.value)}
        for index in range(output.index, -1, -1):
            node = self.nodes[index]
            grad = adjoints.get(index)
            if grad is None or node.vjp is None:
                continue
            for parent, contribution in zip(node.inputs, node.vjp(grad)):
                if parent in adjoints:
                    adjoints[parent] = adjoints[parent] + contribution
                else:
                    adjoints[parent] = contribution

        grads = {
            i: adjoints.get(i, np.zeros_like(n.value))
            for i, n in enumerate(self.nodes)
            if n.is_leaf
        }
        return Gradients(self, grads)


def backward(tape: Tape, output: Tensor) -> Gradients:
    """Gradients of a scalar output with respect to every leaf of the tape."""
    return tape.backward(output)


# =============================================================================
# Helpers
# =============================================================================

def _as_array(value: ArrayLike) -> np.ndarray:
    return np.array(value, dtype=np.float64)


def _check_finite(op: str, value: np.ndarray):
    if not np.all(np.isfinite(value)):
        raise NumericError(f"{op} produced non-finite values")


def lift(*operands: ArrayLike) -> Tuple[Tensor, ...]:
    """Put every operand on one tape, wrapping plain values as constants."""
    tape = None
    for operand in operands:
        if isinstance(operand, Tensor):
            if tape is None:
                tape = operand.tape
            elif operand.tape is not tape:
                raise GsnError("operands belong to different tapes")
    if tape is None:
        tape = Tape()
    return tuple(o if isinstance(o, Tensor) else tape.constant(o) for o in operands)


def _elementwise_shape(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    if a.shape == b.shape:
        return a.shape
    if a.value.size == 1 and a.ndim == 0:
        return b.shape
    if b.value.size == 1 and b.ndim == 0:
        return a.shape
    raise ShapeError(op, a.shape, b.shape)


def _reduce_to(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.asarray(grad.sum()).reshape(shape)


def _unary(op: str, x: ArrayLike, fn: Callable[[np.ndarray], np.ndarray],
           dfn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Tensor:
    (x,) = lift(x)
    xv = x.value
    out = fn(xv)
    return x.tape.record(op, (x,), out, lambda g: (g * dfn(xv, out),))


# =============================================================================
# Primitives
# =============================================================================

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = lift(a, b)
    _elementwise_shape("add", a, b)
    sa, sb = a.shape, b.shape
    return a.tape.record("add", (a, b), a.value + b.value,
                         lambda g: (_reduce_to(g, sa), _reduce_to(g, sb)))


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = lift(a, b)
    _elementwise_shape("subtract", a, b)
    sa, sb = a.shape, b.shape
    return a.tape.record("subtract", (a, b), a.value - b.value,
                         lambda g: (_reduce_to(g, sa), _reduce_to(-g, sb)))


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = lift(a, b)
    _elementwise_shape("multiply", a, b)
    av, bv = a.value, b.value
    return a.tape.record("multiply", (a, b), av * bv,
                         lambda g: (_reduce_to(g * bv, av.shape), _reduce_to(g * av, bv.shape)))


def neg(x: ArrayLike) -> Tensor:
    (x,) = lift(x)
    return x.tape.record("negate", (x,), -x.value, lambda g: (-g,))


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = lift(a, b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    av, bv = a.value, b.value
    return a.tape.record("matmul", (a, b), av @ bv, lambda g: (g @ bv.T, av.T @ g))


def transpose(x: ArrayLike) -> Tensor:
    (x,) = lift(x)
    if x.ndim != 2:
        raise ShapeError("transpose", x.shape)
    return x.tape.record("transpose", (x,), x.value.T.copy(), lambda g: (g.T,))


def tanh(x: ArrayLike) -> Tensor:
    return _unary("tanh", x, np.tanh, lambda _, y: 1.0 - y * y)


def sigmoid(x: ArrayLike) -> Tensor:
    return _unary("sigmoid", x, expit, lambda _, y: y * (1.0 - y))


def softplus(x: ArrayLike) -> Tensor:
    """ln(1 + e^x) without overflow."""
    return _unary("softplus", x, lambda v: np.logaddexp(0.0, v), lambda v, _: expit(v))


def exp(x: ArrayLike) -> Tensor:
    return _unary("exp", x, np.exp, lambda _, y: y)


def log(x: ArrayLike) -> Tensor:
    (x,) = lift(x)
    if np.any(x.value <= 0.0):
        raise DomainError("log of non-positive input")
    return _unary("log", x, np.log, lambda v, _: 1.0 / v)


def absolute(x: ArrayLike) -> Tensor:
    return _unary("abs", x, np.abs, lambda v, _: np.sign(v))


def relu(x: ArrayLike) -> Tensor:
    # subgradient at 0 is 0
    return _unary("relu", x, lambda v: np.maximum(v, 0.0), lambda v, _: (v > 0.0).astype(np.float64))


def square(x: ArrayLike) -> Tensor:
    return _unary("square", x, np.square, lambda v, _: 2.0 * v)


def sum(x: ArrayLike, axis: Optional[int] = None) -> Tensor:  # noqa: A001
    (x,) = lift(x)
    shape = x.shape
    out = np.asarray(x.value.sum(axis=axis))

    def vjp(g: np.ndarray):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return x.tape.record("sum", (x,), out, vjp)


def mean(x: ArrayLike, axis: Optional[int] = None) -> Tensor:
    (x,) = lift(x)
    count = x.value.size if axis is None else x.shape[axis]
    if count == 0:
        raise ShapeError("mean (empty)", x.shape)
    return mul(sum(x, axis=axis), 1.0 / count)


def add_rowvec(m: ArrayLike, v: ArrayLike) -> Tensor:
    """Add a length-k vector to every row of an n×k matrix."""
    m, v = lift(m, v)
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ShapeError("add_rowvec", m.shape, v.shape)
    return m.tape.record("add_rowvec", (m, v), m.value + v.value, lambda g: (g, g.sum(axis=0)))


def columns(x: ArrayLike, start: int, stop: int) -> Tensor:
    """Column slice [start, stop) of a matrix."""
    (x,) = lift(x)
    if x.ndim != 2 or not 0 <= start <= stop <= x.shape[1]:
        raise ShapeError(f"columns[{start}:{stop}]", x.shape)
    shape = x.shape

    def vjp(g: np.ndarray):
        full = np.zeros(shape)
        full[:, start:stop] = g
        return (full,)

    return x.tape.record("columns", (x,), x.value[:, start:stop].copy(), vjp)


def concat_rows(parts: Sequence[ArrayLike]) -> Tensor:
    """Stack matrices with equal column counts on top of each other."""
    parts = lift(*parts)
    if not parts:
        raise ShapeError("concat_rows (no operands)")
    widths = {p.shape[1:] for p in parts}
    if len(widths) != 1 or any(p.ndim != 2 for p in parts):
        raise ShapeError("concat_rows", *(p.shape for p in parts))
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])

    def vjp(g: np.ndarray):
        return tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return parts[0].tape.record("concat_rows", parts, np.vstack([p.value for p in parts]), vjp)


def take_rows(x: ArrayLike, rows: Sequence[int]) -> Tensor:
    (x,) = lift(x)
    idx = np.asarray(rows, dtype=np.int64)
    shape = x.shape

    def vjp(g: np.ndarray):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return (full,)

    return x.tape.record("take_rows", (x,), x.value[idx].copy(), vjp)


# =============================================================================
# Finite-difference check
# =============================================================================

def _evaluate(f: Callable[..., Tensor], values: Sequence[np.ndarray]) -> float:
    tape = Tape()
    return f(*[tape.leaf(v) for v in values]).item()


def grad_check(f: Callable[..., Tensor], leaves: Sequence[ArrayLike], step: float = 1e-5) -> float:
    """
    Largest elementwise relative error between backward() and central
    finite differences. f receives one leaf Tensor per entry of `leaves`
    and must return a scalar Tensor on the same tape.
    """
    if step <= 0:
        raise DomainError("grad_check step must be positive")
    base = [_as_array(v) for v in leaves]

    tape = Tape()
    handles = [tape.leaf(v) for v in base]
    grads = tape.backward(f(*handles))

    worst = 0.0
    for i, value in enumerate(base):
        analytic = grads[handles[i]]
        for idx in np.ndindex(value.shape):
            shifted = [v.copy() for v in base]
            shifted[i][idx] = value[idx] + step
            upper = _evaluate(f, shifted)
            shifted[i][idx] = value[idx] - step
            lower = _evaluate(f, shifted)
            numeric = (upper - lower) / (2.0 * step)
            a = float(analytic[idx])
            worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), 1e-8))
    return worst
