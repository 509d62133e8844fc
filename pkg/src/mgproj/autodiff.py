"""Minimal reverse-mode automatic differentiation on float64 ndarrays.

A ``Tape`` records operations define-by-run.  Nodes (``Var``) are appended in
creation order, which is a valid topological order, so the backward sweep is
a single reverse walk over the record.  Only the operations this package
actually uses are provided; gradients are verified against central finite
differences (``grad_check``).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import linalg
from .errors import NonFinite, ShapeError


def _as_array(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape``, undoing numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


class Parameter:
    """A float64 array with an accumulated gradient of the same shape."""

    __slots__ = ("value", "grad", "trainable", "name")

    def __init__(self, value, trainable: bool = True, name: str | None = None):
        self.value = _as_array(value).copy()
        self.grad = np.zeros_like(self.value)
        self.trainable = trainable
        self.name = name

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Parameter(name={self.name!r}, shape={self.value.shape}, trainable={self.trainable})"


class Var:
    """A node on a tape: a value plus the links needed for the reverse sweep."""

    __slots__ = ("tape", "value", "grad", "_inputs", "_vjps")

    def __init__(self, tape: "Tape", value: np.ndarray, inputs=(), vjps=()):
        self.tape = tape
        self.value = value
        self.grad: np.ndarray | None = None
        self._inputs = inputs
        self._vjps = vjps

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    # operator sugar; plain numbers and arrays are promoted to constants
    def __add__(self, other):
        return add(self, _promote(self.tape, other))

    def __radd__(self, other):
        return add(_promote(self.tape, other), self)

    def __sub__(self, other):
        return sub(self, _promote(self.tape, other))

    def __rsub__(self, other):
        return sub(_promote(self.tape, other), self)

    def __mul__(self, other):
        return mul(self, _promote(self.tape, other))

    def __rmul__(self, other):
        return mul(_promote(self.tape, other), self)

    def __truediv__(self, other):
        return div(self, _promote(self.tape, other))

    def __rtruediv__(self, other):
        return div(_promote(self.tape, other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _promote(self.tape, other))

    @property
    def T(self):
        return transpose_last(self)

    def __repr__(self) -> str:
        return f"Var(shape={self.value.shape})"


class Tape:
    """Define-by-run record of one forward pass."""

    def __init__(self):
        self._nodes: list[Var] = []
        self._leaves: dict[int, tuple[Parameter, Var]] = {}

    def _node(self, value: np.ndarray, inputs=(), vjps=()) -> Var:
        v = Var(self, value, inputs, vjps)
        self._nodes.append(v)
        return v

    def watch(self, param: Parameter) -> Var:
        """Leaf node for ``param``; repeated calls return the same node."""
        hit = self._leaves.get(id(param))
        if hit is not None:
            return hit[1]
        v = self._node(param.value)
        self._leaves[id(param)] = (param, v)
        return v

    def constant(self, value) -> Var:
        return self._node(_as_array(value))

    def __len__(self) -> int:
        return len(self._nodes)


def _promote(tape: Tape, x) -> Var:
    return x if isinstance(x, Var) else tape.constant(x)


# ---------------------------------------------------------------------------
# primitive operations


def add(a: Var, b: Var) -> Var:
    value = a.value + b.value
    return a.tape._node(
        value,
        (a, b),
        (lambda g: _unbroadcast(g, a.value.shape), lambda g: _unbroadcast(g, b.value.shape)),
    )


def sub(a: Var, b: Var) -> Var:
    value = a.value - b.value
    return a.tape._node(
        value,
        (a, b),
        (lambda g: _unbroadcast(g, a.value.shape), lambda g: _unbroadcast(-g, b.value.shape)),
    )


def neg(a: Var) -> Var:
    return a.tape._node(-a.value, (a,), (lambda g: -g,))


def mul(a: Var, b: Var) -> Var:
    value = a.value * b.value
    return a.tape._node(
        value,
        (a, b),
        (
            lambda g: _unbroadcast(g * b.value, a.value.shape),
            lambda g: _unbroadcast(g * a.value, b.value.shape),
        ),
    )


def div(a: Var, b: Var) -> Var:
    value = a.value / b.value
    return a.tape._node(
        value,
        (a, b),
        (
            lambda g: _unbroadcast(g / b.value, a.value.shape),
            lambda g: _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape),
        ),
    )


def _swap_last(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, -1, -2)


def matmul(a: Var, b: Var) -> Var:
    if a.value.ndim < 2 or b.value.ndim < 2:
        raise ShapeError("matmul operands must be at least 2-D")
    try:
        value = a.value @ b.value
    except ValueError as exc:
        raise ShapeError(
            f"matmul shapes {a.value.shape} and {b.value.shape} do not conform"
        ) from exc
    return a.tape._node(
        value,
        (a, b),
        (
            lambda g: _unbroadcast(g @ _swap_last(b.value), a.value.shape),
            lambda g: _unbroadcast(_swap_last(a.value) @ g, b.value.shape),
        ),
    )


def transpose_last(a: Var) -> Var:
    if a.value.ndim < 2:
        raise ShapeError("transpose_last needs at least 2 dimensions")
    return a.tape._node(_swap_last(a.value), (a,), (lambda g: _swap_last(g),))


def reshape(a: Var, shape: tuple[int, ...]) -> Var:
    return a.tape._node(
        a.value.reshape(shape), (a,), (lambda g: g.reshape(a.value.shape),)
    )


def tanh(a: Var) -> Var:
    y = np.tanh(a.value)
    return a.tape._node(y, (a,), (lambda g: g * (1.0 - y * y),))


def exp(a: Var) -> Var:
    y = np.exp(a.value)
    return a.tape._node(y, (a,), (lambda g: g * y,))


def log(a: Var) -> Var:
    return a.tape._node(np.log(a.value), (a,), (lambda g: g / a.value,))


def sqrt(a: Var) -> Var:
    y = np.sqrt(a.value)
    return a.tape._node(y, (a,), (lambda g: g / (2.0 * y),))


def sigmoid(a: Var) -> Var:
    x = a.value
    y = np.where(x >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return a.tape._node(y, (a,), (lambda g: g * y * (1.0 - y),))


def vsum(a: Var, axis: int | None = None, keepdims: bool = False) -> Var:
    value = a.value.sum(axis=axis, keepdims=keepdims)

    def vjp(g: np.ndarray) -> np.ndarray:
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(g, axis)
        return np.broadcast_to(gg, a.value.shape)

    return a.tape._node(_as_array(value), (a,), (vjp,))


def vmean(a: Var, axis: int | None = None, keepdims: bool = False) -> Var:
    count = a.value.size if axis is None else a.value.shape[axis]
    value = a.value.mean(axis=axis, keepdims=keepdims)

    def vjp(g: np.ndarray) -> np.ndarray:
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(g, axis)
        return np.broadcast_to(gg, a.value.shape) / count

    return a.tape._node(_as_array(value), (a,), (vjp,))


def take_rows(table: Var, ids: np.ndarray) -> Var:
    """Row lookup ``table[ids]``; the gradient scatter-adds back into the table."""
    idx = np.asarray(ids)
    value = table.value[idx]

    def vjp(g: np.ndarray) -> np.ndarray:
        out = np.zeros_like(table.value)
        np.add.at(out, idx.reshape(-1), g.reshape(-1, table.value.shape[-1]))
        return out

    return table.tape._node(value, (table,), (vjp,))


def take_along_last(a: Var, idx: np.ndarray) -> Var:
    """Pick ``a[i, idx[i]]`` per row of a 2-D node; returns shape (n, 1)."""
    if a.value.ndim != 2:
        raise ShapeError("take_along_last expects a 2-D node")
    rows = np.arange(a.value.shape[0])
    cols = np.asarray(idx).reshape(-1)
    value = a.value[rows, cols][:, None]

    def vjp(g: np.ndarray) -> np.ndarray:
        out = np.zeros_like(a.value)
        np.add.at(out, (rows, cols), g[:, 0])
        return out

    return a.tape._node(value, (a,), (vjp,))


def gram_solve(a: Var, b: Var) -> Var:
    """Differentiable solve of ``a u = b`` for square ``a`` and columns ``b``."""
    u = linalg.solve_gram(a.value, 0.0, b.value)

    def vjp_a(g: np.ndarray) -> np.ndarray:
        return -linalg.solve_gram(a.value.T, 0.0, g) @ u.T

    def vjp_b(g: np.ndarray) -> np.ndarray:
        return linalg.solve_gram(a.value.T, 0.0, g)

    return a.tape._node(u, (a, b), (vjp_a, vjp_b))


def qr(a: Var) -> tuple[Var, Var]:
    """Differentiable thin QR.  Returns (q, r) nodes.

    Backward uses the standard thin-QR adjoint
        dA = (dQ + Q copyltu(M)) R^{-T},  M = R dR^T - dQ^T Q,
    where copyltu mirrors the lower triangle onto the upper one; the formula
    is split between the two output nodes (it is linear in dQ and dR) and
    verified by finite differences in the test suite.
    """
    q, r = linalg.qr_thin(a.value)

    def _copyltu(m: np.ndarray) -> np.ndarray:
        return np.tril(m) + np.tril(m, -1).T

    def _times_r_inv_t(x: np.ndarray) -> np.ndarray:
        return linalg.solve_upper(r, x.T).T

    def vjp_q(g: np.ndarray) -> np.ndarray:
        return _times_r_inv_t(g + q @ _copyltu(-(g.T @ q)))

    def vjp_r(g: np.ndarray) -> np.ndarray:
        return _times_r_inv_t(q @ _copyltu(r @ g.T))

    tape = a.tape
    qv = tape._node(q, (a,), (vjp_q,))
    rv = tape._node(r, (a,), (vjp_r,))
    return qv, rv


# ---------------------------------------------------------------------------
# reverse sweep


def backward(tape: Tape, loss: Var) -> None:
    """Accumulate d(loss)/d(parameter) into every watched Parameter.

    ``loss`` must be a scalar node on ``tape``.  Node gradients are rebuilt
    from scratch on each call; Parameter gradients accumulate across calls
    until ``zero_grad``.
    """
    if loss.value.shape != ():
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.value.shape}")
    if loss.tape is not tape:
        raise ValueError("loss does not belong to the given tape")
    for node in tape._nodes:
        node.grad = None
    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(tape._nodes):
        g = node.grad
        if g is None:
            continue
        for inp, vjp in zip(node._inputs, node._vjps):
            contrib = vjp(g)
            inp.grad = contrib if inp.grad is None else inp.grad + contrib
    for param, leaf in tape._leaves.values():
        if leaf.grad is not None:
            param.grad += leaf.grad


def grad_check(
    f: Callable[[], Var], params: Sequence[Parameter], h: float = 1e-6
) -> float:
    """Compare reverse-mode gradients of ``f`` against central differences.

    ``f`` must rebuild its tape on every call and be deterministic.  Returns
    the maximum over all parameter entries of
    ``|g_auto - g_fd| / max(1, |g_fd|)``.
    """
    if not 1e-8 <= h <= 1e-4:
        raise ValueError(f"step h must lie in [1e-8, 1e-4], got {h}")
    saved = [p.grad.copy() for p in params]
    for p in params:
        p.zero_grad()
    loss = f()
    if not np.isfinite(loss.value):
        raise NonFinite("grad_check objective evaluated to a non-finite value")
    backward(loss.tape, loss)
    autos = [p.grad.copy() for p in params]
    for p, s in zip(params, saved):
        p.grad[...] = s

    max_err = 0.0
    for p, ga in zip(params, autos):
        flat = p.value.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f().value)
            flat[i] = orig - h
            fm = float(f().value)
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NonFinite("grad_check objective evaluated to a non-finite value")
            gfd = (fp - fm) / (2.0 * h)
            err = abs(gflat[i] - gfd) / max(1.0, abs(gfd))
            if err > max_err:
                max_err = err
    return max_err
