"""Minimal reverse-mode differentiation over dense float64 matrices.

Operations run eagerly. Inside ``with record() as tape:`` every operation
whose inputs need gradients is appended to ``tape``; ``backward(loss)`` then
walks the tape once in reverse and accumulates gradients into the leaves.
Outside a recording block operations only compute values.

Broadcasting is limited to scalars, (1, C) row vectors and (R, 1) column
vectors.
"""
from __future__ import annotations

import contextlib
import contextvars
from typing import Callable, Iterable

import numpy as np

from . import kernels


class NonFiniteError(FloatingPointError):
    """An operation produced NaN or Inf."""


class TapeError(RuntimeError):
    pass


_ACTIVE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar("infoadv_tape", default=None)


class Tensor:
    """A 2-D value with an optional gradient slot."""

    __slots__ = ("value", "grad", "requires_grad", "name", "_parents", "_backward", "_tape")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        v = np.array(value, dtype=np.float64)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        elif v.ndim == 1:
            v = v.reshape(-1, 1)
        elif v.ndim != 2:
            raise ValueError(f"tensors are 2-D, got shape {v.shape}")
        self.value = v
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple = ()
        self._backward: Callable | None = None
        self._tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value[0, 0])

    def numpy(self) -> np.ndarray:
        return self.value

    def detach(self) -> "Tensor":
        return Tensor(self.value)

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


class Tape:
    """Ordered record of differentiable operations (inputs always precede outputs)."""

    def __init__(self):
        self.nodes: list[Tensor] = []
        self.consumed = False

    def __len__(self):
        return len(self.nodes)


@contextlib.contextmanager
def record():
    """Activate a fresh tape for the enclosed forward pass."""
    tape = Tape()
    token = _ACTIVE.set(tape)
    try:
        yield tape
    finally:
        _ACTIVE.reset(token)


@contextlib.contextmanager
def no_record():
    token = _ACTIVE.set(None)
    try:
        yield
    finally:
        _ACTIVE.reset(token)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check(value: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(f"non-finite value produced by {op}")
    return value


def _make(value: np.ndarray, parents: tuple, backward: Callable, op: str) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.value = _check(value, op)
    out.grad = None
    out.name = op
    tape = _ACTIVE.get()
    out.requires_grad = tape is not None and any(p.requires_grad for p in parents)
    out._tape = None
    if out.requires_grad:
        out._parents = parents
        out._backward = backward
        out._tape = tape
        tape.nodes.append(out)
    else:
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _bshape(a: Tensor, b: Tensor, op: str) -> None:
    (r1, c1), (r2, c2) = a.shape, b.shape
    if not ((r1 == r2 or r1 == 1 or r2 == 1) and (c1 == c2 or c1 == 1 or c2 == 1)):
        raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.value.T)
        if b.requires_grad:
            b._accumulate(a.value.T @ g)

    return _make(a.value @ b.value, (a, b), backward, "matmul")


def transpose(a: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(g.T)

    return _make(np.ascontiguousarray(a.value.T), (a,), backward, "transpose")


def spmm(s, x: Tensor, values: Tensor | None = None) -> Tensor:
    """Sparse-dense product ``S @ x``.

    ``s`` is a :class:`~infoadv.graph.SparseMatrix`. When ``values`` (nnz x 1)
    is given it replaces ``s.data`` and receives gradients.
    """
    x = as_tensor(x)
    if s.shape[1] != x.shape[0]:
        raise ValueError(f"spmm: incompatible shapes {s.shape} and {x.shape}")
    if values is not None and values.shape != (s.nnz, 1):
        raise ValueError(f"spmm: values must have shape ({s.nnz}, 1), got {values.shape}")
    data = s.data if values is None else values.value[:, 0]
    out = kernels.spmm(s.indptr, s.indices, data, x.value)
    parents = (x,) if values is None else (x, values)

    def backward(g):
        if x.requires_grad:
            indptr_t, indices_t, perm = s.transpose_struct()
            x._accumulate(kernels.spmm(indptr_t, indices_t, data[perm], g))
        if values is not None and values.requires_grad:
            values._accumulate(kernels.sddmm(s.indptr, s.indices, g, x.value)[:, None])

    return _make(out, parents, backward, "spmm")


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _bshape(a, b, "add")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(a.value + b.value, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _bshape(a, b, "sub")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return _make(a.value - b.value, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    """Elementwise product."""
    a, b = as_tensor(a), as_tensor(b)
    _bshape(a, b, "mul")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.value, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.value, b.shape))

    return _make(a.value * b.value, (a, b), backward, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward(g):
        a._accumulate(g * c)

    return _make(a.value * c, (a,), backward, "scale")


def add_scalar(a: Tensor, c: float) -> Tensor:
    def backward(g):
        a._accumulate(g)

    return _make(a.value + float(c), (a,), backward, "add_scalar")


def pow_scalar(a: Tensor, p: float) -> Tensor:
    p = float(p)
    v = a.value

    def backward(g):
        a._accumulate(g * p * v ** (p - 1.0))

    return _make(v**p, (a,), backward, "pow_scalar")


def relu(a: Tensor) -> Tensor:
    pos = a.value > 0

    def backward(g):
        a._accumulate(g * pos)

    return _make(np.where(pos, a.value, 0.0), (a,), backward, "relu")


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    fac = np.where(a.value > 0, 1.0, slope)

    def backward(g):
        a._accumulate(g * fac)

    return _make(a.value * fac, (a,), backward, "leaky_relu")


def prelu(a: Tensor, slope: Tensor) -> Tensor:
    """Parametric ReLU with a learnable (1, 1) or (1, C) slope."""
    slope = as_tensor(slope)
    _bshape(a, slope, "prelu")
    pos = a.value > 0
    out = np.where(pos, a.value, slope.value * a.value)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * np.where(pos, 1.0, slope.value))
        if slope.requires_grad:
            slope._accumulate(_unbroadcast(np.where(pos, 0.0, g * a.value), slope.shape))

    return _make(out, (a, slope), backward, "prelu")


def elu(a: Tensor) -> Tensor:
    pos = a.value > 0
    neg_exp = np.exp(np.minimum(a.value, 0.0))
    out = np.where(pos, a.value, neg_exp - 1.0)

    def backward(g):
        a._accumulate(g * np.where(pos, 1.0, neg_exp))

    return _make(out, (a,), backward, "elu")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid(a.value)

    def backward(g):
        a._accumulate(g * s * (1.0 - s))

    return _make(s, (a,), backward, "sigmoid")


def softplus(a: Tensor) -> Tensor:
    x = a.value
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))

    def backward(g):
        a._accumulate(g * _sigmoid(x))

    return _make(out, (a,), backward, "softplus")


def log(a: Tensor) -> Tensor:
    if np.any(a.value <= 0):
        raise NonFiniteError("log of non-positive value")

    def backward(g):
        a._accumulate(g / a.value)

    return _make(np.log(a.value), (a,), backward, "log")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.value)

    def backward(g):
        a._accumulate(g * out)

    return _make(out, (a,), backward, "exp")


def square(a: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(2.0 * g * a.value)

    return _make(a.value * a.value, (a,), backward, "square")


def sqrt(a: Tensor) -> Tensor:
    if np.any(a.value <= 0):
        raise NonFiniteError("sqrt of non-positive value")
    out = np.sqrt(a.value)

    def backward(g):
        a._accumulate(g * 0.5 / out)

    return _make(out, (a,), backward, "sqrt")


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    inside = (a.value >= lo) & (a.value <= hi)

    def backward(g):
        a._accumulate(g * inside)

    return _make(np.clip(a.value, lo, hi), (a,), backward, "clamp")


def row_normalize_l2(a: Tensor, floor: float = 1e-12) -> Tensor:
    """Divide every row by max(||row||, floor)."""
    x = a.value
    norm = np.sqrt(np.sum(x * x, axis=1, keepdims=True))
    active = norm > floor
    denom = np.where(active, norm, floor)
    y = x / denom

    def backward(g):
        proj = np.sum(g * y, axis=1, keepdims=True)
        a._accumulate(np.where(active, (g - y * proj) / denom, g / denom))

    return _make(y, (a,), backward, "row_normalize_l2")


def concat_cols(parts: Iterable[Tensor]) -> Tensor:
    parts = tuple(as_tensor(p) for p in parts)
    rows = {p.shape[0] for p in parts}
    if len(rows) != 1:
        raise ValueError(f"concat_cols: row counts differ {sorted(rows)}")
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])

    def backward(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            if p.requires_grad:
                p._accumulate(g[:, lo:hi])

    return _make(np.concatenate([p.value for p in parts], axis=1), parts, backward, "concat_cols")


def concat_rows(parts: Iterable[Tensor]) -> Tensor:
    parts = tuple(as_tensor(p) for p in parts)
    cols = {p.shape[1] for p in parts}
    if len(cols) != 1:
        raise ValueError(f"concat_rows: column counts differ {sorted(cols)}")
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])

    def backward(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            if p.requires_grad:
                p._accumulate(g[lo:hi])

    return _make(np.concatenate([p.value for p in parts], axis=0), parts, backward, "concat_rows")


def gather_rows(a: Tensor, index) -> Tensor:
    idx = np.asarray(index, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError("gather_rows: index must be 1-D")
    if len(idx) and (idx.min() < -a.shape[0] or idx.max() >= a.shape[0]):
        raise IndexError(f"gather_rows: index out of range for {a.shape[0]} rows")

    def backward(g):
        acc = np.zeros_like(a.value)
        np.add.at(acc, idx, g)
        a._accumulate(acc)

    return _make(a.value[idx], (a,), backward, "gather_rows")


def reduce_sum(a: Tensor, axis: int | None = None) -> Tensor:
    """Sum everything (-> 1x1), or along ``axis`` keeping 2-D shape."""
    shape = a.shape
    if axis is None:
        out = np.array([[a.value.sum()]])
    else:
        out = a.value.sum(axis=axis, keepdims=True)

    def backward(g):
        a._accumulate(np.broadcast_to(g, shape))

    return _make(out, (a,), backward, "reduce_sum")


def reduce_mean(a: Tensor, axis: int | None = None) -> Tensor:
    count = a.value.size if axis is None else a.shape[axis]
    return scale(reduce_sum(a, axis), 1.0 / count)


def logsumexp_rows(a: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Row-wise log-sum-exp (-> R x 1); entries where ``mask`` is False are excluded."""
    x = a.value
    if mask is None:
        mask = np.ones(x.shape, dtype=bool)
    xm = np.where(mask, x, -np.inf)
    m = xm.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(m)):
        raise ValueError("logsumexp_rows: a row has no unmasked entries")
    e = np.where(mask, np.exp(xm - m), 0.0)
    s = e.sum(axis=1, keepdims=True)
    out = m + np.log(s)
    soft = e / s

    def backward(g):
        a._accumulate(g * soft)

    return _make(out, (a,), backward, "logsumexp_rows")


def straight_through(hard: np.ndarray, soft: Tensor) -> Tensor:
    """Forward value ``hard``; gradient passes to ``soft`` unchanged."""
    hard = np.asarray(hard, dtype=np.float64).reshape(soft.shape)

    def backward(g):
        soft._accumulate(g)

    return _make(hard.copy(), (soft,), backward, "straight_through")


# ---------------------------------------------------------------------------
# Backward pass
# ---------------------------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf tensor."""
    if loss.shape != (1, 1):
        raise ValueError(f"backward needs a scalar (1, 1) loss, got shape {loss.shape}")
    tape = loss._tape
    if tape is None:
        if loss.requires_grad:
            loss._accumulate(np.ones((1, 1)))
            return
        raise TapeError("loss does not depend on any tensor requiring grad inside record()")
    if tape.consumed:
        raise TapeError("this computation record has already been consumed by backward()")
    tape.consumed = True
    loss.grad = np.ones((1, 1))
    for node in reversed(tape.nodes):
        if node.grad is not None:
            node._backward(node.grad)
            if node is not loss:
                node.grad = None
        node._parents = ()
        node._backward = None
    # drop the tape -> node references so intermediates are freed without waiting for the cycle collector
    tape.nodes = []


# ---------------------------------------------------------------------------
# Parameters, optimizer, gradient checking
# ---------------------------------------------------------------------------


class ParamStore:
    """Named trainable tensors with per-parameter optimizer state."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self.state: dict[str, dict] = {}

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise KeyError(f"parameter {name!r} already registered")
        t = Tensor(value, requires_grad=True, name=name)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def items(self):
        return self._params.items()

    def values(self):
        return self._params.values()

    def set(self, name: str, value) -> None:
        """Overwrite a parameter's value in place (shape must match)."""
        t = self._params[name]
        v = np.asarray(value, dtype=np.float64).reshape(t.shape)
        t.value[...] = v

    def set_trainable(self, flag: bool) -> None:
        for t in self._params.values():
            t.requires_grad = flag

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: t.value.copy() for k, t in self._params.items()}

    def merged(self, *others: "ParamStore") -> "ParamStore":
        out = ParamStore()
        for store in (self, *others):
            for k, t in store.items():
                if k in out._params:
                    raise KeyError(f"parameter {k!r} appears twice")
                out._params[k] = t
        return out


def adam_step(params: ParamStore, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, weight_decay: float = 0.0) -> None:
    """One Adam update; ``weight_decay`` adds ``wd * theta`` to the gradient (L2, as in common
    framework Adam implementations). Gradients are cleared afterwards."""
    if all(t.grad is None for t in params.values()):
        raise TapeError("adam_step called before backward(): no gradients populated")
    for name, t in params.items():
        if t.grad is None:
            continue
        st = params.state.setdefault(name, {"m": np.zeros_like(t.value), "v": np.zeros_like(t.value), "t": 0})
        st["t"] += 1
        g = t.grad + weight_decay * t.value if weight_decay else t.grad
        st["m"] = beta1 * st["m"] + (1.0 - beta1) * g
        st["v"] = beta2 * st["v"] + (1.0 - beta2) * g * g
        m_hat = st["m"] / (1.0 - beta1 ** st["t"])
        v_hat = st["v"] / (1.0 - beta2 ** st["t"])
        t.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
        t.grad = None


def grad_check(build_loss: Callable[[], Tensor], params: ParamStore, eps: float = 1e-4,
               tolerance: float | None = None) -> float:
    """Compare reverse-mode gradients against central differences.

    ``build_loss`` must rebuild the loss from the current values in ``params``
    with all randomness frozen. Returns the maximum relative error
    ``|a - b| / max(1e-8, |a| + |b|)`` over every parameter entry; raises
    ``AssertionError`` if ``tolerance`` is given and exceeded.
    """
    with no_record():
        f0 = build_loss().item()
        if build_loss().item() != f0:
            raise RuntimeError("grad_check: build_loss is not deterministic")
    params.zero_grad()
    with record():
        loss = build_loss()
    backward(loss)
    worst = 0.0
    with no_record():
        for name, t in params.items():
            analytic = np.zeros_like(t.value) if t.grad is None else t.grad.copy()
            flat = t.value.reshape(-1)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + eps
                f_plus = build_loss().item()
                flat[k] = orig - eps
                f_minus = build_loss().item()
                flat[k] = orig
                numeric = (f_plus - f_minus) / (2.0 * eps)
                a = analytic.reshape(-1)[k]
                err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
                worst = max(worst, err)
    params.zero_grad()
    if tolerance is not None and worst > tolerance:
        raise AssertionError(f"grad_check: max relative error {worst:.3e} exceeds {tolerance:.1e}")
    return worst
