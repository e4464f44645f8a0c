"""Reverse-mode automatic differentiation on numpy buffers.

Small tape engine: each ``Tensor`` records its parents and a closure that
scatters the upstream gradient back to them; ``backward`` walks the graph in
reverse topological order. Every primitive checks its forward output for
non-finite values and raises ``NumericError`` naming itself.

Nondifferentiable points (relu and clip kinks, norm at zero, nearest-neighbor
ties recorded by callers) can be watched with ``watch_kinks`` so gradient
checks skip the affected coordinates.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ShapeMismatchError

KINK_ATOL = 1e-4  # proximity to a kink that taints a finite-difference probe

_kink_log: list[str] | None = None


@contextmanager
def watch_kinks():
    """Collect kink-proximity events raised during forward passes."""
    global _kink_log
    prev = _kink_log
    _kink_log = []
    try:
        yield _kink_log
    finally:
        _kink_log = prev


def note_kink(tag: str) -> None:
    if _kink_log is not None:
        _kink_log.append(tag)


class Tensor:
    """Node in the computation graph: a float64 array plus backward hooks."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backprop")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backprop=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backprop = _backprop

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        """Backpropagate from a scalar output through the whole graph."""
        if self.data.size != 1:
            raise ShapeMismatchError("backward requires a scalar output")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backprop is not None and node.grad is not None:
                node._backprop(node.grad)

    # convenience arithmetic ------------------------------------------------
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
        return mul(self, -1.0)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(op: str, data, parents, backprop) -> Tensor:
    data = np.asarray(data, dtype=np.float64)
    if not np.isfinite(data).all():
        raise NumericError(f"non-finite result in {op}")
    needs = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=needs,
                  _parents=tuple(parents) if needs else (),
                  _backprop=backprop if needs else None)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcasted gradient back down to the original shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backprop(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _result("add", a.data + b.data, (a, b), backprop)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backprop(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.data.shape))

    return _result("sub", a.data - b.data, (a, b), backprop)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backprop(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _result("mul", a.data * b.data, (a, b), backprop)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backprop(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _result("div", a.data / b.data, (a, b), backprop)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatchError(
            f"matmul shapes {a.data.shape} x {b.data.shape} are incompatible")

    def backprop(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _result("matmul", a.data @ b.data, (a, b), backprop)


def transpose(a):
    a = as_tensor(a)

    def backprop(g):
        if a.requires_grad:
            a._accumulate(g.T)

    return _result("transpose", a.data.T, (a,), backprop)


def reshape(a, shape):
    a = as_tensor(a)

    def backprop(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.data.shape))

    return _result("reshape", a.data.reshape(shape), (a,), backprop)


def relu(a):
    a = as_tensor(a)
    if _kink_log is not None and np.any(np.abs(a.data) <= KINK_ATOL):
        note_kink("relu")
    mask = a.data > 0

    def backprop(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    return _result("relu", np.where(mask, a.data, 0.0), (a,), backprop)


def softplus(a):
    a = as_tensor(a)
    out = np.logaddexp(0.0, a.data)

    def backprop(g):
        if a.requires_grad:
            a._accumulate(g * _sigmoid(a.data))

    return _result("softplus", out, (a,), backprop)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a):
    a = as_tensor(a)
    s = _sigmoid(np.asarray(a.data))

    def backprop(g):
        if a.requires_grad:
            a._accumulate(g * s * (1.0 - s))

    return _result("sigmoid", s, (a,), backprop)


def column_softmax(a):
    """Softmax over axis 0; every column of the result sums to 1."""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeMismatchError("column_softmax expects a 2-d tensor")
    z = a.data - a.data.max(axis=0, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=0, keepdims=True)

    def backprop(g):
        if a.requires_grad:
            a._accumulate(s * (g - (g * s).sum(axis=0, keepdims=True)))

    return _result("column_softmax", s, (a,), backprop)


def row_sum(a):
    """Sum along axis 1 of a 2-d tensor."""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeMismatchError("row_sum expects a 2-d tensor")

    def backprop(g):
        if a.requires_grad:
            a._accumulate(np.repeat(g[:, None], a.data.shape[1], axis=1))

    return _result("row_sum", a.data.sum(axis=1), (a,), backprop)


def sum_all(a):
    a = as_tensor(a)

    def backprop(g):
        if a.requires_grad:
            a._accumulate(np.full_like(a.data, float(g)))

    return _result("sum", a.data.sum(), (a,), backprop)


def mean(a):
    a = as_tensor(a)
    n = a.data.size

    def backprop(g):
        if a.requires_grad:
            a._accumulate(np.full_like(a.data, float(g) / n))

    return _result("mean", a.data.mean(), (a,), backprop)


def row_norm(a):
    """Euclidean norm of each row of a 2-d tensor."""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeMismatchError("row_norm expects a 2-d tensor")
    n = np.sqrt((a.data * a.data).sum(axis=1))
    if _kink_log is not None and np.any(n <= KINK_ATOL):
        note_kink("row_norm")
    safe = np.where(n > 0, n, 1.0)

    def backprop(g):
        if a.requires_grad:
            a._accumulate((g / safe)[:, None] * a.data)

    return _result("row_norm", n, (a,), backprop)


def dot(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape or a.data.ndim != 1:
        raise ShapeMismatchError("dot expects two equal-length vectors")

    def backprop(g):
        if a.requires_grad:
            a._accumulate(g * b.data)
        if b.requires_grad:
            b._accumulate(g * a.data)

    return _result("dot", a.data @ b.data, (a, b), backprop)


def gather(a, indices):
    """Select rows by a fixed index array (indices are constants)."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.int64)

    def backprop(g):
        if a.requires_grad:
            acc = np.zeros_like(a.data)
            np.add.at(acc, idx, g)
            a._accumulate(acc)

    return _result("gather", a.data[idx], (a,), backprop)


def concat(tensors, axis: int = 0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backprop(g):
        for t, s, e in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(s, e)
                t._accumulate(g[tuple(sl)])

    return _result("concat", np.concatenate([t.data for t in tensors], axis=axis),
                   tuple(tensors), backprop)


def clip_min(a, floor: float):
    """Elementwise max(a, floor); gradient passes only above the floor."""
    a = as_tensor(a)
    if _kink_log is not None and np.any(np.abs(a.data - floor) <= KINK_ATOL):
        note_kink("clip_min")
    mask = a.data > floor

    def backprop(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    return _result("clip_min", np.where(mask, a.data, floor), (a,), backprop)


def clamp(a, lo: float, hi: float):
    """Clamp into [lo, hi]; gradient passes only strictly inside."""
    a = as_tensor(a)
    if _kink_log is not None and np.any(
        (np.abs(a.data - lo) <= KINK_ATOL) | (np.abs(a.data - hi) <= KINK_ATOL)
    ):
        note_kink("clamp")
    mask = (a.data > lo) & (a.data < hi)

    def backprop(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    return _result("clamp", np.clip(a.data, lo, hi), (a,), backprop)


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

@dataclass
class GradCheckResult:
    max_rel_error: float
    n_checked: int
    skipped: list[int]  # flat coordinate indices adjacent to a kink


def grad_check(f, x: np.ndarray, eps: float = 1e-5) -> GradCheckResult:
    """Compare reverse-mode gradients of a scalar function against central
    finite differences, coordinate by coordinate.

    ``f`` maps a Tensor to a scalar Tensor. Coordinates whose perturbed
    forward passes come within ``KINK_ATOL`` of a kink are skipped and
    reported. Relative errors carry an absolute floor of 1e-8.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    x = np.asarray(x, dtype=np.float64)
    xt = Tensor(x.copy(), requires_grad=True)
    out = f(xt)
    out.backward()
    analytic = xt.grad.reshape(-1).copy() if xt.grad is not None else np.zeros(x.size)

    max_err = 0.0
    skipped: list[int] = []
    n_checked = 0
    flat = x.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        with watch_kinks() as events:
            flat[i] = orig + eps
            hi = float(f(Tensor(x.copy())).data)
            flat[i] = orig - eps
            lo = float(f(Tensor(x.copy())).data)
            flat[i] = orig
        if events:
            skipped.append(i)
            continue
        fd = (hi - lo) / (2.0 * eps)
        err = abs(fd - analytic[i]) / max(1e-8, abs(fd), abs(analytic[i]))
        max_err = max(max_err, err)
        n_checked += 1
    return GradCheckResult(max_err, n_checked, skipped)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

class Adam:
    """Adam updates for a list of parameter Tensors."""

    def __init__(self, params: list[Tensor], lr: float = 0.01,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in params]
        self._v = [np.zeros_like(p.data) for p in params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            g = p.grad
            m += (1 - b1) * (g - m)
            v += (1 - b2) * (g * g - v)
            mhat = m / (1 - b1**self.t)
            vhat = v / (1 - b2**self.t)
            p.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
