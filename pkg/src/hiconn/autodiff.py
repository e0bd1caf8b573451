"""Dense float64 tensors with tape-based reverse-mode differentiation.

The engine is intentionally small: row-major float64 arrays, same-shape or
scalar broadcasting only, and a flat tape replayed in reverse creation
order (creation order is already a topological order of the computation
graph). Every learnable computation in the package composes from the
operations in this module, so gradient correctness is checked centrally
against finite differences in the test suite.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError

__all__ = [
    "Tensor",
    "Tape",
    "backward",
    "matmul",
    "transpose",
    "reshape",
    "add",
    "sub",
    "mul",
    "div",
    "scale",
    "sigmoid",
    "relu",
    "absval",
    "softmax_rows",
    "sum_axis",
    "mean_axis",
    "global_average_pool",
    "concat_rows",
    "gather_rows",
    "scatter_rows",
    "gather_cols",
    "soft_threshold",
    "cross_entropy_with_logits",
]

# Stack of currently recording tapes; ops record onto the innermost one.
_TAPES: list["Tape"] = []


class Tensor:
    """A dense float64 array, optionally participating in differentiation.

    Values are treated as immutable once the tensor has entered a tape;
    gradients accumulate in the separate ``grad`` buffer. Leaf parameters
    are the only tensors whose ``values`` a caller may overwrite, and only
    between tapes (the optimizer does exactly that).
    """

    __slots__ = ("values", "requires_grad", "grad")

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    @property
    def size(self):
        return self.values.size

    def item(self) -> float:
        if self.values.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.values.reshape(()))

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # Operator sugar; python numbers are treated as non-learnable constants.
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

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


class Tape:
    """Execution-ordered record of differentiable operations.

    Used as a context manager: operations performed inside the ``with``
    block are recorded when any operand requires gradients. Creation
    order guarantees every node's inputs precede it, so ``backward`` is a
    single reverse sweep with fan-out handled by accumulation. A tape is
    single-use and must never be shared between threads.
    """

    __slots__ = ("nodes",)

    def __init__(self):
        # each node: (output, inputs, backward_fn)
        self.nodes = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPES.pop()
        if popped is not self:
            raise ContractError("tape stack corrupted: exited a tape that is not innermost")
        return False

    def backward(self, loss: Tensor):
        backward(loss, self)


def backward(loss: Tensor, tape: Tape) -> None:
    """Accumulate gradients of a scalar loss into every tensor on the tape.

    Backward rules receive the output gradient and return one gradient per
    input (or None for inputs that do not require one). Accumulation is
    never in place, so rules may safely return views or shared buffers.
    """
    if loss.values.size != 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.shape}")
    loss.grad = np.ones_like(loss.values)
    for out, inputs, bw in reversed(tape.nodes):
        g = out.grad
        if g is None:
            # branch recorded but not reachable from this loss
            continue
        for t, gi in zip(inputs, bw(g)):
            if gi is not None and t.requires_grad:
                t.grad = gi if t.grad is None else t.grad + gi


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _record(out: Tensor, inputs, bw) -> Tensor:
    if _TAPES and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _TAPES[-1].nodes.append((out, inputs, bw))
    return out


def _binary_check(a: Tensor, b: Tensor, name: str) -> None:
    # broadcasting contract: identical shapes, or one side is a scalar
    if a.values.shape == b.values.shape:
        return
    if a.values.size == 1 or b.values.size == 1:
        return
    raise DimensionError(f"{name}: shapes {a.values.shape} and {b.values.shape} do not broadcast")


def _reduce_to(g: np.ndarray, shape) -> np.ndarray:
    # collapse an output gradient onto a scalar operand's shape
    if g.shape == shape:
        return g
    return np.asarray(g.sum(), dtype=np.float64).reshape(shape)


# ---------------------------------------------------------------------------
# linear algebra

def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise DimensionError(f"matmul needs 2-D operands, got {a.values.shape} and {b.values.shape}")
    if a.values.shape[1] != b.values.shape[0]:
        raise DimensionError(f"matmul: inner dimensions disagree for {a.values.shape} x {b.values.shape}")
    out = Tensor(a.values @ b.values)
    av, bv = a.values, b.values

    def bw(g):
        ga = g @ bv.T if a.requires_grad else None
        gb = av.T @ g if b.requires_grad else None
        return ga, gb

    return _record(out, (a, b), bw)


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.values.ndim != 2:
        raise DimensionError(f"transpose needs a 2-D operand, got {a.values.shape}")
    out = Tensor(a.values.T)

    def bw(g):
        return (g.T,)

    return _record(out, (a,), bw)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    if int(np.prod(shape)) != a.values.size:
        raise DimensionError(f"reshape: cannot view {a.values.shape} as {tuple(shape)}")
    out = Tensor(a.values.reshape(shape))
    old = a.values.shape

    def bw(g):
        return (g.reshape(old),)

    return _record(out, (a,), bw)


# ---------------------------------------------------------------------------
# elementwise

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_check(a, b, "add")
    out = Tensor(a.values + b.values)
    sa, sb = a.values.shape, b.values.shape

    def bw(g):
        ga = _reduce_to(g, sa) if a.requires_grad else None
        gb = _reduce_to(g, sb) if b.requires_grad else None
        return ga, gb

    return _record(out, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_check(a, b, "sub")
    out = Tensor(a.values - b.values)
    sa, sb = a.values.shape, b.values.shape

    def bw(g):
        ga = _reduce_to(g, sa) if a.requires_grad else None
        gb = -_reduce_to(g, sb) if b.requires_grad else None
        return ga, gb

    return _record(out, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_check(a, b, "mul")
    out = Tensor(a.values * b.values)
    av, bv = a.values, b.values

    def bw(g):
        ga = _reduce_to(g * bv, av.shape) if a.requires_grad else None
        gb = _reduce_to(g * av, bv.shape) if b.requires_grad else None
        return ga, gb

    return _record(out, (a, b), bw)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_check(a, b, "div")
    out = Tensor(a.values / b.values)
    av, bv = a.values, b.values

    def bw(g):
        ga = _reduce_to(g / bv, av.shape) if a.requires_grad else None
        gb = _reduce_to(-g * av / (bv * bv), bv.shape) if b.requires_grad else None
        return ga, gb

    return _record(out, (a, b), bw)


def scale(a, c: float) -> Tensor:
    """Multiply by a non-learnable python scalar."""
    a = _as_tensor(a)
    c = float(c)
    out = Tensor(a.values * c)

    def bw(g):
        return (g * c,)

    return _record(out, (a,), bw)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    v = a.values
    # piecewise form avoids exp overflow on large negative inputs
    y = np.empty_like(v)
    pos = v >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    y[~pos] = ev / (1.0 + ev)
    out = Tensor(y)

    def bw(g):
        return (g * y * (1.0 - y),)

    return _record(out, (a,), bw)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    v = a.values
    out = Tensor(np.maximum(v, 0.0))

    def bw(g):
        return (g * (v > 0.0),)

    return _record(out, (a,), bw)


def absval(a) -> Tensor:
    a = _as_tensor(a)
    v = a.values
    out = Tensor(np.abs(v))

    def bw(g):
        return (g * np.sign(v),)

    return _record(out, (a,), bw)


# ---------------------------------------------------------------------------
# softmax and reductions

def softmax_rows(a) -> Tensor:
    """Row-wise softmax of a 2-D tensor, guarded by per-row max subtraction."""
    a = _as_tensor(a)
    if a.values.ndim != 2:
        raise DimensionError(f"softmax_rows needs a 2-D operand, got {a.values.shape}")
    z = a.values - a.values.max(axis=1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=1, keepdims=True)
    out = Tensor(y)

    def bw(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        return (y * (g - dot),)

    return _record(out, (a,), bw)


def sum_axis(a, axis: int | None = None) -> Tensor:
    """Sum along one axis (dropping it), or over all entries when axis is None."""
    a = _as_tensor(a)
    shp = a.values.shape
    if axis is None:
        out = Tensor(a.values.sum())

        def bw(g):
            return (np.broadcast_to(g, shp),)

        return _record(out, (a,), bw)
    if not -a.values.ndim <= axis < a.values.ndim:
        raise DimensionError(f"sum_axis: axis {axis} invalid for shape {shp}")
    out = Tensor(a.values.sum(axis=axis))

    def bw(g):
        return (np.broadcast_to(np.expand_dims(g, axis), shp),)

    return _record(out, (a,), bw)


def mean_axis(a, axis: int) -> Tensor:
    """Mean along one axis, dropping it."""
    a = _as_tensor(a)
    shp = a.values.shape
    if not -a.values.ndim <= axis < a.values.ndim:
        raise DimensionError(f"mean_axis: axis {axis} invalid for shape {shp}")
    n = shp[axis]
    out = Tensor(a.values.mean(axis=axis))

    def bw(g):
        return (np.broadcast_to(np.expand_dims(g / n, axis), shp),)

    return _record(out, (a,), bw)


def global_average_pool(a) -> Tensor:
    """Column means of a 2-D tensor: m x n -> length-n vector."""
    a = _as_tensor(a)
    if a.values.ndim != 2:
        raise DimensionError(f"global_average_pool needs a 2-D operand, got {a.values.shape}")
    return mean_axis(a, 0)


# ---------------------------------------------------------------------------
# structural ops

def concat_rows(*tensors) -> Tensor:
    """Stack 2-D tensors with equal column counts along the row axis."""
    ts = [_as_tensor(t) for t in tensors]
    if not ts:
        raise ContractError("concat_rows needs at least one operand")
    cols = {t.values.shape[1] for t in ts if t.values.ndim == 2}
    if any(t.values.ndim != 2 for t in ts) or len(cols) != 1:
        raise DimensionError(
            "concat_rows: column counts differ: " + ", ".join(str(t.values.shape) for t in ts)
        )
    out = Tensor(np.concatenate([t.values for t in ts], axis=0))
    sizes = [t.values.shape[0] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        return tuple(
            g[offsets[i]:offsets[i + 1]] if t.requires_grad else None
            for i, t in enumerate(ts)
        )

    return _record(out, tuple(ts), bw)


def gather_rows(a, indices) -> Tensor:
    """Select rows of a 2-D tensor; backward scatter-adds into place."""
    a = _as_tensor(a)
    if a.values.ndim != 2:
        raise DimensionError(f"gather_rows needs a 2-D operand, got {a.values.shape}")
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise DimensionError("gather_rows: indices must be a flat sequence")
    out = Tensor(a.values[idx])
    shp = a.values.shape

    def bw(g):
        buf = np.zeros(shp)
        np.add.at(buf, idx, g)
        return (buf,)

    return _record(out, (a,), bw)


def scatter_rows(a, positions, n_rows: int) -> Tensor:
    """Place the rows of a 2-D tensor at given positions of an n_rows output.

    Unlisted output rows are zero. Positions must be unique.
    """
    a = _as_tensor(a)
    if a.values.ndim != 2:
        raise DimensionError(f"scatter_rows needs a 2-D operand, got {a.values.shape}")
    pos = np.asarray(positions, dtype=np.intp)
    if pos.shape != (a.values.shape[0],):
        raise DimensionError(
            f"scatter_rows: {len(pos)} positions for {a.values.shape[0]} rows"
        )
    if len(np.unique(pos)) != len(pos):
        raise ContractError("scatter_rows: positions must be unique")
    buf = np.zeros((n_rows, a.values.shape[1]))
    buf[pos] = a.values
    out = Tensor(buf)

    def bw(g):
        return (g[pos],)

    return _record(out, (a,), bw)


def gather_cols(a, indices) -> Tensor:
    """Select columns of a 2-D tensor; backward scatter-adds into place."""
    a = _as_tensor(a)
    if a.values.ndim != 2:
        raise DimensionError(f"gather_cols needs a 2-D operand, got {a.values.shape}")
    idx = np.asarray(indices, dtype=np.intp)
    out = Tensor(a.values[:, idx])
    shp = a.values.shape

    def bw(g):
        buf = np.zeros(shp)
        np.add.at(buf.T, idx, g.T)
        return (buf,)

    return _record(out, (a,), bw)


# ---------------------------------------------------------------------------
# fused ops

def soft_threshold(z, tau) -> Tensor:
    """Shrink entries of z toward zero by per-feature thresholds tau >= 0.

    Entries with magnitude at most the threshold become exactly zero; the
    rest move toward zero by the threshold. The kink uses subgradient 1 so
    training never stalls on the boundary.
    """
    z, tau = _as_tensor(z), _as_tensor(tau)
    if z.values.ndim != 2:
        raise DimensionError(f"soft_threshold needs a 2-D input, got {z.values.shape}")
    if tau.values.size != z.values.shape[1]:
        raise DimensionError(
            f"soft_threshold: {tau.values.size} thresholds for {z.values.shape[1]} features"
        )
    tv = tau.values.reshape(1, -1)
    if np.any(tv < 0):
        raise ContractError("soft_threshold: negative threshold entry")
    v = z.values
    out = Tensor(np.where(v > tv, v - tv, np.where(v < -tv, v + tv, 0.0)))

    def bw(g):
        gz = g * (np.abs(v) >= tv) if z.requires_grad else None
        if tau.requires_grad:
            dtau = np.where(v > tv, -g, np.where(v < -tv, g, 0.0))
            gt = dtau.sum(axis=0).reshape(tau.values.shape)
        else:
            gt = None
        return gz, gt

    return _record(out, (z, tau), bw)


def cross_entropy_with_logits(logits, label: int) -> Tensor:
    """Cross-entropy of an integer class label against raw logits (scalar output)."""
    logits = _as_tensor(logits)
    v = logits.values.reshape(-1)
    label = int(label)
    if not 0 <= label < v.size:
        raise ContractError(f"label {label} out of range for {v.size} classes")
    m = v.max()
    lse = m + np.log(np.exp(v - m).sum())
    out = Tensor(lse - v[label])
    shp = logits.values.shape

    def bw(g):
        p = np.exp(v - lse)
        p[label] -= 1.0
        return ((g.reshape(()) * p).reshape(shp),)

    return _record(out, (logits,), bw)
