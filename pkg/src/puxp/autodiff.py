"""Dense float64 tensors with a reverse-mode gradient tape.

Rank is capped at 3 (M x K x C is the largest shape the models need) and
there is no implicit broadcasting: every op states an exact shape contract
and raises ShapeError when operands disagree. Ops record a backward rule on
the innermost active Tape; replaying the rules in reverse execution order
fills `.grad` on every requires_grad tensor the loss depends on.

All forward computation is plain numpy on contiguous float64 buffers, so a
fixed input always produces a bitwise-identical output.
"""

from __future__ import annotations

import numpy as np

from .errors import IndexRangeError, ShapeError


class Tensor:
    """A dense float64 array (rank 1..3) that can participate in a Tape."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad=False):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.ndim > 3:
            raise ShapeError(f"tensor rank must be 1..3, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() needs a one-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Parameter:
    """Named trainable tensor; the name keys optimizer state and checkpoints."""

    __slots__ = ("name", "tensor")

    def __init__(self, name, value):
        self.name = str(name)
        self.tensor = value if isinstance(value, Tensor) else Tensor(value)
        self.tensor.requires_grad = True

    @property
    def data(self):
        return self.tensor.data

    @property
    def grad(self):
        return self.tensor.grad

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.tensor.shape})"


class ParameterStore:
    """Insertion-ordered collection of uniquely named parameters."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def add(self, name, value):
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        param = Parameter(name, value)
        self._params[name] = param
        return param

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def __contains__(self, name):
        return name in self._params

    def __getitem__(self, name):
        return self._params[name]

    def names(self):
        return list(self._params)

    def zero_grads(self):
        for p in self._params.values():
            p.tensor.grad = None

    def value_count(self):
        return int(sum(p.data.size for p in self._params.values()))


_TAPES: list["Tape"] = []


class Tape:
    """Ordered record of backward rules for one forward pass.

    Use as a context manager around the forward computation, then call
    backward(loss) once. Gradients accumulate into `.grad`, so callers zero
    parameter grads between steps.
    """

    def __init__(self):
        self._records = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPES.pop()
        if popped is not self:
            raise RuntimeError("gradient tapes exited out of order")
        return False

    def __len__(self):
        return len(self._records)

    def record(self, backward):
        self._records.append(backward)

    def backward(self, loss):
        if not isinstance(loss, Tensor) or loss.data.size != 1:
            raise ShapeError("backward needs a one-element loss tensor")
        loss.grad = np.ones_like(loss.data)
        for rule in reversed(self._records):
            rule()


def record_op(out, inputs, backward):
    """Mark `out` differentiable and push its rule if a tape is listening."""
    if _TAPES and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _TAPES[-1].record(backward)
    return out


def accumulate_grad(t, g):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


_accum = accumulate_grad


# ---------------------------------------------------------------------------
# ops


def matmul(a, b):
    """Matrix product of a[M,K] and b[K,P]."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not align")
    out = Tensor(a.data @ b.data)

    def backward():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ g)

    return record_op(out, (a, b), backward)


def relu(x):
    """Elementwise max(x, 0); gradient passes where x > 0."""
    out = Tensor(np.maximum(x.data, 0.0))

    def backward():
        g = out.grad
        if g is None:
            return
        if x.requires_grad:
            _accum(x, g * (x.data > 0.0))

    return record_op(out, (x,), backward)


def add(a, b):
    """Elementwise sum of two same-shape tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")
    out = Tensor(a.data + b.data)

    def backward():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            _accum(a, g)
        if b.requires_grad:
            _accum(b, g)

    return record_op(out, (a, b), backward)


def sub(a, b):
    """Elementwise difference of two same-shape tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} differ")
    out = Tensor(a.data - b.data)

    def backward():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            _accum(a, g)
        if b.requires_grad:
            _accum(b, -g)

    return record_op(out, (a, b), backward)


def add_bias(x, bias):
    """Add a length-C bias vector to every row of x[M,C]."""
    if x.ndim != 2 or bias.ndim != 1 or x.shape[1] != bias.shape[0]:
        raise ShapeError(f"add_bias: shapes {x.shape} and {bias.shape} do not align")
    out = Tensor(x.data + bias.data[None, :])

    def backward():
        g = out.grad
        if g is None:
            return
        if x.requires_grad:
            _accum(x, g)
        if bias.requires_grad:
            _accum(bias, g.sum(axis=0))

    return record_op(out, (x, bias), backward)


def scale(x, factor):
    """Multiply by a python scalar."""
    factor = float(factor)
    out = Tensor(x.data * factor)

    def backward():
        g = out.grad
        if g is None:
            return
        if x.requires_grad:
            _accum(x, g * factor)

    return record_op(out, (x,), backward)


def sum_all(x):
    """Full reduction to a one-element tensor."""
    out = Tensor(np.array([x.data.sum()]))

    def backward():
        g = out.grad
        if g is None:
            return
        if x.requires_grad:
            _accum(x, np.full_like(x.data, g[0]))

    return record_op(out, (x,), backward)


def concat_last(a, b):
    """Concatenate along the last axis; leading dimensions must match."""
    if a.ndim != b.ndim or a.shape[:-1] != b.shape[:-1]:
        raise ShapeError(f"concat_last: leading dims of {a.shape} and {b.shape} differ")
    out = Tensor(np.concatenate([a.data, b.data], axis=-1))
    split = a.shape[-1]

    def backward():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            _accum(a, g[..., :split])
        if b.requires_grad:
            _accum(b, g[..., split:])

    return record_op(out, (a, b), backward)


def gather_rows(x, idx):
    """Gather rows of x[N,C] into out[M,K,C] with out[m,k] = x[idx[m,k]].

    `idx` is an integer array of shape (M, K) (an IndexMatrix's `entries`
    attribute is accepted directly). The backward rule scatter-adds, so rows
    referenced several times accumulate every contribution.
    """
    entries = np.asarray(getattr(idx, "entries", idx))
    if x.ndim != 2:
        raise ShapeError(f"gather_rows: need a rank-2 source, got shape {x.shape}")
    if entries.ndim != 2 or not np.issubdtype(entries.dtype, np.integer):
        raise ShapeError("gather_rows: index must be an integer matrix")
    n = x.shape[0]
    if entries.size and (entries.min() < 0 or entries.max() >= n):
        bad = entries.min() if entries.min() < 0 else entries.max()
        raise IndexRangeError(f"gather_rows: index {bad} out of range for {n} rows")
    out = Tensor(x.data[entries])

    def backward():
        g = out.grad
        if g is None:
            return
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.add.at(gx, entries.reshape(-1), g.reshape(-1, x.shape[1]))
            _accum(x, gx)

    return record_op(out, (x,), backward)


def max_over_k(x):
    """Elementwise max over the middle axis of x[N,K,C].

    Gradient routes to the first maximal entry along K when there are ties.
    """
    if x.ndim != 3:
        raise ShapeError(f"max_over_k: need a rank-3 tensor, got shape {x.shape}")
    if x.shape[1] < 1:
        raise ShapeError("max_over_k: K must be at least 1")
    winners = np.argmax(x.data, axis=1)  # first occurrence on ties
    out = Tensor(np.take_along_axis(x.data, winners[:, None, :], axis=1)[:, 0, :])

    def backward():
        g = out.grad
        if g is None:
            return
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.put_along_axis(gx, winners[:, None, :], g[:, None, :], axis=1)
            _accum(x, gx)

    return record_op(out, (x,), backward)


def reshape(x, shape):
    """Row-major reshape preserving element count (rank of target <= 3)."""
    shape = tuple(int(s) for s in shape)
    if len(shape) > 3 or len(shape) < 1:
        raise ShapeError(f"reshape: target rank must be 1..3, got {shape}")
    if int(np.prod(shape)) != x.data.size:
        raise ShapeError(f"reshape: cannot view {x.shape} as {shape}")
    out = Tensor(x.data.reshape(shape))

    def backward():
        g = out.grad
        if g is None:
            return
        if x.requires_grad:
            _accum(x, g.reshape(x.shape))

    return record_op(out, (x,), backward)


def shuffle_expand(x, ratio):
    """Reshape x[N, r*C] to [r*N, C] so channel groups become new rows.

    Output row r*i + s holds channels [s*C, (s+1)*C) of input row i: the r
    children of a point are contiguous. The map is a bijection on elements;
    shuffle_merge inverts it.
    """
    ratio = int(ratio)
    if x.ndim != 2:
        raise ShapeError(f"shuffle_expand: need a rank-2 tensor, got shape {x.shape}")
    if ratio < 1:
        raise ShapeError(f"shuffle_expand: ratio must be >= 1, got {ratio}")
    n, rc = x.shape
    if rc % ratio != 0:
        raise ShapeError(f"shuffle_expand: channel count {rc} not divisible by ratio {ratio}")
    return reshape(x, (n * ratio, rc // ratio))


def shuffle_merge(x, ratio):
    """Inverse of shuffle_expand: view x[r*N, C] as [N, r*C]."""
    ratio = int(ratio)
    if x.ndim != 2:
        raise ShapeError(f"shuffle_merge: need a rank-2 tensor, got shape {x.shape}")
    n, c = x.shape
    if ratio < 1 or n % ratio != 0:
        raise ShapeError(f"shuffle_merge: row count {n} not divisible by ratio {ratio}")
    return reshape(x, (n // ratio, c * ratio))
