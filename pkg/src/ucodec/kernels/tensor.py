"""Dense arrays with tape-based reverse-mode differentiation.

A ``Tensor`` wraps a numpy array. While a ``Tape`` is active, every primitive
appends a backward closure to it; ``Tape.backward`` replays those closures in
exact reverse execution order, accumulating gradients into every reachable
tensor that requires them. Running the same primitives without an active tape
produces bit-identical forward values (recording never changes arithmetic).

Training runs in float32; gradient verification runs the same code in
float64, so autodiff bugs are separable from roundoff.
"""

from __future__ import annotations

import numpy as np

from ucodec.errors import ShapeError

_ACTIVE_TAPES: list["Tape | None"] = []


class Tensor:
    """A dense real array plus an optional gradient of the same shape."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        # values are stored row-major; keeps views/ravel well-defined
        self.data = arr if arr.flags.c_contiguous else np.asarray(arr, order="C")
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"

    # Operator sugar; every path lands on the taped primitives below.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, reciprocal(other))
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)


class Parameter(Tensor):
    """A named trainable tensor whose gradient buffer always exists."""

    __slots__ = ("name",)

    def __init__(self, data, name: str = "", dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


class Tape:
    """Ordered record of executed primitives.

    Entering the tape makes it the recording target; ops executed inside
    append ``(output, backward_fn)`` entries in execution order.
    """

    __slots__ = ("_entries",)

    def __init__(self):
        self._entries: list[tuple[Tensor, object]] = []

    def __len__(self):
        return len(self._entries)

    def __enter__(self):
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACTIVE_TAPES.pop()
        return False

    def backward(self, loss: Tensor) -> None:
        """Populate gradients of every tensor reachable from ``loss``."""
        if loss.data.size != 1:
            raise ShapeError(
                f"backward needs a scalar loss, got shape {loss.data.shape}"
            )
        loss.grad = np.ones_like(loss.data)
        for out, fn in reversed(self._entries):
            if out.grad is not None:
                fn(out.grad)


class no_grad:
    """Context that suspends recording while keeping arithmetic identical."""

    def __enter__(self):
        _ACTIVE_TAPES.append(None)
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACTIVE_TAPES.pop()
        return False


def _tape() -> Tape | None:
    return _ACTIVE_TAPES[-1] if _ACTIVE_TAPES else None


def _record(out: Tensor, backward_fn) -> None:
    tape = _tape()
    if tape is not None and out.requires_grad:
        tape._entries.append((out, backward_fn))


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype, copy=True)
    else:
        t.grad += g


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


# ---------------------------------------------------------------------------
# binary elementwise (broadcasting)
# ---------------------------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a.dtype)
    out = Tensor(a.data + b.data, requires_grad=a.requires_grad or b.requires_grad)

    def bwd(g, a=a, b=b):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    _record(out, bwd)
    return out


def sub(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a.dtype)
    out = Tensor(a.data - b.data, requires_grad=a.requires_grad or b.requires_grad)

    def bwd(g, a=a, b=b):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    _record(out, bwd)
    return out


def mul(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a.dtype)
    out = Tensor(a.data * b.data, requires_grad=a.requires_grad or b.requires_grad)

    def bwd(g, a=a, b=b):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    _record(out, bwd)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; leading axes broadcast as in numpy."""
    if a.data.shape[-1] != b.data.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError(f"matmul mismatch: {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data, requires_grad=a.requires_grad or b.requires_grad)

    def bwd(g, a=a, b=b):
        if a.requires_grad:
            if b.ndim == 1:
                ga = np.multiply.outer(g, b.data) if g.ndim else g * b.data
            else:
                ga = g @ b.data.swapaxes(-1, -2)
            _accum(a, _unbroadcast(np.asarray(ga), a.data.shape))
        if b.requires_grad:
            if a.ndim == 1:
                gb = np.multiply.outer(a.data, g) if g.ndim else a.data * g
            else:
                gb = a.data.swapaxes(-1, -2) @ g
            _accum(b, _unbroadcast(np.asarray(gb), b.data.shape))

    _record(out, bwd)
    return out


# ---------------------------------------------------------------------------
# unary elementwise
# ---------------------------------------------------------------------------


def reciprocal(x: Tensor) -> Tensor:
    out = Tensor(1.0 / x.data, requires_grad=x.requires_grad)

    def bwd(g, x=x, y=out):
        _accum(x, -g * y.data * y.data)

    _record(out, bwd)
    return out


def exp(x: Tensor) -> Tensor:
    out = Tensor(np.exp(x.data), requires_grad=x.requires_grad)

    def bwd(g, x=x, y=out):
        _accum(x, g * y.data)

    _record(out, bwd)
    return out


def log(x: Tensor) -> Tensor:
    out = Tensor(np.log(x.data), requires_grad=x.requires_grad)

    def bwd(g, x=x):
        _accum(x, g / x.data)

    _record(out, bwd)
    return out


def sqrt(x: Tensor) -> Tensor:
    out = Tensor(np.sqrt(x.data), requires_grad=x.requires_grad)

    def bwd(g, x=x, y=out):
        _accum(x, g * (0.5 / y.data))

    _record(out, bwd)
    return out


def square(x: Tensor) -> Tensor:
    out = Tensor(x.data * x.data, requires_grad=x.requires_grad)

    def bwd(g, x=x):
        _accum(x, g * (2.0 * x.data))

    _record(out, bwd)
    return out


def tanh(x: Tensor) -> Tensor:
    out = Tensor(np.tanh(x.data), requires_grad=x.requires_grad)

    def bwd(g, x=x, y=out):
        _accum(x, g * (1.0 - y.data * y.data))

    _record(out, bwd)
    return out


def absolute(x: Tensor) -> Tensor:
    """|x| with subgradient 0 at the kink."""
    out = Tensor(np.abs(x.data), requires_grad=x.requires_grad)

    def bwd(g, x=x):
        _accum(x, g * np.sign(x.data))

    _record(out, bwd)
    return out


def clamp_min(x: Tensor, floor: float) -> Tensor:
    """max(x, floor) with zero gradient on the clamped side."""
    out = Tensor(np.maximum(x.data, floor), requires_grad=x.requires_grad)

    def bwd(g, x=x, floor=floor):
        _accum(x, g * (x.data > floor))

    _record(out, bwd)
    return out


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    """Sum over one axis, a tuple of axes, or everything."""
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims), requires_grad=x.requires_grad)

    def bwd(g, x=x, axis=axis, keepdims=keepdims):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(x, np.broadcast_to(g, x.data.shape).copy())

    _record(out, bwd)
    return out


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        size = x.data.size
    elif isinstance(axis, tuple):
        size = int(np.prod([x.data.shape[a] for a in axis]))
    else:
        size = x.data.shape[axis]
    return mul(sum_(x, axis=axis, keepdims=keepdims), 1.0 / size)


# ---------------------------------------------------------------------------
# shape and indexing
# ---------------------------------------------------------------------------


def reshape(x: Tensor, shape) -> Tensor:
    out = Tensor(x.data.reshape(shape), requires_grad=x.requires_grad)

    def bwd(g, x=x):
        _accum(x, g.reshape(x.data.shape))

    _record(out, bwd)
    return out


def transpose(x: Tensor, axes=None) -> Tensor:
    out = Tensor(x.data.transpose(axes), requires_grad=x.requires_grad)

    def bwd(g, x=x, axes=axes):
        if axes is None:
            _accum(x, g.transpose())
        else:
            _accum(x, g.transpose(np.argsort(axes)))

    _record(out, bwd)
    return out


def swapaxes(x: Tensor, a: int, b: int) -> Tensor:
    out = Tensor(x.data.swapaxes(a, b), requires_grad=x.requires_grad)

    def bwd(g, x=x, a=a, b=b):
        _accum(x, g.swapaxes(a, b))

    _record(out, bwd)
    return out


def concat(parts: list[Tensor], axis: int = 0) -> Tensor:
    datas = [p.data for p in parts]
    out = Tensor(np.concatenate(datas, axis=axis), requires_grad=any(p.requires_grad for p in parts))
    sizes = [d.shape[axis] for d in datas]

    def bwd(g, parts=parts, sizes=sizes, axis=axis):
        offs = np.cumsum([0] + sizes)
        for p, lo, hi in zip(parts, offs[:-1], offs[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accum(p, g[tuple(sl)])

    _record(out, bwd)
    return out


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice of ``length`` entries along ``axis``."""
    sl = [slice(None)] * x.ndim
    sl[axis] = slice(start, start + length)
    out = Tensor(x.data[tuple(sl)].copy(), requires_grad=x.requires_grad)

    def bwd(g, x=x, sl=tuple(sl)):
        gx = np.zeros_like(x.data)
        gx[sl] = g
        _accum(x, gx)

    _record(out, bwd)
    return out


def pad1d(x: Tensor, left: int, right: int) -> Tensor:
    """Zero-pad the last axis."""
    width = [(0, 0)] * (x.ndim - 1) + [(left, right)]
    out = Tensor(np.pad(x.data, width), requires_grad=x.requires_grad)

    def bwd(g, x=x, left=left):
        n = x.data.shape[-1]
        _accum(x, g[..., left:left + n])

    _record(out, bwd)
    return out


def rows(table: Tensor, indices) -> Tensor:
    """Gather rows of a 2-d table (embedding lookup)."""
    idx = np.asarray(indices)
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise IndexError(
            f"row index out of range [0, {table.data.shape[0]}): {idx.min()}..{idx.max()}"
        )
    out = Tensor(table.data[idx], requires_grad=table.requires_grad)

    def bwd(g, table=table, idx=idx):
        if not table.requires_grad:
            return
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, idx, g)

    _record(out, bwd)
    return out


def stop_gradient(x: Tensor) -> Tensor:
    """Forward identity that blocks the backward path."""
    return Tensor(x.data)


def straight_through(x: Tensor, value: np.ndarray) -> Tensor:
    """Forward ``value`` exactly; backward passes the gradient to ``x``.

    Equivalent to ``x + stop_gradient(value - x)`` but with a bit-exact
    forward (the naive formula can differ from ``value`` in the last ulp).
    """
    if x.data.shape != value.shape:
        raise ShapeError(f"straight_through shape mismatch: {x.data.shape} vs {value.shape}")
    out = Tensor(np.array(value, dtype=x.dtype, copy=True), requires_grad=x.requires_grad)

    def bwd(g, x=x):
        _accum(x, g)

    _record(out, bwd)
    return out
