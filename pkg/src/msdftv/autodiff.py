"""Dense float64 tensors with reverse-mode automatic differentiation.

Every differentiable operation records a :class:`TapeNode` carrying the
backward rule as a closure over the saved forward values. ``backward`` on a
scalar loss replays the reachable nodes in reverse creation order and
accumulates gradients into every tensor that requires them; callers zero
gradients between optimizer steps.

All math is float64. A recorded graph is confined to the thread that built
it; independent graphs (e.g. parallel gradient checks) may run concurrently.
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager

import numpy as np

from .errors import ContractError, DimensionError, NumericError

_seq = itertools.count()
_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad():
    """Disable tape recording inside the block (inference, FD probes)."""
    prev = grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


class TapeNode:
    """One recorded operation: op kind, inputs, backward rule, creation order."""

    __slots__ = ("op", "inputs", "backward_fn", "seq")

    def __init__(self, op, inputs, backward_fn):
        self.op = op
        self.inputs = inputs
        self.backward_fn = backward_fn
        self.seq = next(_seq)


class Tensor:
    """N-dimensional float64 array with optional gradient participation."""

    __slots__ = ("data", "grad", "requires_grad", "node")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)
        if arr.size == 0:
            raise DimensionError(f"zero-extent tensor shape {arr.shape}")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a scalar, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # arithmetic sugar; the actual rules live in the module-level ops
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __truediv__(self, scalar):
        return mul(self, 1.0 / float(scalar))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)

    def sum(self, axis=None):
        return tensor_sum(self, axis)

    def mean(self, axis=None):
        return tensor_mean(self, axis)

    def relu(self):
        return relu(self)

    def tanh(self):
        return tanh(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(op: str, data, inputs, backward_fn) -> Tensor:
    out = Tensor(data)
    if grad_enabled() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.node = TapeNode(op, tuple(inputs), backward_fn)
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a gradient back to the pre-broadcast shape of its operand."""
    shape = tuple(shape)
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(op: str, a: Tensor, b: Tensor):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make("add", a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make("sub", a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make("mul", a.data * b.data, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        return (-g,)

    return _make("neg", -a.data, (a,), backward)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0  # gradient at exactly 0 is defined as 0

    def backward(g):
        return (g * mask,)

    return _make("relu", np.where(mask, a.data, 0.0), (a,), backward)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)

    def backward(g):
        return (g * (1.0 - out * out),)

    return _make("tanh", out, (a,), backward)


def _norm_axis(axis, ndim):
    if axis is None:
        return None
    if isinstance(axis, int):
        axis = (axis,)
    axis = tuple(ax % ndim for ax in axis)
    if len(set(axis)) != len(axis):
        raise DimensionError(f"repeated reduction axis {axis}")
    return axis


def tensor_sum(a, axis=None) -> Tensor:
    a = as_tensor(a)
    axis = _norm_axis(axis, a.ndim)
    out = a.data.sum(axis=axis)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape),)

    return _make("sum", out, (a,), backward)


def tensor_mean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    axis = _norm_axis(axis, a.ndim)
    if axis is None:
        n = a.size
    else:
        n = int(np.prod([a.shape[ax] for ax in axis]))
    out = a.data.mean(axis=axis)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape) / n,)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape) / n,)

    return _make("mean", out, (a,), backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    shape = tuple(shape)

    def backward(g):
        return (g.reshape(a.shape),)

    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"cannot reshape {a.shape} to {shape}") from None
    return _make("reshape", out, (a,), backward)


_BASIC_INDEX = (int, slice, type(Ellipsis))


def take(a, idx) -> Tensor:
    """Basic (slice/int) indexing with gradient scatter on the backward pass."""
    a = as_tensor(a)
    parts = idx if isinstance(idx, tuple) else (idx,)
    for p in parts:
        if not isinstance(p, _BASIC_INDEX):
            raise DimensionError(f"only basic indexing is supported, got {type(p).__name__}")

    def backward(g):
        ga = np.zeros_like(a.data)
        ga[idx] += g
        return (ga,)

    return _make("take", a.data[idx], (a,), backward)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    base = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != base:
            raise DimensionError(f"stack needs equal shapes, got {base} and {t.shape}")

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _make("stack", np.stack([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        sl = [slice(None)] * g.ndim
        outs = []
        for i in range(len(tensors)):
            sl[axis] = slice(bounds[i], bounds[i + 1])
            outs.append(g[tuple(sl)])
        return tuple(outs)

    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise DimensionError(f"concat shapes {[t.shape for t in tensors]} along axis {axis}") from None
    return _make("concat", out, tuple(tensors), backward)


def pad_end(a, axis: int, n: int) -> Tensor:
    """Append ``n`` zero slices at the tail of ``axis``."""
    a = as_tensor(a)
    if n < 0:
        raise DimensionError("pad length must be non-negative")
    if n == 0:
        widths = None
    else:
        widths = [(0, 0)] * a.ndim
        widths[axis % a.ndim] = (0, n)

    def backward(g):
        sl = [slice(None)] * a.ndim
        sl[axis % a.ndim] = slice(0, a.shape[axis % a.ndim])
        return (g[tuple(sl)],)

    out = a.data if widths is None else np.pad(a.data, widths)
    return _make("pad_end", out, (a,), backward)


def matmul(a, b) -> Tensor:
    """Matrix product with broadcasting over leading batch dimensions."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs >=2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner extents differ: {a.shape} x {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise DimensionError(f"matmul batch shapes incompatible: {a.shape} x {b.shape}") from None

    def backward(g):
        ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return _make("matmul", out, (a, b), backward)


def conv1d(x, w, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation over the middle axis (no kernel flip, zero padding).

    ``x`` is [B, L, C_in], ``w`` is [K, C_in, C_out]; the output length is
    floor((L + 2*padding - K) / stride) + 1.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 3 or w.ndim != 3:
        raise DimensionError(f"conv1d expects x [B,L,C_in], w [K,C_in,C_out]; got {x.shape}, {w.shape}")
    if x.shape[2] != w.shape[1]:
        raise DimensionError(f"conv1d channel mismatch: x {x.shape} vs w {w.shape}")
    if stride < 1:
        raise DimensionError(f"stride must be >= 1, got {stride}")
    if padding < 0:
        raise DimensionError(f"padding must be >= 0, got {padding}")
    B, L, _ = x.shape
    K = w.shape[0]
    lp = L + 2 * padding
    if K > lp:
        raise DimensionError(f"kernel size {K} exceeds padded input length {lp}")
    l_out = (lp - K) // stride + 1
    xp = np.pad(x.data, ((0, 0), (padding, padding), (0, 0))) if padding else x.data
    out = np.zeros((B, l_out, w.shape[2]))
    for k in range(K):
        out += np.matmul(xp[:, k : k + stride * l_out : stride, :], w.data[k])

    def backward(g):
        gx = np.zeros_like(xp)
        gw = np.zeros_like(w.data)
        for k in range(K):
            sl = slice(k, k + stride * l_out, stride)
            gw[k] = np.einsum("blc,bld->cd", xp[:, sl, :], g)
            gx[:, sl, :] += np.matmul(g, w.data[k].T)
        if padding:
            gx = gx[:, padding : padding + L, :]
        return gx, gw

    return _make("conv1d", out, (x, w), backward)


def softmax(x, axis: int) -> Tensor:
    """Numerically stable softmax (max-subtraction) along ``axis``."""
    x = as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise DimensionError(f"softmax axis {axis} out of range for shape {x.shape}")
    m = x.data.max(axis=axis, keepdims=True)
    e = np.exp(x.data - m)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * s).sum(axis=axis, keepdims=True)
        return ((g - dot) * s,)

    return _make("softmax", s, (x,), backward)


def _scatter_add_last(dst: np.ndarray, idx: np.ndarray, src: np.ndarray):
    """dst[..., idx[..., j]] += src[..., j] with repeated-index accumulation."""
    t = dst.shape[-1]
    flat_dst = dst.reshape(-1, t)
    flat_idx = idx.reshape(-1, idx.shape[-1])
    flat_src = src.reshape(-1, src.shape[-1])
    rows = np.arange(flat_dst.shape[0])[:, None]
    np.add.at(flat_dst, (rows, flat_idx), flat_src)


def sample_linear(x, positions, axis: int) -> Tensor:
    """Gather along ``axis`` at fractional positions with linear interpolation.

    Positions are clamped to [0, T-1]; within range the output interpolates
    the floor/ceil neighbours and the position gradient is their difference
    (zero where the clamp is active). ``positions`` must have the same rank
    as ``x`` and broadcast against it everywhere except ``axis``, whose
    output extent is taken from ``positions``.
    """
    x = as_tensor(x)
    positions = as_tensor(positions)
    axis = axis % x.ndim
    if positions.ndim != x.ndim:
        raise DimensionError(
            f"positions rank {positions.ndim} must match input rank {x.ndim}"
        )
    if np.isnan(positions.data).any():
        raise NumericError("sample_linear received NaN positions")
    t = x.shape[axis]

    xd = np.moveaxis(x.data, axis, -1)
    pd = np.moveaxis(positions.data, axis, -1)
    try:
        batch = np.broadcast_shapes(xd.shape[:-1], pd.shape[:-1])
    except ValueError:
        raise DimensionError(
            f"positions shape {positions.shape} does not broadcast with input {x.shape}"
        ) from None
    s = pd.shape[-1]

    p = np.clip(pd, 0.0, float(t - 1))
    f = np.floor(p).astype(np.intp)
    c = np.minimum(f + 1, t - 1)
    frac = p - f

    xb = np.broadcast_to(xd, batch + (t,))
    fb = np.broadcast_to(f, batch + (s,))
    cb = np.broadcast_to(c, batch + (s,))
    fracb = np.broadcast_to(frac, batch + (s,))
    lo = np.take_along_axis(xb, fb, axis=-1)
    hi = np.take_along_axis(xb, cb, axis=-1)
    out = lo * (1.0 - fracb) + hi * fracb

    inside = np.broadcast_to((pd >= 0.0) & (pd <= t - 1), batch + (s,))

    def backward(g):
        gm = np.moveaxis(g, axis, -1)
        gx_full = np.zeros(batch + (t,))
        _scatter_add_last(gx_full, fb, gm * (1.0 - fracb))
        _scatter_add_last(gx_full, cb, gm * fracb)
        gx = _unbroadcast(gx_full, xd.shape)
        gp_full = np.where(inside, (hi - lo) * gm, 0.0)
        gp = _unbroadcast(gp_full, pd.shape)
        return np.moveaxis(gx, -1, axis), np.moveaxis(gp, -1, axis)

    return _make("sample_linear", np.moveaxis(out, -1, axis), (x, positions), backward)


def backward(loss: Tensor):
    """Populate gradients of everything reachable from a scalar ``loss``.

    Gradients accumulate across calls; callers zero them between steps.
    """
    if loss.size != 1:
        raise ContractError(f"backward requires a scalar loss, got shape {loss.shape}")
    if loss.node is None:
        raise ContractError("loss is not connected to any recorded operation")

    tensors = [loss]
    seen = {id(loss)}
    stackbuf = [loss]
    while stackbuf:
        t = stackbuf.pop()
        if t.node is not None:
            for inp in t.node.inputs:
                if id(inp) not in seen:
                    seen.add(id(inp))
                    tensors.append(inp)
                    stackbuf.append(inp)

    order = sorted((t for t in tensors if t.node is not None), key=lambda t: t.node.seq, reverse=True)
    flows = {id(loss): np.ones_like(loss.data)}
    for t in order:
        g = flows.pop(id(t), None)
        if g is None:
            continue
        if t.requires_grad:
            t.grad = g.copy() if t.grad is None else t.grad + g
        for inp, gi in zip(t.node.inputs, t.node.backward_fn(g)):
            if gi is None:
                continue
            if not inp.requires_grad and inp.node is None:
                continue
            prev = flows.get(id(inp))
            flows[id(inp)] = gi if prev is None else prev + gi
    for t in tensors:
        if t.node is None and t.requires_grad:
            g = flows.pop(id(t), None)
            if g is not None:
                t.grad = g.copy() if t.grad is None else t.grad + g
