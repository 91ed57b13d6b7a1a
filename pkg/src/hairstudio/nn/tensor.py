"""Reverse-mode autodiff over numpy arrays.

Minimal tape-based engine sized for NCHW conv nets: every op builds a
node holding its parents and a closure that routes the incoming gradient
to them. ``Tensor.backward()`` walks the tape in reverse topological
order. Arrays keep whatever float dtype they were given, so gradient
checks can run the whole stack in float64.

A NaN guard verifies every op output is finite (raising
:class:`NonFiniteError`); it is on by default and can be toggled with
:func:`set_nan_guard` for hot loops.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "NonFiniteError",
    "set_nan_guard",
    "nan_guard_enabled",
    "concat",
    "conv2d",
    "instance_norm",
    "leaky_relu",
    "relu",
    "softplus",
    "tanh",
    "upsample_nearest2",
]


class NonFiniteError(FloatingPointError):
    """An op produced NaN or infinity."""


_NAN_GUARD = True


def set_nan_guard(enabled: bool) -> bool:
    """Toggle the per-op finiteness check; returns the previous setting."""
    global _NAN_GUARD
    prev = _NAN_GUARD
    _NAN_GUARD = bool(enabled)
    return prev


def nan_guard_enabled() -> bool:
    return _NAN_GUARD


def _check_finite(arr: np.ndarray, op: str):
    if _NAN_GUARD and not np.isfinite(arr).all():
        raise NonFiniteError(f"{op} produced non-finite values")


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float32)
        _check_finite(arr, "tensor")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None

    # -- graph construction -------------------------------------------------

    @classmethod
    def _node(cls, data: np.ndarray, parents: tuple["Tensor", ...], backward_fn, op: str) -> "Tensor":
        _check_finite(data, op)
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        out._parents = parents if out.requires_grad else ()
        out._backward_fn = backward_fn if out.requires_grad else None
        return out

    def _accumulate(self, piece: np.ndarray):
        if self.grad is None:
            self.grad = piece.copy() if isinstance(piece, np.ndarray) else np.asarray(piece)
        else:
            self.grad = self.grad + piece

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    # -- backward pass ------------------------------------------------------

    def backward(self, grad=None):
        if grad is None:
            grad = np.ones_like(self.data)
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
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(topo):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        return add(self, _wrap(other, self.dtype))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(_wrap(other, self.dtype), -1.0))

    def __rsub__(self, other):
        return add(_wrap(other, self.dtype), mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division is not part of the op set; multiply by a reciprocal")
        return mul(self, 1.0 / float(other))

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, p):
        return power(self, float(p))

    # -- reductions and shapes ----------------------------------------------

    def sum(self):
        return reduce_sum(self)

    def mean(self):
        return reduce_mean(self)

    def reshape(self, *shape):
        return reshape(self, shape)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


def _wrap(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    b = _wrap(b, a.dtype)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return Tensor._node(out_data, (a, b), backward, "add")


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        scale = float(b)
        out_data = a.data * scale

        def backward_scalar(g):
            if a.requires_grad:
                a._accumulate(g * scale)

        return Tensor._node(out_data, (a,), backward_scalar, "mul")
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return Tensor._node(out_data, (a, b), backward, "mul")


def power(a: Tensor, p: float) -> Tensor:
    out_data = a.data**p

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * p * a.data ** (p - 1.0))

    return Tensor._node(out_data, (a,), backward, "pow")


def absolute(a: Tensor) -> Tensor:
    out_data = np.abs(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * np.sign(a.data))

    return Tensor._node(out_data, (a,), backward, "abs")


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    out_data = np.clip(a.data, lo, hi)

    def backward(g):
        if a.requires_grad:
            inside = ((a.data > lo) & (a.data < hi)).astype(a.data.dtype)
            a._accumulate(g * inside)

    return Tensor._node(out_data, (a,), backward, "clip")


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (a.data > 0))

    return Tensor._node(out_data, (a,), backward, "relu")


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    out_data = np.where(a.data > 0, a.data, slope * a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * np.where(a.data > 0, 1.0, slope).astype(a.data.dtype))

    return Tensor._node(out_data, (a,), backward, "leaky_relu")


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (1.0 - out_data * out_data))

    return Tensor._node(out_data, (a,), backward, "tanh")


def softplus(a: Tensor) -> Tensor:
    """log(1 + exp(x)), computed stably; derivative is the sigmoid."""
    x = a.data
    out_data = np.maximum(x, 0) + np.log1p(np.exp(-np.abs(x)))

    def backward(g):
        if a.requires_grad:
            sig = np.empty_like(x)
            pos = x >= 0
            sig[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
            ex = np.exp(x[~pos])
            sig[~pos] = ex / (1.0 + ex)
            a._accumulate(g * sig)

    return Tensor._node(out_data, (a,), backward, "softplus")


def reduce_sum(a: Tensor) -> Tensor:
    out_data = np.asarray(a.data.sum(), dtype=a.data.dtype)

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.broadcast_to(g, a.data.shape).astype(a.data.dtype))

    return Tensor._node(out_data, (a,), backward, "sum")


def reduce_mean(a: Tensor) -> Tensor:
    n = a.data.size
    out_data = np.asarray(a.data.mean(), dtype=a.data.dtype)

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.broadcast_to(g / n, a.data.shape).astype(a.data.dtype))

    return Tensor._node(out_data, (a,), backward, "mean")


def reshape(a: Tensor, shape) -> Tensor:
    out_data = a.data.reshape(shape)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.data.shape))

    return Tensor._node(out_data, (a,), backward, "reshape")


def concat(tensors: list[Tensor], axis: int = 1) -> Tensor:
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    return Tensor._node(out_data, tuple(tensors), backward, "concat")


def upsample_nearest2(a: Tensor) -> Tensor:
    """Nearest-neighbor 2x upsampling of an NCHW tensor."""
    out_data = a.data.repeat(2, axis=2).repeat(2, axis=3)

    def backward(g):
        if a.requires_grad:
            n, c, h2, w2 = g.shape
            a._accumulate(g.reshape(n, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5)))

    return Tensor._node(out_data, (a,), backward, "upsample")


# -- convolution -------------------------------------------------------------


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    """(N, C, H, W) -> columns (N*OH*OW, C*KH*KW) plus the output extent."""
    n, c, h, w = x.shape
    if (h + 2 * pad - kh) % stride or (w + 2 * pad - kw) % stride:
        raise ValueError(
            f"conv geometry does not tile: input {h}x{w}, kernel {kh}, stride {stride}, pad {pad}"
        )
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]  # (N, C, OH, OW, KH, KW)
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    return np.ascontiguousarray(cols), oh, ow


def _conv_forward(x: np.ndarray, w: np.ndarray, stride: int, pad: int):
    n = x.shape[0]
    oc, _, kh, kw = w.shape
    cols, oh, ow = _im2col(x, kh, kw, stride, pad)
    out = cols @ w.reshape(oc, -1).T
    return out.reshape(n, oh, ow, oc).transpose(0, 3, 1, 2), cols, oh, ow


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D cross-correlation of an NCHW tensor with square OIHW kernels."""
    if w.data.shape[2] != w.data.shape[3]:
        raise ValueError("conv2d supports square kernels only")
    out_data, cols, oh, ow = _conv_forward(x.data, w.data, stride, pad)
    if b is not None:
        out_data = out_data + b.data.reshape(1, -1, 1, 1)
    n, c, h, wd = x.data.shape
    oc, _, kh, kw = w.data.shape

    def backward(g):
        g_cols = g.transpose(0, 2, 3, 1).reshape(n * oh * ow, oc)
        if w.requires_grad:
            w._accumulate((g_cols.T @ cols).reshape(w.data.shape))
        if b is not None and b.requires_grad:
            b._accumulate(g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            # backward-data as a stride-1 correlation with the flipped kernel
            if stride > 1:
                gd = np.zeros((n, oc, (oh - 1) * stride + 1, (ow - 1) * stride + 1), dtype=g.dtype)
                gd[:, :, ::stride, ::stride] = g
            else:
                gd = g
            w_flip = w.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
            dx, _, _, _ = _conv_forward(
                np.ascontiguousarray(gd), np.ascontiguousarray(w_flip), 1, max(kh, kw) - 1 - pad
            )
            x._accumulate(dx)

    parents = (x, w) if b is None else (x, w, b)
    return Tensor._node(out_data, parents, backward, "conv2d")


def instance_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-sample, per-channel normalization over the spatial axes.

    Batch-independent by construction, which keeps single-sample and
    batched forwards identical.
    """
    mu = x.data.mean(axis=(2, 3), keepdims=True)
    var = x.data.var(axis=(2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    gamma_b = gamma.data.reshape(1, -1, 1, 1)
    out_data = xhat * gamma_b + beta.data.reshape(1, -1, 1, 1)

    def backward(g):
        if gamma.requires_grad:
            gamma._accumulate((g * xhat).sum(axis=(0, 2, 3)))
        if beta.requires_grad:
            beta._accumulate(g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gh = g * gamma_b
            mean_gh = gh.mean(axis=(2, 3), keepdims=True)
            mean_gh_xhat = (gh * xhat).mean(axis=(2, 3), keepdims=True)
            x._accumulate(inv * (gh - mean_gh - xhat * mean_gh_xhat))

    return Tensor._node(out_data, (x, gamma, beta), backward, "instance_norm")
