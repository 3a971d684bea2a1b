"""Differentiable primitives.

Every function takes Tensors (or array-likes, promoted to constants) and
returns a Tensor.  Binary elementwise ops broadcast like numpy; gradients are
summed back over broadcast axes.  Nondifferentiable points use the left
branch: sign(0) = 0, d|x|/dx = 0 at 0, minimum(a, b) sends the gradient to
`a` on ties.
"""
from __future__ import annotations

import numpy as np

from .. import dsp
from .tensor import Tensor, as_tensor, make_output


def unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `g` down to `shape` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ----------------------------------------------------------------------------
# arithmetic

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")

    def vjp(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)
    return make_output(a.value + b.value, (a, b), vjp, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")

    def vjp(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)
    return make_output(a.value - b.value, (a, b), vjp, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")

    def vjp(g):
        ga = unbroadcast(g * b.value, a.shape) if a.requires_grad else None
        gb = unbroadcast(g * a.value, b.shape) if b.requires_grad else None
        return ga, gb
    return make_output(a.value * b.value, (a, b), vjp, "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    out = a.value / b.value

    def vjp(g):
        ga = unbroadcast(g / b.value, a.shape) if a.requires_grad else None
        gb = unbroadcast(-g * out / b.value, b.shape) if b.requires_grad else None
        return ga, gb
    return make_output(out, (a, b), vjp, "div")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return make_output(-a.value, (a,), lambda g: (-g,), "neg")


def matmul(a, b) -> Tensor:
    """Batched matrix product; both operands need at least two dimensions."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def vjp(g):
        ga = unbroadcast(g @ np.swapaxes(b.value, -1, -2), a.shape) if a.requires_grad else None
        gb = unbroadcast(np.swapaxes(a.value, -1, -2) @ g, b.shape) if b.requires_grad else None
        return ga, gb
    return make_output(a.value @ b.value, (a, b), vjp, "matmul")


# ----------------------------------------------------------------------------
# elementwise nonlinearities

def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.value > 0
    return make_output(np.where(mask, x.value, 0.0), (x,), lambda g: (g * mask,), "relu")


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.value)
    return make_output(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = 0.5 * (1.0 + np.tanh(0.5 * x.value))
    return make_output(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.value)
    return make_output(out, (x,), lambda g: (g * out,), "exp")


def log(x) -> Tensor:
    x = as_tensor(x)
    return make_output(np.log(x.value), (x,), lambda g: (g / x.value,), "log")


def log1p(x) -> Tensor:
    x = as_tensor(x)
    return make_output(np.log1p(x.value), (x,), lambda g: (g / (1.0 + x.value),), "log1p")


def abs(x) -> Tensor:  # noqa: A001 - mirrors numpy naming
    x = as_tensor(x)
    return make_output(np.abs(x.value), (x,), lambda g: (g * np.sign(x.value),), "abs")


def sign(x) -> Tensor:
    """Piecewise-constant; never carries gradient."""
    return Tensor(np.sign(as_tensor(x).value))


def square(x) -> Tensor:
    x = as_tensor(x)
    return make_output(x.value * x.value, (x,), lambda g: (2.0 * g * x.value,), "square")


def pow_abs(x, c: float) -> Tensor:
    """|x| ** c; gradient c |x|^(c-1) sign(x), taken as 0 at x = 0."""
    x = as_tensor(x)
    ax = np.abs(x.value)
    out = ax ** c

    def vjp(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(ax > 0, c * out / np.where(ax > 0, ax, 1.0), 0.0)
        return (g * d * np.sign(x.value),)
    return make_output(out, (x,), vjp, "pow_abs")


def minimum(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "minimum")
    pick_a = a.value <= b.value

    def vjp(g):
        ga = unbroadcast(np.where(pick_a, g, 0.0), a.shape) if a.requires_grad else None
        gb = unbroadcast(np.where(pick_a, 0.0, g), b.shape) if b.requires_grad else None
        return ga, gb
    return make_output(np.minimum(a.value, b.value), (a, b), vjp, "minimum")


def maximum0(x) -> Tensor:
    """max(0, x); alias of relu kept for readability in model code."""
    return relu(x)


def broken_stick(x, a, b, c, gain=1.0) -> Tensor:
    """sign(x) * min(gain * a * |x|, b * |x| ** c), fused.

    `a`, `b`, `c`, `gain` are constants broadcasting against x (e.g. one value
    per channel).  The linear branch wins ties, so the derivative at 0 is
    gain * a.
    """
    x = as_tensor(x)
    a, b, c, gain = (np.asarray(v, dtype=np.float64) for v in (a, b, c, gain))
    ax = np.abs(x.value)
    lin = gain * a * ax
    comp = b * ax ** c
    use_lin = lin <= comp
    out = np.sign(x.value) * np.where(use_lin, lin, comp)

    def vjp(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            d_comp = np.where(ax > 0, c * comp / np.where(ax > 0, ax, 1.0), 0.0)
        return (g * np.where(use_lin, gain * a, d_comp),)
    return make_output(out, (x,), vjp, "broken_stick")


# ----------------------------------------------------------------------------
# reductions

def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    axes = _norm_axis(axis, x.ndim)
    out = x.value.sum(axis=axes, keepdims=keepdims)

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape).copy(),)
    return make_output(out, (x,), vjp, "sum")


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _norm_axis(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    out = x.value.mean(axis=axes, keepdims=keepdims)

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, x.shape).copy(),)
    return make_output(out, (x,), vjp, "mean")


def standardize(x, eps: float = 1e-5) -> Tensor:
    """(x - mean) / sqrt(var + eps) over the last axis; the core of layer norm."""
    x = as_tensor(x)
    mu = x.value.mean(axis=-1, keepdims=True)
    xc = x.value - mu
    inv = 1.0 / np.sqrt(np.mean(xc * xc, axis=-1, keepdims=True) + eps)
    y = xc * inv

    def vjp(g):
        return (inv * (g - g.mean(axis=-1, keepdims=True) - y * np.mean(g * y, axis=-1, keepdims=True)),)
    return make_output(y, (x,), vjp, "standardize")


# ----------------------------------------------------------------------------
# shape manipulation

def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out = x.value.reshape(shape)
    return make_output(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x, axes) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return make_output(np.transpose(x.value, axes), (x,),
                       lambda g: (np.transpose(g, inv),), "transpose")


def swapaxes(x, a1: int, a2: int) -> Tensor:
    x = as_tensor(x)
    return make_output(np.swapaxes(x.value, a1, a2), (x,),
                       lambda g: (np.swapaxes(g, a1, a2),), "swapaxes")


def flip(x, axis: int) -> Tensor:
    x = as_tensor(x)
    return make_output(np.flip(x.value, axis), (x,), lambda g: (np.flip(g, axis),), "flip")


def _is_basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


def getitem(x, idx) -> Tensor:
    x = as_tensor(x)
    out = x.value[idx]
    basic = _is_basic_index(idx)

    def vjp(g):
        full = np.zeros_like(x.value)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        return (full,)
    return make_output(np.array(out, copy=True), (x,), vjp, "getitem")


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].ndim
    if any(t.ndim != ref for t in tensors):
        raise ValueError(f"concat: rank mismatch {[t.shape for t in tensors]}")
    axis = axis % ref
    for t in tensors[1:]:
        if t.shape[:axis] + t.shape[axis + 1:] != tensors[0].shape[:axis] + tensors[0].shape[axis + 1:]:
            raise ValueError(f"concat: incompatible shapes {tensors[0].shape} and {t.shape}")
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(
            np.take(g, np.arange(lo, hi), axis=axis) if t.requires_grad else None
            for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]))
    return make_output(np.concatenate([t.value for t in tensors], axis=axis), tensors, vjp, "concat")


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    return concat([reshape(t, t.shape[:axis % (t.ndim + 1)] + (1,) + t.shape[axis % (t.ndim + 1):])
                   for t in tensors], axis=axis)


# ----------------------------------------------------------------------------
# signal ops

def fir_conv(x, taps) -> Tensor:
    """Causal FIR filtering along the last axis with constant taps.

    `taps` is (L,) or (..., L); its leading axes broadcast against x's
    leading axes, so (C, L) taps applied to (B, 1, n) give (B, C, n).
    """
    x = as_tensor(x)
    taps = np.asarray(taps, dtype=np.float64)
    try:
        np.broadcast_shapes(x.shape[:-1], taps.shape[:-1])
    except ValueError:
        raise ValueError(f"fir_conv: signal {x.shape} and taps {taps.shape} do not broadcast") from None
    out = dsp.causal_conv(x.value, taps)

    def vjp(g):
        return (unbroadcast(dsp.causal_conv_adjoint(g, taps), x.shape),)
    return make_output(out, (x,), vjp, "fir_conv")


def stft(x, cfg: dsp.StftConfig = dsp.StftConfig()) -> Tensor:
    """STFT of the last axis; output (..., F, T, 2) holding real and imaginary parts."""
    x = as_tensor(x)
    length = x.shape[-1]
    spec = dsp.stft_array(x.value, cfg)

    def vjp(g):
        return (dsp.stft_adjoint(g[..., 0] + 1j * g[..., 1], length, cfg),)
    return make_output(np.stack([spec.real, spec.imag], axis=-1), (x,), vjp, "stft")


def istft(spec, length: int, cfg: dsp.StftConfig = dsp.StftConfig()) -> Tensor:
    """Inverse of `stft` for a (..., F, T, 2) real/imaginary tensor."""
    spec = as_tensor(spec)
    if spec.shape[-1] != 2:
        raise ValueError(f"istft expects a trailing real/imag axis of size 2, got {spec.shape}")
    out = dsp.istft_array(spec.value[..., 0] + 1j * spec.value[..., 1], length, cfg)

    def vjp(g):
        c = dsp.istft_adjoint(g, cfg)
        return (np.stack([c.real, c.imag], axis=-1),)
    return make_output(out, (spec,), vjp, "istft")
