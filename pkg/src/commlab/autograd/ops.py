"""Differentiable ops over :class:`Tensor`.

Shapes are explicit: binary elementwise ops require equal shapes, and the
only broadcast is :func:`add_bias` over leading dimensions.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import kernels
from .tensor import DimensionError, DomainError, Tensor, as_tensor

MASK_LOGIT = -1e9


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


# -- arithmetic -------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    return Tensor._result(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    return Tensor._result(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return Tensor._result(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def scale(a: Tensor, s: float) -> Tensor:
    dt = a.data.dtype.type
    return Tensor._result(a.data * dt(s), (a,), lambda g: (g * dt(s),), "scale")


def add_scalar(a: Tensor, s: float) -> Tensor:
    return Tensor._result(a.data + a.data.dtype.type(s), (a,), lambda g: (g,), "add_scalar")


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """``x + b`` with ``b`` of shape ``x.shape[-1:]`` broadcast over leading dims."""
    if b.shape != x.shape[-1:]:
        raise DimensionError(f"add_bias: bias {b.shape} does not match trailing dim of {x.shape}")
    lead = tuple(range(x.ndim - 1))
    return Tensor._result(x.data + b.data, (x, b), lambda g: (g, g.sum(axis=lead)), "add_bias")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions {a.shape} x {b.shape} disagree")
    ad, bd = a.data, b.data

    def back(g):
        return (g @ bd.T if a.requires_grad else None, ad.T @ g if b.requires_grad else None)

    return Tensor._result(ad @ bd, (a, b), back, "matmul")


def bmm(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product of ``[B, m, k]`` and ``[B, k, n]``."""
    if a.ndim != 3 or b.ndim != 3 or a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
        raise DimensionError(f"bmm: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def back(g):
        ga = np.matmul(g, bd.transpose(0, 2, 1)) if a.requires_grad else None
        gb = np.matmul(ad.transpose(0, 2, 1), g) if b.requires_grad else None
        return ga, gb

    return Tensor._result(np.matmul(ad, bd), (a, b), back, "bmm")


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ w + b`` for 2-D ``x``; one tape node instead of three."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise DimensionError(f"linear: input {x.shape} does not match weight {w.shape}")
    xd, wd = x.data, w.data
    out = xd @ wd
    if b is not None:
        if b.shape != (w.shape[1],):
            raise DimensionError(f"linear: bias {b.shape} does not match weight {w.shape}")
        out = out + b.data

        def back(g):
            return (g @ wd.T if x.requires_grad else None,
                    xd.T @ g if w.requires_grad else None,
                    g.sum(axis=0))

        return Tensor._result(out, (x, w, b), back, "linear")

    def back_nb(g):
        return (g @ wd.T if x.requires_grad else None, xd.T @ g if w.requires_grad else None)

    return Tensor._result(out, (x, w), back_nb, "linear")


# -- elementwise nonlinearities --------------------------------------------

def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return Tensor._result(y, (x,), lambda g: (g * (1 - y * y),), "tanh")


def sigmoid(x: Tensor) -> Tensor:
    y = kernels.sigmoid(x.data)
    return Tensor._result(y, (x,), lambda g: (g * y * (1 - y),), "sigmoid")


def relu(x: Tensor) -> Tensor:
    pos = x.data > 0
    return Tensor._result(np.where(pos, x.data, 0).astype(x.data.dtype), (x,),
                          lambda g: (g * pos,), "relu")


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise DomainError("log of a non-positive value")
    xd = x.data
    return Tensor._result(np.log(xd), (x,), lambda g: (g / xd,), "log")


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    return Tensor._result(y, (x,), lambda g: (g * y,), "exp")


def elementwise(x: Tensor, kind: str, other: Tensor | None = None) -> Tensor:
    """Dispatch by name: tanh, sigmoid, relu, log, exp, mul, add, sub."""
    unary = {"tanh": tanh, "sigmoid": sigmoid, "relu": relu, "log": log, "exp": exp}
    binary = {"mul": mul, "add": add, "sub": sub}
    if kind in unary:
        return unary[kind](x)
    if kind in binary:
        if other is None:
            raise DimensionError(f"{kind} needs a second operand")
        return binary[kind](x, other)
    raise ValueError(f"unknown elementwise kind {kind!r}")


# -- softmax family ----------------------------------------------------------

def softmax(x: Tensor, scale: float = 1.0, mask: np.ndarray | None = None) -> Tensor:
    """Softmax over the last axis of ``scale * x``.

    ``mask`` (boolean, same shape) marks admissible entries; the rest get
    logit ``MASK_LOGIT`` and come out as exact zeros. Rows with no admissible
    entry produce all zeros.
    """
    if scale <= 0:
        raise ValueError("softmax scale must be positive")
    if x.shape[-1] < 1:
        raise DimensionError("softmax over an empty axis")
    if mask is not None and mask.shape != x.shape:
        raise DimensionError(f"softmax mask {mask.shape} does not match {x.shape}")
    y = kernels.masked_softmax(x.data, float(scale), mask)

    def back(g):
        return (kernels.softmax_backward(y, g, float(scale)),)

    return Tensor._result(y, (x,), back, "softmax")


def log_softmax(x: Tensor) -> Tensor:
    xd = x.data
    m = xd.max(axis=-1, keepdims=True)
    z = xd - m
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    y = z - lse
    p = np.exp(y)

    def back(g):
        return (g - p * g.sum(axis=-1, keepdims=True),)

    return Tensor._result(y, (x,), back, "log_softmax")


# -- reductions and reshaping ----------------------------------------------

def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    shape = x.shape

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        gk = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gk, shape).copy(),)

    return Tensor._result(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), back, "sum")


def mean(x: Tensor, axis=None) -> Tensor:
    n = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return scale(sum(x, axis=axis), 1.0 / float(n))


def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    axis = axis % xs[0].ndim
    for t in xs[1:]:
        if t.ndim != xs[0].ndim or any(
            t.shape[d] != xs[0].shape[d] for d in range(t.ndim) if d != axis
        ):
            raise DimensionError(f"concat: incompatible shapes {[t.shape for t in xs]}")
    sizes = [t.shape[axis] for t in xs]
    cuts = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, cuts, axis=axis))

    return Tensor._result(np.concatenate([t.data for t in xs], axis=axis), tuple(xs), back, "concat")


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    return Tensor._result(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def transpose(x: Tensor) -> Tensor:
    """Swap the last two axes."""
    return Tensor._result(np.swapaxes(x.data, -1, -2), (x,),
                          lambda g: (np.swapaxes(g, -1, -2),), "transpose")


def index(x: Tensor, idx) -> Tensor:
    shape, dtype = x.shape, x.data.dtype

    def back(g):
        out = np.zeros(shape, dtype=dtype)
        np.add.at(out, idx, g)
        return (out,)

    return Tensor._result(np.array(x.data[idx]), (x,), back, "index")


def gather(x: Tensor, idx: np.ndarray) -> Tensor:
    """``out[..., ] = x[..., idx[...]]`` picking one entry per row of the last axis."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.shape != x.shape[:-1]:
        raise DimensionError(f"gather: index {idx.shape} does not match {x.shape[:-1]}")
    ie = idx[..., None]
    shape, dtype = x.shape, x.data.dtype

    def back(g):
        out = np.zeros(shape, dtype=dtype)
        np.put_along_axis(out, ie, g[..., None], axis=-1)
        return (out,)

    return Tensor._result(np.take_along_axis(x.data, ie, axis=-1)[..., 0], (x,), back, "gather")


def detach(x: Tensor) -> Tensor:
    return x.detach()


def constant(x) -> Tensor:
    return Tensor(x)


# -- fused recurrent cell ----------------------------------------------------

def gru_cell(x: Tensor, h: Tensor, w_z: Tensor, w_r: Tensor, w_h: Tensor,
             b_z: Tensor, b_r: Tensor, b_h: Tensor) -> Tensor:
    """One GRU step as a single tape node.

    z = sigmoid([x, h] W_z + b_z), r = sigmoid([x, h] W_r + b_r),
    n = tanh([x, r*h] W_h + b_h), h' = (1 - z) * h + z * n.
    """
    if x.ndim != 2 or h.ndim != 2 or x.shape[0] != h.shape[0]:
        raise DimensionError(f"gru_cell: input {x.shape} and state {h.shape} disagree")
    n_in, n_hid = x.shape[1], h.shape[1]
    for w in (w_z, w_r, w_h):
        if w.shape != (n_in + n_hid, n_hid):
            raise DimensionError(f"gru_cell: weight {w.shape} != {(n_in + n_hid, n_hid)}")
    for b in (b_z, b_r, b_h):
        if b.shape != (n_hid,):
            raise DimensionError(f"gru_cell: bias {b.shape} != {(n_hid,)}")
    out, cache = kernels.gru_forward(x.data, h.data, w_z.data, w_r.data, w_h.data,
                                     b_z.data, b_r.data, b_h.data)

    def back(g):
        return kernels.gru_backward(g, cache, w_z.data, w_r.data, w_h.data)

    return Tensor._result(out, (x, h, w_z, w_r, w_h, b_z, b_r, b_h), back, "gru_cell")


__all__ = [
    "add", "sub", "mul", "scale", "add_scalar", "add_bias", "matmul", "bmm", "linear",
    "tanh", "sigmoid", "relu", "log", "exp", "elementwise", "softmax", "log_softmax",
    "sum", "mean", "concat", "reshape", "transpose", "index", "gather", "detach",
    "constant", "gru_cell", "as_tensor",
]
