"""Reference numpy implementations of the fused kernels.

Used when the compiled extension is unavailable or disabled with
``COMMLAB_PURE_PYTHON=1``. The compiled module exposes the same functions.
"""

import numpy as np

MASK_LOGIT = -1e9


def sigmoid(x):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def masked_softmax(x, scale, mask):
    z = x * x.dtype.type(scale)
    if mask is not None:
        z = np.where(mask, z, x.dtype.type(MASK_LOGIT))
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    y = e / e.sum(axis=-1, keepdims=True)
    if mask is not None:
        y *= mask.any(axis=-1, keepdims=True)
    return y


def softmax_backward(y, g, scale):
    return y.dtype.type(scale) * y * (g - (g * y).sum(axis=-1, keepdims=True))


def gru_forward(x, h, w_z, w_r, w_h, b_z, b_r, b_h):
    xh = np.concatenate([x, h], axis=1)
    z = sigmoid(xh @ w_z + b_z)
    r = sigmoid(xh @ w_r + b_r)
    xrh = np.concatenate([x, r * h], axis=1)
    n = np.tanh(xrh @ w_h + b_h)
    out = h + z * (n - h)
    return out, (xh, xrh, z, r, n, h)


def gru_backward(g, cache, w_z, w_r, w_h):
    xh, xrh, z, r, n, h = cache
    n_in = xh.shape[1] - h.shape[1]
    dan = g * z * (1 - n * n)
    dz = g * (n - h)
    dh = g * (1 - z)
    dxrh = dan @ w_h.T
    drh = dxrh[:, n_in:]
    dh += drh * r
    daz = dz * z * (1 - z)
    dar = drh * h * r * (1 - r)
    dxh = daz @ w_z.T + dar @ w_r.T
    dx = dxrh[:, :n_in] + dxh[:, :n_in]
    dh += dxh[:, n_in:]
    return (dx, dh, xh.T @ daz, xh.T @ dar, xrh.T @ dan,
            daz.sum(axis=0), dar.sum(axis=0), dan.sum(axis=0))
