# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the fused kernels in ``_pykernels``.

Matrix products go straight to BLAS; the elementwise gate math runs in
single fused loops. Inputs whose dtypes disagree are handed to the numpy
reference so results never silently change precision.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expf, tanh, tanhf
from scipy.linalg.cython_blas cimport dgemm, sgemm

from . import _pykernels as _ref

cnp.import_array()

ctypedef fused real:
    float
    double

cdef double MASK_LOGIT = -1e9


cdef inline real _exp(real v) noexcept nogil:
    if real is float:
        return expf(v)
    else:
        return exp(v)


cdef inline real _tanh(real v) noexcept nogil:
    if real is float:
        return tanhf(v)
    else:
        return tanh(v)


cdef inline real _sig(real v) noexcept nogil:
    # clamped so exp stays finite; branch-free so the loops vectorize
    v = min(max(v, -80), 80)
    return 1 / (1 + _exp(-v))


cdef void _mm(real[:, ::1] a, bint ta, real[:, ::1] b, bint tb, real[:, ::1] c,
              real beta) noexcept nogil:
    """c = op(a) @ op(b) + beta * c for row-major arrays."""
    cdef int m = c.shape[0]
    cdef int n = c.shape[1]
    cdef int k = a.shape[0] if ta else a.shape[1]
    cdef int lda = a.shape[1]
    cdef int ldb = b.shape[1]
    cdef int ldc = n
    cdef char opa = b'T' if ta else b'N'
    cdef char opb = b'T' if tb else b'N'
    cdef real one = 1
    cdef int i, j
    if m == 0 or n == 0:
        return
    if k == 0:
        for i in range(m):
            for j in range(n):
                c[i, j] = beta * c[i, j]
        return
    # row-major C = A B is column-major C^T = B^T A^T
    if real is float:
        sgemm(&opb, &opa, &n, &m, &k, &one, &b[0, 0], &ldb, &a[0, 0], &lda, &beta, &c[0, 0], &ldc)
    else:
        dgemm(&opb, &opa, &n, &m, &k, &one, &b[0, 0], &ldb, &a[0, 0], &lda, &beta, &c[0, 0], &ldc)


def _same_float(*arrays):
    dt = arrays[0].dtype
    if dt != np.float32 and dt != np.float64:
        return False
    for a in arrays[1:]:
        if a.dtype != dt:
            return False
    return True


# -- sigmoid --------------------------------------------------------------------------------

cdef void _sigmoid_loop(real[::1] x, real[::1] y) noexcept nogil:
    for i in range(x.shape[0]):
        y[i] = _sig(x[i])


def sigmoid(x):
    x = np.asarray(x)
    if not _same_float(x):
        return _ref.sigmoid(x)
    xc = np.ascontiguousarray(x)
    out = np.empty_like(xc)
    if xc.dtype == np.float32:
        _sigmoid_loop[float](xc.reshape(-1), out.reshape(-1))
    else:
        _sigmoid_loop[double](xc.reshape(-1), out.reshape(-1))
    return out


# -- softmax --------------------------------------------------------------------------------

cdef void _softmax_rows(real[:, ::1] x, real scale, cnp.uint8_t[:, ::1] mask, bint masked,
                        real[:, ::1] y) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef Py_ssize_t rows = x.shape[0]
    cdef Py_ssize_t cols = x.shape[1]
    cdef real top, total, v
    cdef bint any_ok
    for i in range(rows):
        any_ok = not masked
        top = <real>MASK_LOGIT
        for j in range(cols):
            if masked and not mask[i, j]:
                v = <real>MASK_LOGIT
            else:
                v = x[i, j] * scale
                any_ok = True
            y[i, j] = v
            if j == 0 or v > top:
                top = v
        if not any_ok:
            for j in range(cols):
                y[i, j] = 0
            continue
        total = 0
        for j in range(cols):
            v = _exp(y[i, j] - top)
            y[i, j] = v
            total = total + v
        for j in range(cols):
            y[i, j] = y[i, j] / total


def masked_softmax(x, scale, mask):
    x = np.asarray(x)
    if not _same_float(x) or x.ndim == 0 or x.shape[x.ndim - 1] == 0:
        return _ref.masked_softmax(x, scale, mask)
    shape = x.shape
    x2 = np.ascontiguousarray(x).reshape(-1, shape[len(shape) - 1])
    y = np.empty_like(x2)
    masked = mask is not None
    if masked:
        m2 = np.ascontiguousarray(np.broadcast_to(mask, shape), dtype=np.uint8).reshape(-1, shape[len(shape) - 1])
    else:
        m2 = np.zeros((1, 1), dtype=np.uint8)
    if x2.dtype == np.float32:
        _softmax_rows[float](x2, scale, m2, masked, y)
    else:
        _softmax_rows[double](x2, scale, m2, masked, y)
    return y.reshape(shape)


cdef void _softmax_back_rows(real[:, ::1] y, real[:, ::1] g, real scale, real[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef real dot
    for i in range(y.shape[0]):
        dot = 0
        for j in range(y.shape[1]):
            dot = dot + g[i, j] * y[i, j]
        for j in range(y.shape[1]):
            out[i, j] = scale * y[i, j] * (g[i, j] - dot)


def softmax_backward(y, g, scale):
    y = np.asarray(y)
    g = np.asarray(g)
    if not _same_float(y, g) or y.shape != g.shape or y.ndim == 0 or y.shape[y.ndim - 1] == 0:
        return _ref.softmax_backward(y, g, scale)
    shape = y.shape
    y2 = np.ascontiguousarray(y).reshape(-1, shape[len(shape) - 1])
    g2 = np.ascontiguousarray(g).reshape(-1, shape[len(shape) - 1])
    out = np.empty_like(y2)
    if y2.dtype == np.float32:
        _softmax_back_rows[float](y2, g2, scale, out)
    else:
        _softmax_back_rows[double](y2, g2, scale, out)
    return out.reshape(shape)


# -- GRU --------------------------------------------------------------------------------------

cdef inline void _bias_sigmoid(real* y, real* b, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t j
    for j in range(n):
        y[j] = _sig(y[j] + b[j])


cdef inline void _bias_tanh(real* y, real* b, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t j
    for j in range(n):
        y[j] = _tanh(y[j] + b[j])


cdef void _gru_fwd(real[:, ::1] xh, real[:, ::1] xrh, real[:, ::1] w_z, real[:, ::1] w_r,
                   real[:, ::1] w_h, real[::1] b_z, real[::1] b_r, real[::1] b_h,
                   real[:, ::1] z, real[:, ::1] r, real[:, ::1] n, real[:, ::1] out,
                   Py_ssize_t n_in) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef Py_ssize_t rows = xh.shape[0]
    cdef Py_ssize_t hid = z.shape[1]
    cdef real *zp
    cdef real *rp
    cdef real *np_
    cdef real *hp
    cdef real *op
    cdef real *xp
    _mm(xh, False, w_z, False, z, 0)
    _mm(xh, False, w_r, False, r, 0)
    for i in range(rows):
        zp = &z[i, 0]
        rp = &r[i, 0]
        _bias_sigmoid(zp, &b_z[0], hid)
        _bias_sigmoid(rp, &b_r[0], hid)
        hp = &xh[i, n_in]
        xp = &xrh[i, n_in]
        for j in range(hid):
            xp[j] = rp[j] * hp[j]
    _mm(xrh, False, w_h, False, n, 0)
    for i in range(rows):
        np_ = &n[i, 0]
        _bias_tanh(np_, &b_h[0], hid)
        zp = &z[i, 0]
        hp = &xh[i, n_in]
        op = &out[i, 0]
        for j in range(hid):
            op[j] = hp[j] + zp[j] * (np_[j] - hp[j])


def gru_forward(x, h, w_z, w_r, w_h, b_z, b_r, b_h):
    if not _same_float(x, h, w_z, w_r, w_h, b_z, b_r, b_h):
        return _ref.gru_forward(x, h, w_z, w_r, w_h, b_z, b_r, b_h)
    rows, n_in = x.shape
    hid = h.shape[1]
    dt = x.dtype
    xh = np.empty((rows, n_in + hid), dtype=dt)
    xh[:, :n_in] = x
    xh[:, n_in:] = h
    xrh = np.empty_like(xh)
    xrh[:, :n_in] = x  # the r*h half is filled by the kernel
    z = np.empty((rows, hid), dtype=dt)
    r = np.empty_like(z)
    n = np.empty_like(z)
    out = np.empty_like(z)
    args = (xh, xrh, np.ascontiguousarray(w_z), np.ascontiguousarray(w_r), np.ascontiguousarray(w_h),
            np.ascontiguousarray(b_z), np.ascontiguousarray(b_r), np.ascontiguousarray(b_h), z, r, n, out)
    if dt == np.float32:
        _gru_fwd[float](*args, n_in)
    else:
        _gru_fwd[double](*args, n_in)
    return out, (xh, xrh, z, r, n, np.ascontiguousarray(h))


cdef void _gru_bwd(real[:, ::1] g, real[:, ::1] xh, real[:, ::1] xrh, real[:, ::1] z,
                   real[:, ::1] r, real[:, ::1] n, real[:, ::1] h,
                   real[:, ::1] w_z, real[:, ::1] w_r, real[:, ::1] w_h,
                   real[:, ::1] dan, real[:, ::1] daz, real[:, ::1] dar,
                   real[:, ::1] dxrh, real[:, ::1] dxh, real[:, ::1] dx, real[:, ::1] dh,
                   real[:, ::1] dwz, real[:, ::1] dwr, real[:, ::1] dwh,
                   real[::1] dbz, real[::1] dbr, real[::1] dbh, Py_ssize_t n_in) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef Py_ssize_t rows = g.shape[0]
    cdef Py_ssize_t hid = g.shape[1]
    cdef real gv, zv, nv, hv, rv, drh
    for i in range(rows):
        for j in range(hid):
            gv = g[i, j]
            zv = z[i, j]
            nv = n[i, j]
            hv = h[i, j]
            dan[i, j] = gv * zv * (1 - nv * nv)
            daz[i, j] = gv * (nv - hv) * zv * (1 - zv)
            dh[i, j] = gv * (1 - zv)
    _mm(dan, False, w_h, True, dxrh, 0)
    for i in range(rows):
        for j in range(hid):
            rv = r[i, j]
            drh = dxrh[i, n_in + j]
            dh[i, j] = dh[i, j] + drh * rv
            dar[i, j] = drh * h[i, j] * rv * (1 - rv)
    _mm(daz, False, w_z, True, dxh, 0)
    _mm(dar, False, w_r, True, dxh, 1)
    for i in range(rows):
        for j in range(n_in):
            dx[i, j] = dxrh[i, j] + dxh[i, j]
        for j in range(hid):
            dh[i, j] = dh[i, j] + dxh[i, n_in + j]
    _mm(xh, True, daz, False, dwz, 0)
    _mm(xh, True, dar, False, dwr, 0)
    _mm(xrh, True, dan, False, dwh, 0)
    for j in range(hid):
        dbz[j] = 0
        dbr[j] = 0
        dbh[j] = 0
    for i in range(rows):
        for j in range(hid):
            dbz[j] = dbz[j] + daz[i, j]
            dbr[j] = dbr[j] + dar[i, j]
            dbh[j] = dbh[j] + dan[i, j]


def gru_backward(g, cache, w_z, w_r, w_h):
    xh, xrh, z, r, n, h = cache
    if not _same_float(g, xh, xrh, z, r, n, h, w_z, w_r, w_h):
        return _ref.gru_backward(g, cache, w_z, w_r, w_h)
    rows, hid = z.shape
    width = xh.shape[1]
    n_in = width - hid
    dt = z.dtype
    dan = np.empty((rows, hid), dtype=dt)
    daz = np.empty_like(dan)
    dar = np.empty_like(dan)
    dh = np.empty_like(dan)
    dxrh = np.empty((rows, width), dtype=dt)
    dxh = np.empty_like(dxrh)
    dx = np.empty((rows, n_in), dtype=dt)
    dwz = np.empty((width, hid), dtype=dt)
    dwr = np.empty_like(dwz)
    dwh = np.empty_like(dwz)
    dbz = np.empty(hid, dtype=dt)
    dbr = np.empty_like(dbz)
    dbh = np.empty_like(dbz)
    args = (np.ascontiguousarray(g), xh, xrh, z, r, n, h,
            np.ascontiguousarray(w_z), np.ascontiguousarray(w_r), np.ascontiguousarray(w_h),
            dan, daz, dar, dxrh, dxh, dx, dh, dwz, dwr, dwh, dbz, dbr, dbh)
    if dt == np.float32:
        _gru_bwd[float](*args, n_in)
    else:
        _gru_bwd[double](*args, n_in)
    return dx, dh, dwz, dwr, dwh, dbz, dbr, dbh
