# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Fused elementwise/rowwise kernels for the hot path.

Mirrors python_kernels exactly (same formulas, same accumulation order per
row) so the two backends agree to float rounding. Supports float32/float64.
"""

import numpy as np

cimport cython
from libc.math cimport exp, log, sqrt, tanh

ctypedef fused floating:
    float
    double

DEF GELU_C = 0.7978845608028654
DEF GELU_A = 0.044715


def gelu_fwd(floating[::1] x, floating[::1] out):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef floating v
    for i in range(n):
        v = x[i]
        out[i] = <floating>(0.5 * v * (1.0 + tanh(GELU_C * (v + GELU_A * v * v * v))))


def gelu_bwd(floating[::1] x, floating[::1] gout, floating[::1] gx):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double v, u, t, du
    for i in range(n):
        v = x[i]
        u = GELU_C * (v + GELU_A * v * v * v)
        t = tanh(u)
        du = GELU_C * (1.0 + 3.0 * GELU_A * v * v)
        gx[i] = <floating>(gout[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du))


def rmsnorm_fwd(floating[:, ::1] x, floating[::1] gain, double eps,
                floating[:, ::1] y, floating[:, ::1] inv_rms):
    cdef Py_ssize_t i, j, rows = x.shape[0], d = x.shape[1]
    cdef double acc, r
    for i in range(rows):
        acc = 0.0
        for j in range(d):
            acc += <double>x[i, j] * <double>x[i, j]
        r = 1.0 / sqrt(acc / d + eps)
        inv_rms[i, 0] = <floating>r
        for j in range(d):
            y[i, j] = <floating>(x[i, j] * r * gain[j])


def rmsnorm_bwd(floating[:, ::1] x, floating[::1] gain, floating[:, ::1] inv_rms,
                floating[:, ::1] gout, floating[:, ::1] gx, floating[::1] ggain):
    cdef Py_ssize_t i, j, rows = x.shape[0], d = x.shape[1]
    cdef double r, dot, gg
    for j in range(d):
        ggain[j] = 0
    for i in range(rows):
        r = inv_rms[i, 0]
        dot = 0.0
        for j in range(d):
            dot += <double>gout[i, j] * gain[j] * x[i, j]
        for j in range(d):
            gg = <double>gout[i, j] * gain[j]
            gx[i, j] = <floating>(r * gg - x[i, j] * (r * r * r / d) * dot)
            ggain[j] += <floating>(gout[i, j] * x[i, j] * r)


def rope_fwd(floating[:, :, :, ::1] x, floating[:, ::1] cos, floating[:, ::1] sin,
             floating[:, :, :, ::1] out):
    cdef Py_ssize_t b, s, h, i
    cdef Py_ssize_t nb = x.shape[0], ns = x.shape[1], nh = x.shape[2], half = x.shape[3] // 2
    cdef floating xe, xo, c, sn
    for b in range(nb):
        for s in range(ns):
            for h in range(nh):
                for i in range(half):
                    xe = x[b, s, h, 2 * i]
                    xo = x[b, s, h, 2 * i + 1]
                    c = cos[s, i]
                    sn = sin[s, i]
                    out[b, s, h, 2 * i] = xe * c - xo * sn
                    out[b, s, h, 2 * i + 1] = xe * sn + xo * c


def softmax_fwd(floating[:, ::1] x, floating[:, ::1] y):
    cdef Py_ssize_t i, j, rows = x.shape[0], cols = x.shape[1]
    cdef double m, acc
    for i in range(rows):
        m = x[i, 0]
        for j in range(1, cols):
            if x[i, j] > m:
                m = x[i, j]
        acc = 0.0
        for j in range(cols):
            y[i, j] = <floating>exp(x[i, j] - m)
            acc += y[i, j]
        for j in range(cols):
            y[i, j] = <floating>(y[i, j] / acc)


def softmax_bwd(floating[:, ::1] y, floating[:, ::1] gout, floating[:, ::1] gx):
    cdef Py_ssize_t i, j, rows = y.shape[0], cols = y.shape[1]
    cdef double dot
    for i in range(rows):
        dot = 0.0
        for j in range(cols):
            dot += <double>y[i, j] * gout[i, j]
        for j in range(cols):
            gx[i, j] = <floating>(y[i, j] * (gout[i, j] - dot))


def adamw_update(floating[::1] w, floating[::1] g, floating[::1] m, floating[::1] v,
                 double lr, double beta1, double beta2, double eps,
                 double weight_decay, double bc1, double bc2):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double mi, vi
    for i in range(n):
        mi = beta1 * m[i] + (1.0 - beta1) * g[i]
        vi = beta2 * v[i] + (1.0 - beta2) * (<double>g[i] * g[i])
        m[i] = <floating>mi
        v[i] = <floating>vi
        w[i] = <floating>(w[i] - lr * ((mi / bc1) / (sqrt(vi / bc2) + eps) + weight_decay * w[i]))
