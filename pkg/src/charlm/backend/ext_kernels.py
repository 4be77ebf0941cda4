"""Adapter exposing the compiled kernels behind the python_kernels API.

Shapes are normalized here (the .pyx kernels want contiguous 1D/2D/4D views);
anything the extension does not handle is routed to the numpy fallback.
"""

import numpy as np

from . import _fastcore
from . import python_kernels as _py

NAME = "ext"

_SUPPORTED = (np.float32, np.float64)


def _ok(*arrays):
    return all(a.dtype.type in _SUPPORTED for a in arrays)


# numpy's SIMD tanh beats the compiled scalar-libm loop by a wide margin on
# this op (it is bandwidth/tanh-bound, not loop-overhead-bound), so the
# "fast" backend routes gelu to the vectorized implementation. The compiled
# twins still exist and the benchmark script compares all three.
gelu_fwd = _py.gelu_fwd
gelu_bwd = _py.gelu_bwd


def rmsnorm_fwd(x, gain, eps):
    if not _ok(x, gain) or x.dtype != gain.dtype:
        return _py.rmsnorm_fwd(x, gain, eps)
    d = x.shape[-1]
    xc = np.ascontiguousarray(x).reshape(-1, d)
    y = np.empty_like(xc)
    inv_rms = np.empty((xc.shape[0], 1), dtype=xc.dtype)
    _fastcore.rmsnorm_fwd(xc, np.ascontiguousarray(gain), eps, y, inv_rms)
    shape = x.shape[:-1] + (1,)
    return y.reshape(x.shape), inv_rms.reshape(shape)


def rmsnorm_bwd(x, gain, inv_rms, gout):
    if not _ok(x, gain, inv_rms, gout) or len({x.dtype, gain.dtype, inv_rms.dtype, gout.dtype}) != 1:
        return _py.rmsnorm_bwd(x, gain, inv_rms, gout)
    d = x.shape[-1]
    xc = np.ascontiguousarray(x).reshape(-1, d)
    gc = np.ascontiguousarray(gout).reshape(-1, d)
    rc = np.ascontiguousarray(inv_rms).reshape(-1, 1)
    gx = np.empty_like(xc)
    ggain = np.empty_like(gain)
    _fastcore.rmsnorm_bwd(xc, np.ascontiguousarray(gain), rc, gc, gx, ggain)
    return gx.reshape(x.shape), ggain


def rope_fwd(x, cos, sin):
    if not _ok(x, cos, sin) or len({x.dtype, cos.dtype, sin.dtype}) != 1:
        return _py.rope_fwd(x, cos, sin)
    seq, heads, dh = x.shape[-3:]
    xc = np.ascontiguousarray(x).reshape(-1, seq, heads, dh)
    out = np.empty_like(xc)
    _fastcore.rope_fwd(xc, np.ascontiguousarray(cos), np.ascontiguousarray(sin), out)
    return out.reshape(x.shape)


# like gelu, the softmax forward is exp-bound and numpy's SIMD exp wins;
# the backward (multiply/reduce only) stays compiled
softmax_fwd = _py.softmax_fwd


def softmax_bwd(y, gout):
    if not _ok(y, gout) or y.dtype != gout.dtype:
        return _py.softmax_bwd(y, gout)
    cols = y.shape[-1]
    yc = np.ascontiguousarray(y).reshape(-1, cols)
    gc = np.ascontiguousarray(gout).reshape(-1, cols)
    gx = np.empty_like(yc)
    _fastcore.softmax_bwd(yc, gc, gx)
    return gx.reshape(y.shape)


cross_entropy_fwd = _py.cross_entropy_fwd
cross_entropy_bwd = _py.cross_entropy_bwd


# sqrt/divide-bound and fully vectorizable, so numpy also wins here
adamw_update = _py.adamw_update
