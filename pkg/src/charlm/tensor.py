"""Dense ≤4-axis tensors with reverse-mode automatic differentiation.

The op set is exactly what the transformer needs: matmul, a small elementwise
family, last-axis softmax, fused rmsnorm / rotary rotation / cross-entropy,
plus shape plumbing (reshape, transpose, embedding gather, reductions).

Conventions:
  * float32 is "full" precision, float16 is a storage class only — every
    kernel upcasts halves to float32, computes, and stores back down.
    float64 is supported end-to-end for high-accuracy verification.
  * Gradients live in float32 (float64 graphs get float64 gradients).
  * Any op whose output contains NaN/Inf raises NumericsError naming the op.
"""

import numpy as np

from .backend import kernels as K
from .errors import ContractError, DataError, DimensionError, NumericsError

MAX_AXES = 4

HALF = np.float16
FULL = np.float32


class Tensor:
    """Array value, optionally attached to a tape node."""

    __slots__ = ("data", "node", "grad", "trainable")

    def __init__(self, data, node=None, trainable=False):
        data = np.asarray(data)
        if data.ndim > MAX_AXES:
            raise DimensionError(f"tensors are limited to {MAX_AXES} axes, got {data.ndim}")
        self.data = data
        self.node = node
        self.grad = None
        self.trainable = trainable

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, node={self.node})"


class _Record:
    __slots__ = ("op", "inputs", "out", "fn")

    def __init__(self, op, inputs, out, fn):
        self.op = op
        self.inputs = inputs
        self.out = out
        self.fn = fn


class Tape:
    """Ordered record of executed ops; replayed in reverse by backward()."""

    def __init__(self):
        self.records = []
        self.leaves = {}
        self._counter = 0

    def _new_node(self):
        self._counter += 1
        return self._counter

    def leaf(self, array, trainable=False):
        t = Tensor(array, node=self._new_node(), trainable=trainable)
        self.leaves[t.node] = t
        return t

    def watch(self, tensor, trainable=True):
        if tensor.node is None:
            tensor.node = self._new_node()
        tensor.trainable = trainable
        self.leaves[tensor.node] = tensor
        return tensor


def _check_finite(op, arr):
    # min+max reductions instead of isfinite(arr).all(): no bool temporary,
    # and NaN propagates through both so nothing slips past
    if arr.dtype.kind == "f":
        lo, hi = np.min(arr), np.max(arr)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise NumericsError(op)


def _emit(tape, op, out_data, inputs, fn):
    _check_finite(op, out_data)
    out = Tensor(out_data)
    if tape is not None:
        in_nodes = [t.node for t in inputs]
        if any(n is not None for n in in_nodes):
            out.node = tape._new_node()
            tape.records.append(_Record(op, in_nodes, out.node, fn))
    return out


def _up(arr):
    """Upcast half-precision storage to float32 for compute."""
    return arr.astype(np.float32) if arr.dtype == HALF else arr


def _store(arr, *input_dtypes):
    """Cast a compute-precision result to the storage class of its inputs."""
    if any(dt == HALF for dt in input_dtypes):
        return arr.astype(HALF)
    return arr


def _grad_dtype(*dtypes):
    return np.float64 if any(dt == np.float64 for dt in dtypes) else np.float32


def _unbroadcast(g, shape):
    """Sum a gradient down to `shape` after trailing-axis broadcast."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, (ge, se) in enumerate(zip(g.shape, shape)):
        if se == 1 and ge != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _broadcast_ok(sa, sb):
    small, big = (sa, sb) if len(sa) <= len(sb) else (sb, sa)
    tail = big[len(big) - len(small):]
    return all(s == t or s == 1 or t == 1 for s, t in zip(small, tail))


# ---------------------------------------------------------------------------
# binary elementwise

def add(a, b, tape=None):
    if not _broadcast_ok(a.shape, b.shape):
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} do not broadcast")
    out = _store(_up(a.data) + _up(b.data), a.dtype, b.dtype)
    sa, sb = a.shape, b.shape

    def fn(g):
        return [_unbroadcast(g, sa), _unbroadcast(g, sb)]

    return _emit(tape, "add", out, [a, b], fn)


def mul(a, b, tape=None):
    if not _broadcast_ok(a.shape, b.shape):
        raise DimensionError(f"mul: shapes {a.shape} and {b.shape} do not broadcast")
    out = _store(_up(a.data) * _up(b.data), a.dtype, b.dtype)
    ad, bd = a.data, b.data

    def fn(g):
        return [_unbroadcast(g * _up(bd), a.shape), _unbroadcast(g * _up(ad), b.shape)]

    return _emit(tape, "mul", out, [a, b], fn)


def scale(a, c, tape=None):
    c = float(c)
    out = _store(_up(a.data) * c, a.dtype)

    def fn(g):
        return [g * c]

    return _emit(tape, "scale", out, [a], fn)


# ---------------------------------------------------------------------------
# unary elementwise

def gelu(a, tape=None):
    x = _up(a.data)
    out = _store(K.gelu_fwd(x), a.dtype)
    saved = a.data

    def fn(g):
        return [K.gelu_bwd(_up(saved), g)]

    return _emit(tape, "gelu", out, [a], fn)


def exp(a, tape=None):
    y = np.exp(_up(a.data))
    out = _store(y, a.dtype)

    def fn(g):
        return [g * _up(out)]

    r = _emit(tape, "exp", out, [a], fn)
    return r


def rsqrt(a, tape=None):
    x = _up(a.data)
    y = 1.0 / np.sqrt(x)
    out = _store(y, a.dtype)

    def fn(g):
        xs = _up(out)
        return [g * (-0.5) * xs * xs * xs]

    return _emit(tape, "reciprocal-sqrt", out, [a], fn)


ELEMENTWISE = {
    "add": add,
    "mul": mul,
    "scale": scale,
    "gelu": gelu,
    "exp": exp,
    "reciprocal-sqrt": rsqrt,
}


def elementwise(op, *args, tape=None):
    """Dispatch by op name; `args` are the op's positional inputs."""
    try:
        f = ELEMENTWISE[op]
    except KeyError:
        raise ContractError(f"unknown elementwise op '{op}'") from None
    return f(*args, tape=tape)


# ---------------------------------------------------------------------------
# matmul

def _swap(arr):
    return np.swapaxes(arr, -1, -2)


def matmul(a, b, tape=None):
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise DimensionError("matmul operands need at least 2 axes")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: inner extents differ, {a.shape} vs {b.shape}")
    ad, bd = a.data, b.data
    out = _store(np.matmul(_up(ad), _up(bd)), a.dtype, b.dtype)

    def fn(g):
        ga = _unbroadcast(np.matmul(g, _swap(_up(bd))), a.shape)
        gb = _unbroadcast(np.matmul(_swap(_up(ad)), g), b.shape)
        return [ga, gb]

    return _emit(tape, "matmul", out, [a, b], fn)


# ---------------------------------------------------------------------------
# softmax / fused transformer kernels

def softmax_lastaxis(a, tape=None):
    y = K.softmax_fwd(_up(a.data))
    saved = _store(y, a.dtype)

    def fn(g):
        return [K.softmax_bwd(_up(saved), g)]

    return _emit(tape, "softmax", saved, [a], fn)


def rmsnorm(x, gain, eps=1e-5, tape=None):
    if gain.shape != x.shape[-1:]:
        raise DimensionError(f"rmsnorm: gain shape {gain.shape} does not match feature axis {x.shape[-1:]}")
    xc, gc = _up(x.data), _up(gain.data)
    y, inv_rms = K.rmsnorm_fwd(xc, gc, eps)
    out = _store(y, x.dtype)
    saved_x = x.data

    def fn(g):
        gx, ggain = K.rmsnorm_bwd(_up(saved_x), gc, inv_rms, g)
        return [gx, ggain]

    return _emit(tape, "rmsnorm", out, [x, gain], fn)


def rope_tables(positions, d_head, base, dtype=np.float32):
    """cos/sin tables of shape (len(positions), d_head/2)."""
    if d_head % 2 != 0:
        raise DimensionError("rotary embedding needs an even head width")
    half = d_head // 2
    inv_freq = base ** (-2.0 * np.arange(half, dtype=np.float64) / d_head)
    ang = np.asarray(positions, dtype=np.float64)[:, None] * inv_freq[None, :]
    return np.cos(ang).astype(dtype), np.sin(ang).astype(dtype)


def rope(x, positions, base=10000.0, context_len=None, tape=None):
    """Rotate query/key dimension pairs by position-proportional angles.

    x: (..., seq, heads, d_head); positions: one index per sequence slot.
    """
    positions = np.asarray(positions)
    if context_len is not None and positions.size and int(positions.max()) >= context_len:
        raise ContractError("rotary position beyond the configured context window")
    dh = x.shape[-1]
    cdtype = np.float64 if x.dtype == np.float64 else np.float32
    cos, sin = rope_tables(positions, dh, base, dtype=cdtype)
    out = _store(K.rope_fwd(_up(x.data), cos, sin), x.dtype)

    def fn(g):
        # rotation is orthogonal: backward = rotate by the negated angles
        return [K.rope_fwd(g, cos, -sin)]

    return _emit(tape, "rope", out, [x], fn)


def embedding(table, ids, tape=None):
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise DataError("token id out of range for embedding table")
    out = table.data[ids]
    tshape = table.shape

    def fn(g):
        gt = np.zeros(tshape, dtype=g.dtype)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, tshape[1]))
        return [gt]

    return _emit(tape, "embedding", out, [table], fn)


def cross_entropy(logits, targets, tape=None):
    """Mean token-level negative log-likelihood, stable via log-sum-exp."""
    targets = np.asarray(targets)
    vocab = logits.shape[-1]
    if targets.size and (targets.min() < 0 or targets.max() >= vocab):
        raise DataError("target id out of range")
    flat = _up(logits.data).reshape(-1, vocab)
    tflat = targets.reshape(-1).astype(np.int64)
    loss, probs = K.cross_entropy_fwd(flat, tflat)
    out = np.asarray(loss, dtype=probs.dtype)
    lshape = logits.shape

    def fn(g):
        gx = K.cross_entropy_bwd(probs, tflat, float(g))
        return [gx.reshape(lshape)]

    return _emit(tape, "cross-entropy", out, [logits], fn)


# ---------------------------------------------------------------------------
# shape plumbing and reductions

def reshape(a, shape, tape=None):
    old = a.shape
    out = a.data.reshape(shape)

    def fn(g):
        return [g.reshape(old)]

    return _emit(tape, "reshape", out, [a], fn)


def transpose(a, axes, tape=None):
    out = np.ascontiguousarray(np.transpose(a.data, axes))
    inv = np.argsort(axes)

    def fn(g):
        return [np.ascontiguousarray(np.transpose(g, inv))]

    return _emit(tape, "transpose", out, [a], fn)


def sum_all(a, tape=None):
    out = np.asarray(_up(a.data).sum())
    shape = a.shape

    def fn(g):
        return [np.full(shape, float(g), dtype=g.dtype)]

    return _emit(tape, "sum", out, [a], fn)


def mean_all(a, tape=None):
    n = a.data.size
    out = np.asarray(_up(a.data).mean())
    shape = a.shape

    def fn(g):
        return [np.full(shape, float(g) / n, dtype=g.dtype)]

    return _emit(tape, "mean", out, [a], fn)


def cast(a, dtype, tape=None):
    out = a.data.astype(dtype)

    def fn(g):
        return [g]

    return _emit(tape, "cast", out, [a], fn)


def tape_activation_bytes(tape):
    """Bytes of forward activations the tape keeps alive for backward.

    Walks every record's backward closure and sums the unique ndarrays it
    captured (deduplicated through views to their base buffer).
    """
    seen = {}
    for rec in tape.records:
        cells = rec.fn.__closure__ or ()
        for cell in cells:
            v = cell.cell_contents
            if isinstance(v, Tensor):
                v = v.data
            if isinstance(v, np.ndarray):
                base = v.base if v.base is not None else v
                seen[id(base)] = base.nbytes
    # leaf parameters are accounted separately by callers
    for leaf in tape.leaves.values():
        base = leaf.data.base if leaf.data.base is not None else leaf.data
        seen.pop(id(base), None)
    return sum(seen.values())


# ---------------------------------------------------------------------------
# reverse pass

def backward(tape, loss, seed=1.0):
    """Propagate d(loss)/d(leaf) to every leaf registered on `tape`.

    Trainable leaves get `.grad` set (zeros when disconnected from the loss).
    `seed` scales the whole gradient; loss scaling plugs in here.
    """
    if loss.data.size != 1:
        raise ContractError("backward requires a scalar loss")
    if loss.node is None:
        raise ContractError("loss is not connected to this tape")
    gdt = _grad_dtype(loss.dtype)
    grads = {loss.node: np.full(loss.data.shape, seed, dtype=gdt)}
    for rec in reversed(tape.records):
        g = grads.pop(rec.out, None)
        if g is None:
            continue
        contribs = rec.fn(g)
        for nid, gi in zip(rec.inputs, contribs):
            if nid is None or gi is None:
                continue
            acc = grads.get(nid)
            grads[nid] = gi if acc is None else acc + gi
    out = {}
    for nid, leaf in tape.leaves.items():
        g = grads.get(nid)
        if g is None:
            g = np.zeros(leaf.shape, dtype=_grad_dtype(leaf.dtype))
        if leaf.trainable:
            leaf.grad = g
        out[nid] = g
    return out
