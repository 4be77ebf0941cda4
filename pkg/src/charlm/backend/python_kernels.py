"""Portable numpy implementations of the fused hot kernels.

Every kernel here has a signature-identical compiled twin in ``_fastcore``.
Inputs are float32 or float64 C-contiguous arrays; half-precision storage is
handled one level up (tensor ops upcast to float32 before calling in).
"""

import numpy as np

NAME = "python"

# tanh-approximation constants shared with the compiled twin
_GELU_C = 0.7978845608028654  # sqrt(2/pi)
_GELU_A = 0.044715


def gelu_fwd(x):
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + _GELU_A * x * x * x)))


def gelu_bwd(x, gout):
    u = _GELU_C * (x + _GELU_A * x * x * x)
    t = np.tanh(u)
    du = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
    return gout * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def rmsnorm_fwd(x, gain, eps):
    """x: (rows, d), gain: (d,). Returns (y, inv_rms) with inv_rms per row."""
    inv_rms = 1.0 / np.sqrt(np.mean(x * x, axis=-1, keepdims=True) + eps)
    return x * inv_rms * gain, inv_rms


def rmsnorm_bwd(x, gain, inv_rms, gout):
    d = x.shape[-1]
    gg = gout * gain
    # d/dx of x_i * r: r * gg_i - x_i * r^3 / d * sum_j(gg_j * x_j)
    dot = np.sum(gg * x, axis=-1, keepdims=True)
    gx = inv_rms * gg - x * (inv_rms ** 3 / d) * dot
    ggain = np.sum(gout * x * inv_rms, axis=tuple(range(x.ndim - 1)))
    return gx, ggain


def rope_fwd(x, cos, sin):
    """Rotate dimension pairs of x: (..., seq, heads, d_head).

    cos/sin: (seq, d_head/2) angle tables. Pure rotation, so the backward
    pass is this same kernel with sin negated.
    """
    xe = x[..., 0::2]
    xo = x[..., 1::2]
    c = cos[:, None, :]
    s = sin[:, None, :]
    out = np.empty_like(x)
    out[..., 0::2] = xe * c - xo * s
    out[..., 1::2] = xe * s + xo * c
    return out


def softmax_fwd(x):
    m = np.max(x, axis=-1, keepdims=True)
    e = np.exp(x - m)
    return e / np.sum(e, axis=-1, keepdims=True)


def softmax_bwd(y, gout):
    dot = np.sum(y * gout, axis=-1, keepdims=True)
    return y * (gout - dot)


def cross_entropy_fwd(logits, targets):
    """logits: (n, vocab) float, targets: (n,) int64. Returns (mean_loss, probs)."""
    m = np.max(logits, axis=-1, keepdims=True)
    shifted = logits - m
    lse = np.log(np.sum(np.exp(shifted), axis=-1)) + m[:, 0]
    n = logits.shape[0]
    picked = logits[np.arange(n), targets]
    loss = float(np.mean(lse - picked))
    probs = np.exp(shifted - (lse - m[:, 0])[:, None])
    return loss, probs


def cross_entropy_bwd(probs, targets, gout):
    n = probs.shape[0]
    g = probs.copy()
    g[np.arange(n), targets] -= 1.0
    g *= gout / n
    return g


def adamw_update(w, g, m, v, lr, beta1, beta2, eps, weight_decay, bc1, bc2):
    """Fused in-place decoupled-weight-decay adaptive step.

    bc1/bc2 are the bias-correction denominators (1 - beta^t), computed by
    the caller so the kernel stays stateless.
    """
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    mhat = m / bc1
    vhat = v / bc2
    w -= lr * (mhat / (np.sqrt(vhat) + eps) + weight_decay * w)
