"""Shared fixtures and numerical helpers for the suite."""

import numpy as np
import pytest

from charlm import model as M
from charlm import tensor as T


def tiny_config(**overrides):
    """Small model used by gradient and equivalence tests."""
    kw = dict(n_layers=2, n_heads=2, d_model=16, context_len=16, vocab_size=11)
    kw.update(overrides)
    return M.ModelConfig(**kw)


def rel_err(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return np.max(np.abs(a - b) / denom)


def central_diff(f, x, h=1e-5):
    """Elementwise central finite differences of scalar f at float64 x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * h)
    return g


def grad_of(op, *arrays, h=1e-5):
    """Autodiff and finite-difference gradients of sum(op(*inputs)).

    Returns a list of (analytic, numeric) pairs, one per input array, all
    float64.
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    tape = T.Tape()
    leaves = [tape.leaf(a.copy(), trainable=True) for a in arrays]
    out = op(*leaves, tape=tape)
    loss = T.sum_all(out, tape=tape)
    T.backward(tape, loss)

    pairs = []
    for i, a in enumerate(arrays):
        def f(x, i=i):
            args = [T.Tensor(x if j == i else arrays[j]) for j in range(len(arrays))]
            return float(T.sum_all(op(*args)).data)
        pairs.append((leaves[i].grad, central_diff(f, a, h=h)))
    return pairs


@pytest.fixture
def rng():
    return np.random.default_rng(0)
