"""Training loop mechanics: loss, AdamW-style optimizer, warmup+cosine
schedule, gradient clipping, and the dynamic loss-scaling half-precision
regime."""

import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import data as D
from . import model as M
from . import tensor as T
from .backend import kernels as K
from .errors import NumericsError

LOSS_SCALE_INIT = 2 ** 16
LOSS_SCALE_MAX = 2 ** 16
LOSS_SCALE_GROWTH_INTERVAL = 1000


@dataclass
class Hyperparameters:
    batch_size: int = 16
    lr_max: float = 3e-3
    max_steps: int = 2000
    warmup_steps: int = 100
    min_lr_ratio: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.95
    eps: float = 1e-8
    weight_decay: float = 0.1
    clip_norm: float = 1.0
    precision: str = "full"  # "full" | "half"


class TrainState:
    """Everything a run mutates: weights, moments, counters, rng, history."""

    def __init__(self, cfg, weights, seed=0, step=0, tokens_seen=0):
        self.cfg = cfg
        self.weights = weights
        self.m = {n: np.zeros_like(w) for n, w in weights.items()}
        self.v = {n: np.zeros_like(w) for n, w in weights.items()}
        self.step = step
        self.tokens_seen = tokens_seen
        self.rng_seed = seed
        self.rng = np.random.default_rng(seed)
        self.loss_history = deque(maxlen=5000)
        self.loss_scale = float(LOSS_SCALE_INIT)
        self.clean_steps = 0

    @classmethod
    def fresh(cls, cfg, seed=0):
        init_rng = np.random.default_rng(seed)
        return cls(cfg, M.init_weights(cfg, init_rng), seed=seed)


def cross_entropy(logits, targets, tape=None):
    """Mean negative log-likelihood; see tensor.cross_entropy."""
    return T.cross_entropy(logits, targets, tape=tape)


def lr_schedule(step, hyper):
    """Linear warmup to lr_max, then cosine decay to min_lr_ratio*lr_max."""
    if step <= hyper.warmup_steps:
        return hyper.lr_max * step / hyper.warmup_steps
    lr_min = hyper.min_lr_ratio * hyper.lr_max
    span = max(hyper.max_steps - hyper.warmup_steps, 1)
    t = min((step - hyper.warmup_steps) / span, 1.0)
    return lr_min + 0.5 * (hyper.lr_max - lr_min) * (1.0 + np.cos(np.pi * t))


def clip_gradients(grads, max_norm):
    """Scale the whole gradient set so its global L2 norm is <= max_norm."""
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g.astype(np.float64) ** 2))
    norm = np.sqrt(total)
    if norm > max_norm:
        factor = max_norm / norm
        for name in grads:
            grads[name] = grads[name] * factor
    return norm


def optimizer_step(state, grads, lr, hyper):
    """Decoupled-weight-decay adaptive update, in place."""
    for g in grads.values():
        if not np.all(np.isfinite(g)):
            raise NumericsError("optimizer-step", "non-finite gradient; step rejected")
    decayed = M.decayed_params(state.cfg)
    t = state.step + 1
    bc1 = 1.0 - hyper.beta1 ** t
    bc2 = 1.0 - hyper.beta2 ** t
    for name, w in state.weights.items():
        g = grads[name].astype(w.dtype, copy=False)
        wd = hyper.weight_decay if name in decayed else 0.0
        K.adamw_update(w, g, state.m[name], state.v[name],
                       lr, hyper.beta1, hyper.beta2, hyper.eps, wd, bc1, bc2)
    state.step = t


def _forward_backward(state, inputs, targets, precision, loss_scale):
    tape = T.Tape()
    wt = M.as_tensors(state.weights, tape=tape, trainable=True)
    logits = M.forward(wt, state.cfg, inputs, tape=tape, precision=precision)
    loss = T.cross_entropy(logits, targets, tape=tape)
    T.backward(tape, loss, seed=loss_scale)
    grads = {n: wt[n].grad for n in state.weights}
    return float(loss.data), grads


def train_step(state, corpus, hyper):
    """One full-precision step: sample, forward, backward, clip, update.

    Returns a metrics dict: step, loss, tokens_seen, tokens_per_sec.
    """
    t0 = time.perf_counter()
    inputs, targets = D.sample_batch(corpus, state.cfg.context_len,
                                     hyper.batch_size, state.rng)
    loss, grads = _forward_backward(state, inputs, targets, "full", 1.0)
    clip_gradients(grads, hyper.clip_norm)
    lr = lr_schedule(state.step + 1, hyper)
    optimizer_step(state, grads, lr, hyper)
    state.tokens_seen = state.step * hyper.batch_size * state.cfg.context_len
    state.loss_history.append((state.step, loss))
    dt = time.perf_counter() - t0
    return {
        "step": state.step,
        "loss": loss,
        "tokens_seen": state.tokens_seen,
        "tokens_per_sec": hyper.batch_size * state.cfg.context_len / dt,
    }


def mixed_precision_step(state, corpus, hyper):
    """train_step variant with half-precision activation storage and dynamic
    loss scaling: overflowed steps are skipped and the scale halved; 1000
    clean steps in a row double it again (capped)."""
    t0 = time.perf_counter()
    inputs, targets = D.sample_batch(corpus, state.cfg.context_len,
                                     hyper.batch_size, state.rng)
    try:
        loss, grads = _forward_backward(state, inputs, targets, "half", state.loss_scale)
        inv = 1.0 / state.loss_scale
        grads = {n: g * inv for n, g in grads.items()}
        overflow = any(not np.all(np.isfinite(g)) for g in grads.values())
    except NumericsError:
        overflow = True
        loss, grads = float("nan"), None

    if overflow:
        register_overflow(state)
        dt = time.perf_counter() - t0
        return {
            "step": state.step,
            "loss": loss,
            "tokens_seen": state.tokens_seen,
            "tokens_per_sec": hyper.batch_size * state.cfg.context_len / dt,
            "skipped": True,
            "loss_scale": state.loss_scale,
        }

    clip_gradients(grads, hyper.clip_norm)
    lr = lr_schedule(state.step + 1, hyper)
    optimizer_step(state, grads, lr, hyper)
    state.tokens_seen = state.step * hyper.batch_size * state.cfg.context_len
    state.loss_history.append((state.step, loss))
    register_clean_step(state)
    dt = time.perf_counter() - t0
    return {
        "step": state.step,
        "loss": loss,
        "tokens_seen": state.tokens_seen,
        "tokens_per_sec": hyper.batch_size * state.cfg.context_len / dt,
        "skipped": False,
        "loss_scale": state.loss_scale,
    }


def register_overflow(state):
    state.clean_steps = 0
    state.loss_scale /= 2.0
    if state.loss_scale < 1.0:
        raise NumericsError("loss-scale",
                            "loss scale underflowed below 1; training diverged")


def register_clean_step(state):
    state.clean_steps += 1
    if state.clean_steps >= LOSS_SCALE_GROWTH_INTERVAL:
        state.clean_steps = 0
        state.loss_scale = min(state.loss_scale * 2.0, float(LOSS_SCALE_MAX))


def step_once(state, corpus, hyper):
    if hyper.precision == "half":
        return mixed_precision_step(state, corpus, hyper)
    return train_step(state, corpus, hyper)


def resident_memory_bytes(cfg, batch_size, precision="full", seed=0):
    """Accounting oracle: weights + optimizer moments + the activation
    buffers one training batch keeps alive for backward."""
    state = TrainState.fresh(cfg, seed=seed)
    weight_bytes = sum(w.nbytes for w in state.weights.values())
    moment_bytes = sum(m.nbytes for m in state.m.values()) + \
        sum(v.nbytes for v in state.v.values())
    tape = T.Tape()
    wt = M.as_tensors(state.weights, tape=tape, trainable=True)
    tokens = np.zeros((batch_size, cfg.context_len), dtype=np.int64)
    logits = M.forward(wt, cfg, tokens, tape=tape, precision=precision)
    T.cross_entropy(logits, tokens, tape=tape)
    activation_bytes = T.tape_activation_bytes(tape)
    return {
        "weights": weight_bytes,
        "moments": moment_bytes,
        "activations": activation_bytes,
        "total": weight_bytes + moment_bytes + activation_bytes,
    }
