"""Optimizer, schedule, clipping, training loop, and the half-precision
loss-scaling regime."""

import numpy as np
import pytest

from charlm import data as D
from charlm import model as M
from charlm import training as TR
from charlm.errors import NumericsError

from conftest import tiny_config


def small_corpus(text="the quick brown fox jumps over the lazy dog. " * 40,
                 holdout=0.1):
    return D.Corpus.from_text("t", text, holdout_fraction=holdout)


def small_state(corpus, seed=0, **cfg_overrides):
    cfg = tiny_config(vocab_size=corpus.vocab.size, **cfg_overrides)
    return TR.TrainState.fresh(cfg, seed=seed)


# ---------------------------------------------------------------------------
# learning-rate schedule

def test_schedule_warmup_is_linear():
    h = TR.Hyperparameters(lr_max=3e-3, warmup_steps=100, max_steps=2000)
    assert TR.lr_schedule(0, h) == 0.0
    assert TR.lr_schedule(50, h) == pytest.approx(1.5e-3)
    assert TR.lr_schedule(100, h) == pytest.approx(3e-3)


def test_schedule_cosine_decays_to_min_ratio():
    h = TR.Hyperparameters(lr_max=3e-3, warmup_steps=100, max_steps=2000,
                           min_lr_ratio=0.1)
    assert TR.lr_schedule(2000, h) == pytest.approx(3e-4)
    # halfway through decay: midpoint of max and min
    mid = TR.lr_schedule(1050, h)
    assert mid == pytest.approx((3e-3 + 3e-4) / 2, rel=1e-6)
    # never rises after warmup
    lrs = [TR.lr_schedule(s, h) for s in range(100, 2001, 25)]
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))


def test_schedule_clamps_past_max_steps():
    h = TR.Hyperparameters(lr_max=1e-3, warmup_steps=10, max_steps=100)
    assert TR.lr_schedule(500, h) == pytest.approx(TR.lr_schedule(100, h))


# ---------------------------------------------------------------------------
# gradient clipping

def test_clip_scales_to_unit_norm():
    grads = {"a": np.array([3.0, 0.0]), "b": np.array([0.0, 4.0])}
    norm = TR.clip_gradients(grads, 1.0)  # global norm 5
    assert norm == pytest.approx(5.0)
    total = np.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
    assert total == pytest.approx(1.0)
    np.testing.assert_allclose(grads["a"], [0.6, 0.0])


def test_clip_leaves_small_gradients_alone():
    grads = {"a": np.array([0.3, 0.4])}
    norm = TR.clip_gradients(grads, 1.0)
    assert norm == pytest.approx(0.5)
    np.testing.assert_allclose(grads["a"], [0.3, 0.4])


# ---------------------------------------------------------------------------
# optimizer

def hand_adamw(w, g, lr, beta1, beta2, eps, wd, steps=1):
    """Reference implementation iterated from zero moments."""
    w = w.copy()
    m = np.zeros_like(w)
    v = np.zeros_like(w)
    for t in range(1, steps + 1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1 ** t)
        vhat = v / (1 - beta2 ** t)
        w = w - lr * (mhat / (np.sqrt(vhat) + eps) + wd * w)
    return w


def test_adamw_first_step_moves_by_lr():
    # with zero moments and no decay, step 1 moves each weight by
    # lr * sign(g) up to the eps correction
    corpus = small_corpus()
    state = small_state(corpus)
    h = TR.Hyperparameters(weight_decay=0.0)
    name = "block0.attn.wq"
    w0 = state.weights[name].copy()
    g = np.full_like(w0, 0.25)
    grads = {n: (g if n == name else np.zeros_like(w)) for n, w in state.weights.items()}
    TR.optimizer_step(state, grads, lr=0.1, hyper=h)
    np.testing.assert_allclose(state.weights[name], w0 - 0.1, atol=1e-6)
    assert state.step == 1


def test_adamw_matches_hand_iteration():
    corpus = small_corpus()
    state = small_state(corpus)
    h = TR.Hyperparameters()
    name = "block0.attn.wq"
    rng = np.random.default_rng(1)
    w0 = state.weights[name].copy()
    g = rng.normal(size=w0.shape).astype(np.float32)
    ref = hand_adamw(w0, g, 0.01, h.beta1, h.beta2, h.eps, h.weight_decay, steps=3)
    for _ in range(3):
        grads = {n: (g.copy() if n == name else np.zeros_like(w))
                 for n, w in state.weights.items()}
        TR.optimizer_step(state, grads, lr=0.01, hyper=h)
    np.testing.assert_allclose(state.weights[name], ref, rtol=1e-4, atol=1e-6)


def test_weight_decay_skips_gains_and_embedding():
    corpus = small_corpus()
    state = small_state(corpus)
    h = TR.Hyperparameters(weight_decay=0.5)
    zero_grads = {n: np.zeros_like(w) for n, w in state.weights.items()}
    gain0 = state.weights["block0.ln1.gain"].copy()
    embed0 = state.weights["embed"].copy()
    wq0 = state.weights["block0.attn.wq"].copy()
    TR.optimizer_step(state, zero_grads, lr=0.1, hyper=h)
    np.testing.assert_array_equal(state.weights["block0.ln1.gain"], gain0)
    np.testing.assert_array_equal(state.weights["embed"], embed0)
    np.testing.assert_allclose(state.weights["block0.attn.wq"],
                               wq0 * (1 - 0.1 * 0.5), rtol=1e-6)


def test_optimizer_rejects_non_finite_gradients():
    corpus = small_corpus()
    state = small_state(corpus)
    grads = {n: np.zeros_like(w) for n, w in state.weights.items()}
    grads["embed"][0, 0] = np.nan
    with pytest.raises(NumericsError):
        TR.optimizer_step(state, grads, lr=0.1, hyper=TR.Hyperparameters())
    assert state.step == 0


# ---------------------------------------------------------------------------
# training loop

def test_train_step_metrics_and_counters():
    corpus = small_corpus()
    state = small_state(corpus)
    h = TR.Hyperparameters(batch_size=4)
    m = TR.train_step(state, corpus, h)
    assert m["step"] == 1
    assert m["tokens_seen"] == 4 * state.cfg.context_len
    assert m["loss"] > 0
    assert m["tokens_per_sec"] > 0
    assert len(state.loss_history) == 1


def test_training_is_deterministic_for_seed():
    corpus = small_corpus()
    losses = []
    for _ in range(2):
        state = small_state(corpus, seed=11)
        h = TR.Hyperparameters(batch_size=4)
        losses.append([TR.train_step(state, corpus, h)["loss"] for _ in range(5)])
    assert losses[0] == losses[1]


def test_loss_decreases_on_overfit():
    corpus = small_corpus(holdout=0.0)
    state = small_state(corpus, seed=2)
    h = TR.Hyperparameters(batch_size=8, warmup_steps=20, max_steps=200)
    first = TR.train_step(state, corpus, h)["loss"]
    last = None
    for _ in range(199):
        last = TR.train_step(state, corpus, h)["loss"]
    assert last < 0.6 * first


# ---------------------------------------------------------------------------
# loss-scale state machine

def make_scaling_state():
    corpus = small_corpus()
    return small_state(corpus)


def test_forced_overflow_sequence():
    # overflow at scale 2^16 halves it; again at 2^15 halves to 2^14
    state = make_scaling_state()
    assert state.loss_scale == 2 ** 16
    TR.register_overflow(state)
    assert state.loss_scale == 2 ** 15
    TR.register_overflow(state)
    assert state.loss_scale == 2 ** 14


def test_clean_run_doubles_scale_at_interval():
    state = make_scaling_state()
    TR.register_overflow(state)  # 2^15
    for _ in range(TR.LOSS_SCALE_GROWTH_INTERVAL - 1):
        TR.register_clean_step(state)
    assert state.loss_scale == 2 ** 15
    TR.register_clean_step(state)
    assert state.loss_scale == 2 ** 16


def test_scale_capped_at_max():
    state = make_scaling_state()
    for _ in range(TR.LOSS_SCALE_GROWTH_INTERVAL):
        TR.register_clean_step(state)
    assert state.loss_scale == TR.LOSS_SCALE_MAX


def test_overflow_resets_clean_counter():
    state = make_scaling_state()
    TR.register_overflow(state)
    for _ in range(TR.LOSS_SCALE_GROWTH_INTERVAL - 1):
        TR.register_clean_step(state)
    TR.register_overflow(state)  # counter resets, scale 2^14
    TR.register_clean_step(state)
    assert state.loss_scale == 2 ** 14
    assert state.clean_steps == 1


def test_scale_underflow_aborts():
    state = make_scaling_state()
    state.loss_scale = 1.0
    with pytest.raises(NumericsError):
        TR.register_overflow(state)


def test_mixed_step_skips_on_overflow(monkeypatch):
    corpus = small_corpus()
    state = small_state(corpus)
    h = TR.Hyperparameters(batch_size=2, precision="half")

    calls = {"n": 0}
    def explode(*args, **kwargs):
        calls["n"] += 1
        raise NumericsError("matmul")
    monkeypatch.setattr(TR, "_forward_backward", explode)
    m = TR.mixed_precision_step(state, corpus, h)
    assert m["skipped"] is True
    assert state.step == 0            # skipped steps do not advance
    assert state.loss_scale == 2 ** 15
    assert calls["n"] == 1


def test_mixed_step_trains_and_unscales():
    corpus = small_corpus()
    state = small_state(corpus)
    h = TR.Hyperparameters(batch_size=4, precision="half")
    m = TR.step_once(state, corpus, h)
    assert m["skipped"] is False
    assert m["loss_scale"] == 2 ** 16
    assert state.step == 1
    assert np.isfinite(m["loss"])


@pytest.mark.slow
def test_mixed_and_full_precision_track_each_other():
    corpus = small_corpus(
        "in the beginning the model knows nothing of letters. " * 80)
    results = {}
    for precision in ("full", "half"):
        state = small_state(corpus, seed=4)
        h = TR.Hyperparameters(batch_size=8, precision=precision,
                               warmup_steps=20, max_steps=200)
        first = TR.step_once(state, corpus, h)["loss"]
        last = None
        for _ in range(199):
            last = TR.step_once(state, corpus, h)["loss"]
        results[precision] = (first, last)
    for precision, (first, last) in results.items():
        assert last <= 0.6 * first, f"{precision} run failed to reach 60%"
    # the two trajectories end in the same neighborhood
    assert abs(results["full"][1] - results["half"][1]) < 0.5


# ---------------------------------------------------------------------------
# memory accounting

def test_resident_memory_components_positive():
    cfg = tiny_config()
    acct = TR.resident_memory_bytes(cfg, batch_size=2)
    assert acct["weights"] == M.param_count(cfg) * 4
    assert acct["moments"] == 2 * acct["weights"]
    assert acct["activations"] > 0
    assert acct["total"] == sum(v for k, v in acct.items() if k != "total")


def test_half_precision_activations_smaller():
    cfg = tiny_config()
    full = TR.resident_memory_bytes(cfg, batch_size=2, precision="full")
    half = TR.resident_memory_bytes(cfg, batch_size=2, precision="half")
    assert half["activations"] < 0.6 * full["activations"]
