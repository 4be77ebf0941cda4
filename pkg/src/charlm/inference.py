"""Autoregressive generation: temperature/top-k sampling over a key-value
cache, with a full-reforward fallback used as the correctness oracle."""

from dataclasses import dataclass

import numpy as np

from . import model as M
from .backend import kernels as K
from .errors import ContractError
from .tensor import rope_tables

FULL = np.float32


@dataclass
class GenerationSettings:
    temperature: float = 0.8
    top_k: int | None = 40
    max_new_tokens: int = 200
    seed: int = 0

    @property
    def greedy(self):
        return self.temperature == 0.0


class KVCache:
    """Per-layer key/value tensors for positions already processed.

    Entries for positions < filled_len are append-only; every layer fills in
    lockstep."""

    def __init__(self, cfg):
        self.cfg = cfg
        shape = (cfg.context_len, cfg.n_heads, cfg.d_head)
        self.k = [np.zeros(shape, dtype=FULL) for _ in range(cfg.n_layers)]
        self.v = [np.zeros(shape, dtype=FULL) for _ in range(cfg.n_layers)]
        self.filled_len = 0

    def append(self, layer, k_new, v_new):
        n = k_new.shape[0]
        self.k[layer][self.filled_len:self.filled_len + n] = k_new
        self.v[layer][self.filled_len:self.filled_len + n] = v_new


def forward_cached(weights, cfg, tokens, cache):
    """Advance the cache by `tokens` (1D id array) and return the logits of
    the final position."""
    tokens = np.asarray(tokens)
    n_new = len(tokens)
    if cache.filled_len + n_new > cfg.context_len:
        raise ContractError("cache overflow: slide the window before appending")
    start = cache.filled_len
    positions = np.arange(start, start + n_new)
    total = start + n_new
    w = weights

    x = w["embed"][tokens].astype(FULL)
    cos, sin = rope_tables(positions, cfg.d_head, cfg.rope_base, dtype=FULL)
    # absolute causal mask rows for the new positions
    mask = np.where(positions[:, None] >= np.arange(total)[None, :],
                    0.0, M.MASK_VALUE).astype(FULL)

    for i in range(cfg.n_layers):
        p = f"block{i}"
        h, _ = K.rmsnorm_fwd(x, w[f"{p}.ln1.gain"], M.RMSNORM_EPS)
        hs = (n_new, cfg.n_heads, cfg.d_head)
        q = K.rope_fwd((h @ w[f"{p}.attn.wq"]).reshape(hs), cos, sin)
        k_new = K.rope_fwd((h @ w[f"{p}.attn.wk"]).reshape(hs), cos, sin)
        v_new = (h @ w[f"{p}.attn.wv"]).reshape(hs)
        cache.append(i, k_new, v_new)
        k_all = cache.k[i][:total]
        v_all = cache.v[i][:total]
        # (heads, new, total) attention over everything cached so far
        scores = np.einsum("nhd,thd->hnt", q, k_all) / np.sqrt(cfg.d_head)
        scores += mask[None, :, :]
        probs = K.softmax_fwd(scores)
        att = np.einsum("hnt,thd->nhd", probs, v_all).reshape(n_new, cfg.d_model)
        x = x + att @ w[f"{p}.attn.wo"]
        h2, _ = K.rmsnorm_fwd(x, w[f"{p}.ln2.gain"], M.RMSNORM_EPS)
        x = x + K.gelu_fwd(h2 @ w[f"{p}.mlp.w1"]) @ w[f"{p}.mlp.w2"]

    cache.filled_len = total
    xf, _ = K.rmsnorm_fwd(x, w["final.gain"], M.RMSNORM_EPS)
    return xf[-1] @ w["embed"].T


def logits_uncached(weights, cfg, tokens):
    """Oracle path: full forward over the whole window, last-position logits."""
    wt = M.as_tensors(weights)
    logits = M.forward(wt, cfg, np.asarray(tokens)[None, :], tape=None)
    return logits.data[0, -1].astype(FULL)


def sample_from_logits(logits, settings, rng):
    """Temperature scaling, top-k truncation (ties keep the lower id), then
    categorical sampling. Greedy mode (temperature 0) is a plain argmax."""
    logits = np.asarray(logits, dtype=np.float64)
    if settings.greedy:
        return int(np.argmax(logits))
    x = logits / settings.temperature
    if settings.top_k is not None and settings.top_k < len(x):
        order = np.argsort(-x, kind="stable")
        kept = order[: settings.top_k]
    else:
        kept = np.arange(len(x))
    probs = K.softmax_fwd(x[kept][None, :])[0]
    r = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), r, side="right"))
    return int(kept[min(idx, len(kept) - 1)])


def generate(weights, cfg, vocab, prompt, settings, use_cache=True,
             return_logits=False):
    """Stream up to max_new_tokens ids, one per yield.

    Prompts longer than the context window are truncated to the final
    context_len-1 characters (documented behavior, not an error). When the
    cache reaches the window edge it is rebuilt from the trailing
    context_len-1 tokens.
    """
    ids = list(vocab.encode(prompt))
    if not ids:
        ids = [0]
    if len(ids) >= cfg.context_len:
        ids = ids[-(cfg.context_len - 1):]
    rng = np.random.default_rng(settings.seed)

    window = list(ids)  # tokens the model currently attends over
    if use_cache:
        cache = KVCache(cfg)
        logits = forward_cached(weights, cfg, np.asarray(window), cache)
    else:
        logits = logits_uncached(weights, cfg, window)

    history = list(ids)
    for _ in range(settings.max_new_tokens):
        token = sample_from_logits(logits, settings, rng)
        history.append(token)
        if return_logits:
            yield token, logits
        else:
            yield token
        if len(window) + 1 > cfg.context_len:
            # window full: slide to the trailing context_len-1 tokens
            window = history[-(cfg.context_len - 1):]
            if use_cache:
                cache = KVCache(cfg)
                logits = forward_cached(weights, cfg, np.asarray(window), cache)
            else:
                logits = logits_uncached(weights, cfg, window)
        else:
            window.append(token)
            if use_cache:
                logits = forward_cached(weights, cfg, np.asarray([token]), cache)
            else:
                logits = logits_uncached(weights, cfg, window)
