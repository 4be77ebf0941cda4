"""Pre-norm transformer: embeddings, RMS-normed attention/MLP blocks with
rotary positions, tied output projection."""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError

RMSNORM_EPS = 1e-5

# finite stand-in for -inf in the causal mask; large enough that masked
# attention weights underflow to exactly 0 after softmax, small enough to
# survive half-precision storage
MASK_VALUE = -1e4


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int
    n_heads: int
    d_model: int
    context_len: int
    vocab_size: int
    mlp_ratio: int = 4
    rope_base: float = 10000.0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise DimensionError("d_model must be divisible by n_heads")
        if (self.d_model // self.n_heads) % 2 != 0:
            raise DimensionError("head width must be even for rotary pairs")
        if self.context_len < 1:
            raise DimensionError("context_len must be at least 1")
        if self.vocab_size < 2:
            raise DimensionError("vocab_size must be at least 2")

    @property
    def d_head(self):
        return self.d_model // self.n_heads

    def to_dict(self):
        return {
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "d_model": self.d_model,
            "context_len": self.context_len,
            "vocab_size": self.vocab_size,
            "mlp_ratio": self.mlp_ratio,
            "rope_base": self.rope_base,
        }


PRESETS = {
    "standard-4M": dict(n_layers=8, n_heads=3, d_model=192, context_len=128),
    "tiny-2M": dict(n_layers=6, n_heads=4, d_model=160, context_len=128),
}


def preset(name, vocab_size):
    if name not in PRESETS:
        raise ContractError(f"unknown preset '{name}' (have: {', '.join(sorted(PRESETS))})")
    return ModelConfig(vocab_size=vocab_size, **PRESETS[name])


def param_count(cfg):
    """Closed-form trainable parameter count (tied output projection)."""
    d, L, r = cfg.d_model, cfg.n_layers, cfg.mlp_ratio
    return cfg.vocab_size * d + L * (4 * d * d + 2 * r * d * d + 2 * d) + d


def weight_shapes(cfg):
    """Ordered (name, shape) manifest; also the checkpoint payload order."""
    d, r = cfg.d_model, cfg.mlp_ratio
    shapes = [("embed", (cfg.vocab_size, d))]
    for i in range(cfg.n_layers):
        p = f"block{i}"
        shapes += [
            (f"{p}.ln1.gain", (d,)),
            (f"{p}.attn.wq", (d, d)),
            (f"{p}.attn.wk", (d, d)),
            (f"{p}.attn.wv", (d, d)),
            (f"{p}.attn.wo", (d, d)),
            (f"{p}.ln2.gain", (d,)),
            (f"{p}.mlp.w1", (d, r * d)),
            (f"{p}.mlp.w2", (r * d, d)),
        ]
    shapes.append(("final.gain", (d,)))
    return shapes


def init_weights(cfg, rng, dtype=np.float32):
    """Fresh weights: N(0, 0.02) matrices, residual projections scaled down
    by 1/sqrt(2L), unit gains."""
    resid_std = 0.02 / np.sqrt(2 * cfg.n_layers)
    weights = {}
    for name, shape in weight_shapes(cfg):
        if name.endswith(".gain"):
            w = np.ones(shape, dtype=dtype)
        elif name.endswith((".wo", ".w2")):
            w = rng.normal(0.0, resid_std, size=shape).astype(dtype)
        else:
            w = rng.normal(0.0, 0.02, size=shape).astype(dtype)
        weights[name] = w
    return weights


def decayed_params(cfg):
    """Names of parameters that receive weight decay: 2-D projection
    matrices only, never gains or the embedding table."""
    return {name for name, shape in weight_shapes(cfg)
            if len(shape) == 2 and name != "embed"}


def as_tensors(weights, tape=None, trainable=False):
    """Wrap a name->ndarray dict as tape leaves (or free tensors)."""
    if tape is None:
        return {n: T.Tensor(w) for n, w in weights.items()}
    return {n: tape.leaf(w, trainable=trainable) for n, w in weights.items()}


def causal_mask(seq, dtype=np.float32):
    m = np.zeros((seq, seq), dtype=dtype)
    m[np.triu_indices(seq, k=1)] = MASK_VALUE
    return T.Tensor(m)


def causal_attention(q, k, v, tape=None, mask=None):
    """Masked scaled-dot-product attention.

    q, k, v: (seq, heads, d_head) or (batch, seq, heads, d_head); output has
    the same layout. Positions j > i carry zero weight.
    """
    if q.shape != k.shape or q.shape != v.shape:
        raise DimensionError("q, k, v shapes must agree")
    batched = q.data.ndim == 4
    perm = (0, 2, 1, 3) if batched else (1, 0, 2)
    seq = q.shape[-3]
    dh = q.shape[-1]
    qh = T.transpose(q, perm, tape=tape)
    kh = T.transpose(k, perm, tape=tape)
    vh = T.transpose(v, perm, tape=tape)
    kt = T.transpose(kh, (0, 1, 3, 2) if batched else (0, 2, 1), tape=tape)
    scores = T.scale(T.matmul(qh, kt, tape=tape), 1.0 / np.sqrt(dh), tape=tape)
    if mask is None:
        mask = causal_mask(seq, dtype=np.float64 if q.dtype == np.float64 else np.float32)
    scores = T.add(scores, mask, tape=tape)
    probs = T.softmax_lastaxis(scores, tape=tape)
    out = T.matmul(probs, vh, tape=tape)
    return T.transpose(out, perm, tape=tape)


def forward(weights, cfg, tokens, tape=None, precision="full"):
    """Logits for a token batch: (batch, seq) ids -> (batch, seq, vocab).

    precision="half" stores activations in float16 (compute stays float32);
    weights remain whatever dtype they were given in.
    """
    tokens = np.asarray(tokens)
    squeeze = tokens.ndim == 1
    if squeeze:
        tokens = tokens[None, :]
    if tokens.ndim != 2:
        raise ContractError("tokens must be a (batch, seq) id array")
    b, seq = tokens.shape
    if seq > cfg.context_len:
        raise ContractError(f"sequence length {seq} exceeds context window {cfg.context_len}")

    w = weights
    x = T.embedding(w["embed"], tokens, tape=tape)
    if precision == "half":
        x = T.cast(x, np.float16, tape=tape)
    positions = np.arange(seq)
    mask = causal_mask(seq, dtype=np.float64 if x.dtype == np.float64 else np.float32)

    for i in range(cfg.n_layers):
        p = f"block{i}"
        h = T.rmsnorm(x, w[f"{p}.ln1.gain"], eps=RMSNORM_EPS, tape=tape)
        q = T.matmul(h, w[f"{p}.attn.wq"], tape=tape)
        k = T.matmul(h, w[f"{p}.attn.wk"], tape=tape)
        v = T.matmul(h, w[f"{p}.attn.wv"], tape=tape)
        hs = (b, seq, cfg.n_heads, cfg.d_head)
        q = T.rope(T.reshape(q, hs, tape=tape), positions,
                   base=cfg.rope_base, context_len=cfg.context_len, tape=tape)
        k = T.rope(T.reshape(k, hs, tape=tape), positions,
                   base=cfg.rope_base, context_len=cfg.context_len, tape=tape)
        v = T.reshape(v, hs, tape=tape)
        att = causal_attention(q, k, v, tape=tape, mask=mask)
        att = T.reshape(att, (b, seq, cfg.d_model), tape=tape)
        att = T.matmul(att, w[f"{p}.attn.wo"], tape=tape)
        x = T.add(x, att, tape=tape)

        h2 = T.rmsnorm(x, w[f"{p}.ln2.gain"], eps=RMSNORM_EPS, tape=tape)
        u = T.gelu(T.matmul(h2, w[f"{p}.mlp.w1"], tape=tape), tape=tape)
        u = T.matmul(u, w[f"{p}.mlp.w2"], tape=tape)
        x = T.add(x, u, tape=tape)

    x = T.rmsnorm(x, w["final.gain"], eps=RMSNORM_EPS, tape=tape)
    logits = T.matmul(x, T.transpose(w["embed"], (1, 0), tape=tape), tape=tape)
    if squeeze:
        logits = T.reshape(logits, (seq, cfg.vocab_size), tape=tape)
    return logits
