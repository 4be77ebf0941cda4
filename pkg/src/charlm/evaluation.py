"""Automatic model-quality report: holdout loss/perplexity, verbatim-copy
rate, charset validity, and a coarse grade.

The metrics are picked to expose the three levers a learner controls:
too little data or training shows up as high holdout loss, over-training on
a tiny corpus as a high memorization rate, and degenerate decoding as
invalid characters."""

import math
from dataclasses import dataclass

import numpy as np

from . import inference as I
from . import model as M
from . import tensor as T
from .checkpoint import canonical_json
from .data import UNK_ID
from .errors import DataError

# grade rubric constants (nats/char unless noted)
NOISE_LOSS_FACTOR = 0.9      # fraction of ln(vocab) above which output is noise
MEMORIZED_RATE = 0.8
FLUENT_LOSS_BELOW = 1.4
STRUCTURED_LOSS_BELOW = 2.4

N_PROMPTS = 16
PROMPT_CHARS = 32
TOKENS_PER_PROMPT = 32       # 16 prompts x 32 tokens = 512 generated tokens
NGRAM = 8


@dataclass(frozen=True)
class EvalReport:
    holdout_loss: float
    holdout_perplexity: float
    memorization_rate: float
    charset_validity: float
    grade: str

    def to_dict(self):
        return {
            "holdout_loss": self.holdout_loss,
            "holdout_perplexity": self.holdout_perplexity,
            "memorization_rate": self.memorization_rate,
            "charset_validity": self.charset_validity,
            "grade": self.grade,
        }

    def to_json(self):
        return canonical_json(self.to_dict())


def grade_for(loss, memorization_rate, vocab_size):
    """Total rubric: exactly one grade per metric triple."""
    if loss >= NOISE_LOSS_FACTOR * math.log(vocab_size):
        return "noise"
    if memorization_rate >= MEMORIZED_RATE:
        return "memorized"
    if loss < FLUENT_LOSS_BELOW:
        return "fluent"
    if loss < STRUCTURED_LOSS_BELOW:
        return "structured"
    return "babble"


def holdout_loss(weights, cfg, corpus, max_windows=None, batch_size=16):
    """Mean cross-entropy over consecutive non-overlapping context windows
    of the holdout slice."""
    hold = corpus.holdout_tokens
    ctx = cfg.context_len
    if len(hold) < 2 * ctx:
        raise DataError(
            "holdout slice too small to evaluate; use a larger corpus or a "
            "smaller holdout fraction")
    n_windows = (len(hold) - 1) // ctx
    if max_windows is not None:
        n_windows = min(n_windows, max_windows)
    wt = M.as_tensors(weights)
    total = 0.0
    done = 0
    while done < n_windows:
        n = min(batch_size, n_windows - done)
        starts = (done + np.arange(n)) * ctx
        idx = starts[:, None] + np.arange(ctx + 1)[None, :]
        chunk = hold[idx]
        logits = M.forward(wt, cfg, chunk[:, :-1])
        loss = T.cross_entropy(logits, chunk[:, 1:])
        total += float(loss.data) * n
        done += n
    return total / n_windows


def evaluate(weights, cfg, vocab, corpus, max_windows=None):
    """Deterministic quality report for a frozen weight snapshot."""
    loss = holdout_loss(weights, cfg, corpus, max_windows=max_windows)

    hold = corpus.holdout_tokens
    train_text = corpus.raw_text[: corpus.split_index]
    span = max(len(hold) - PROMPT_CHARS, 1)
    starts = [(j * span) // N_PROMPTS for j in range(N_PROMPTS)]
    settings = I.GenerationSettings(temperature=0.0, max_new_tokens=TOKENS_PER_PROMPT)

    matched = 0
    total_ngrams = 0
    generated = 0
    valid = 0
    for start in starts:
        prompt = vocab.decode(hold[start:start + PROMPT_CHARS])
        ids = list(I.generate(weights, cfg, vocab, prompt, settings))
        generated += len(ids)
        valid += sum(1 for t in ids if t != UNK_ID)
        text = vocab.decode(ids)
        for j in range(len(text) - NGRAM + 1):
            total_ngrams += 1
            if text[j:j + NGRAM] in train_text:
                matched += 1

    mem_rate = matched / total_ngrams if total_ngrams else 0.0
    validity = valid / generated if generated else 0.0
    return EvalReport(
        holdout_loss=loss,
        holdout_perplexity=math.exp(loss),
        memorization_rate=mem_rate,
        charset_validity=validity,
        grade=grade_for(loss, mem_rate, cfg.vocab_size),
    )
