"""Vocabulary, corpus splitting, batch sampling, and sufficiency."""

import numpy as np
import pytest
import scipy.stats

from charlm import data as D
from charlm.errors import DataError


# ---------------------------------------------------------------------------
# vocabulary

def test_vocab_reserves_unknown_at_zero():
    v = D.Vocabulary.from_text("banana")
    assert v.chars[0] == D.UNK_CHAR
    assert v.char_to_id[D.UNK_CHAR] == D.UNK_ID


def test_vocab_sorted_by_codepoint():
    v = D.Vocabulary.from_text("cba")
    assert v.chars == [D.UNK_CHAR, "a", "b", "c"]


def test_vocab_size_counts_unknown():
    assert D.Vocabulary.from_text("ab").size == 3


def test_encode_decode_roundtrip():
    text = "hello, world!\n"
    v = D.Vocabulary.from_text(text)
    assert v.decode(v.encode(text)) == text


def test_encode_unknown_chars_map_to_unk():
    v = D.Vocabulary.from_text("abc")
    ids = v.encode("abz")
    assert ids[2] == D.UNK_ID
    assert v.decode(ids) == "ab" + D.UNK_CHAR


def test_encode_dtype_and_shape():
    v = D.Vocabulary.from_text("xy")
    ids = v.encode("yxxy")
    assert ids.dtype == np.int32
    assert ids.shape == (4,)


def test_decode_rejects_out_of_range():
    v = D.Vocabulary.from_text("ab")
    with pytest.raises(DataError):
        v.decode([3])
    with pytest.raises(DataError):
        v.decode([-1])


def test_empty_text_rejected():
    with pytest.raises(DataError):
        D.Vocabulary.from_text("")


def test_vocab_oracle_against_brute_force():
    text = D.builtin_corpus_path("shakespeare").read_text(encoding="utf-8")[:50_000]
    v = D.Vocabulary.from_text(text)
    expected = [D.UNK_CHAR] + sorted(set(text) - {D.UNK_CHAR})
    assert v.chars == expected


# ---------------------------------------------------------------------------
# corpus

def test_holdout_is_contiguous_tail():
    text = "0123456789" * 10
    c = D.Corpus.from_text("t", text, holdout_fraction=0.2)
    assert c.split_index == 80
    assert len(c.train_tokens) == 80
    assert len(c.holdout_tokens) == 20
    assert c.vocab.decode(c.holdout_tokens) == text[80:]


def test_default_holdout_fraction_is_ten_percent():
    c = D.Corpus.from_text("t", "x" * 1000)
    assert len(c.holdout_tokens) == 100


def test_holdout_fraction_bounds():
    with pytest.raises(DataError):
        D.Corpus.from_text("t", "abc", holdout_fraction=0.6)
    with pytest.raises(DataError):
        D.Corpus.from_text("t", "abc", holdout_fraction=-0.1)


def test_empty_corpus_rejected():
    with pytest.raises(DataError):
        D.Corpus.from_text("t", "")


def test_upload_size_cap():
    big = "a" * (D.MAX_UPLOAD_BYTES + 1)
    with pytest.raises(DataError):
        D.Corpus.from_text("t", big)


def test_pinned_vocab_reencodes():
    v = D.Vocabulary.from_text("abc")
    c = D.Corpus.from_text("t", "abcz", vocab=v)
    assert c.tokens[-1] == D.UNK_ID


def test_builtins_load_and_are_plausible():
    for cid in D.BUILTIN_CORPORA:
        c = D.load_builtin(cid)
        assert c.source == "builtin"
        assert len(c.tokens) > 100_000
        assert c.vocab.size < 128


def test_unknown_builtin_rejected():
    with pytest.raises(DataError):
        D.builtin_corpus_path("nope")


# ---------------------------------------------------------------------------
# batch sampling

def test_sample_batch_shapes_and_shift(rng):
    c = D.Corpus.from_text("t", "abcdefgh" * 50, holdout_fraction=0.1)
    inputs, targets = D.sample_batch(c, context_len=16, batch_size=4, rng=rng)
    assert inputs.shape == (4, 16)
    assert targets.shape == (4, 16)
    # targets are the next-character shift of inputs
    np.testing.assert_array_equal(inputs[:, 1:], targets[:, :-1])


def test_sample_batch_windows_come_from_training_slice(rng):
    text = "a" * 90 + "b" * 10  # holdout tail is all 'b'
    c = D.Corpus.from_text("t", text, holdout_fraction=0.1)
    b_id = c.vocab.char_to_id["b"]
    for _ in range(20):
        inputs, targets = D.sample_batch(c, context_len=8, batch_size=4, rng=rng)
        assert not np.any(inputs == b_id)
        assert not np.any(targets == b_id)


def test_sample_batch_requires_one_window(rng):
    c = D.Corpus.from_text("t", "abcdefgh", holdout_fraction=0.0)
    with pytest.raises(DataError):
        D.sample_batch(c, context_len=8, batch_size=1, rng=rng)
    # exactly context_len + 1 tokens is enough
    c2 = D.Corpus.from_text("t", "abcdefghi", holdout_fraction=0.0)
    inputs, _ = D.sample_batch(c2, context_len=8, batch_size=2, rng=rng)
    assert inputs.shape == (2, 8)


def test_sample_batch_start_positions_roughly_uniform():
    # all-distinct corpus: the first input token identifies the window start;
    # chi-squared test that starts are uniform over the legal range
    import string
    text = string.printable[:40]
    c = D.Corpus.from_text("t", text, holdout_fraction=0.0)
    ctx = 4
    n_starts = len(c.tokens) - ctx  # rng.integers(0, n_starts) exclusive
    rng = np.random.default_rng(123)
    draws = 36_000
    counts = np.zeros(len(c.tokens), dtype=np.int64)
    first_token_at = {int(c.tokens[i]): i for i in range(len(c.tokens))}
    for _ in range(draws // 200):
        inputs, _ = D.sample_batch(c, ctx, 200, rng)
        for t in inputs[:, 0]:
            counts[first_token_at[int(t)]] += 1
    assert counts[n_starts:].sum() == 0  # never starts too close to the end
    observed = counts[:n_starts]
    expected = draws / n_starts
    chi2 = ((observed - expected) ** 2 / expected).sum()
    p = scipy.stats.chi2.sf(chi2, df=n_starts - 1)
    assert p > 1e-4


def test_sample_batch_deterministic_for_seed():
    c = D.Corpus.from_text("t", "abcdefgh" * 50)
    a = D.sample_batch(c, 8, 4, np.random.default_rng(5))
    b = D.sample_batch(c, 8, 4, np.random.default_rng(5))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


# ---------------------------------------------------------------------------
# sufficiency

def test_sufficiency_examples():
    v = D.Vocabulary.from_text("ab")
    mk = lambda n: D.Corpus.from_text("t", "ab" * (n // 2), vocab=v,
                                      holdout_fraction=0.0)
    # 2M tokens on a 2M-parameter model: ratio 1.0 -> sufficient
    assert D.sufficiency(mk(2_000_000), 2_000_000).verdict == "sufficient"
    # 50K tokens on a 4M-parameter model: ratio 0.0125 -> insufficient
    assert D.sufficiency(mk(50_000), 4_000_000).verdict == "insufficient"
    # in between -> marginal
    assert D.sufficiency(mk(400_000), 4_000_000).verdict == "marginal"


def test_sufficiency_thresholds_are_boundaries():
    v = D.Vocabulary.from_text("ab")
    c = D.Corpus.from_text("t", "ab" * 500, vocab=v, holdout_fraction=0.0)
    n = len(c.train_tokens)
    assert D.sufficiency(c, int(n / D.INSUFFICIENT_BELOW) + 1).verdict == "insufficient"
    assert D.sufficiency(c, int(n / D.INSUFFICIENT_BELOW) - 1).verdict == "marginal"
    assert D.sufficiency(c, int(n / D.SUFFICIENT_FROM) - 1).verdict == "sufficient"


def test_sufficiency_monotone_in_corpus_size():
    v = D.Vocabulary.from_text("ab")
    order = {"insufficient": 0, "marginal": 1, "sufficient": 2}
    last = -1
    for n in (10_000, 100_000, 1_000_000, 4_000_000):
        c = D.Corpus.from_text("t", "ab" * (n // 2), vocab=v, holdout_fraction=0.0)
        rank = order[D.sufficiency(c, 2_000_000).verdict]
        assert rank >= last
        last = rank


def test_sufficiency_uses_training_slice_only():
    v = D.Vocabulary.from_text("ab")
    c = D.Corpus.from_text("t", "ab" * 500, vocab=v, holdout_fraction=0.5)
    s = D.sufficiency(c, 1000)
    assert s.tokens_per_parameter == pytest.approx(0.5)


def test_sufficiency_rejects_bad_param_count():
    c = D.Corpus.from_text("t", "ab" * 50)
    with pytest.raises(DataError):
        D.sufficiency(c, 0)
