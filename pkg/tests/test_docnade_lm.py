import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import jitter
from docnade.docnade_lm import DocNadeLmModel
from docnade.nn_core import SGD, gradcheck, sigmoid
from docnade.vocab_tree import build_class_partition


def make(V=7, H=4, n=3, seed=0, doc_context=True):
    rng = np.random.default_rng(seed)
    m = DocNadeLmModel.init(V, H, n, build_class_partition(V), rng, doc_context=doc_context)
    jitter(m.params, rng)
    if not doc_context:
        m.params["doc_embed"][:] = 0.0
    return m


class TestOutput:

    @pytest.mark.parametrize("V", [2, 4, 10, 64])
    def test_normalized(self, V, rng):
        m = make(V, 5)
        for _ in range(5):
            h = rng.uniform(size=5)
            assert abs(np.exp(m.all_word_logprobs(h)).sum() - 1.0) < 1e-12

    def test_two_level_factorization(self, rng):
        m = make(10, 3)
        h = rng.uniform(size=3)
        table = m.all_word_logprobs(h)
        for w in range(10):
            c = int(m.partition.class_of[w])
            pos = int(np.flatnonzero(m.partition.members[c] == w)[0])
            expected = m.class_logprobs(h)[c] + m.within_class_logprobs(h, c)[pos]
            assert table[w] == pytest.approx(expected, abs=1e-13)
            assert m.word_logprob_2level(h, w) == pytest.approx(expected, abs=1e-13)

    def test_unknown_word(self):
        with pytest.raises(ValueError):
            make().word_logprob_2level(np.zeros(4), 7)


class TestHidden:

    def test_direct_formula(self):
        m = make()
        seq = np.array([3, 1, 4, 1, 5])
        hs = m.hidden_states(seq)
        p = m.params
        for i in range(1, seq.size + 1):
            pre = p["hidden_bias"] + p["doc_embed"][:, seq[:i - 1]].sum(axis=1)
            for k in (1, 2):
                w = seq[i - 1 - k] if i - 1 - k >= 0 else m.pad_id
                pre = pre + p[f"context_weight_{k}"] @ p["ngram_embed"][:, w]
            np.testing.assert_allclose(hs[:, i - 1], sigmoid(pre), atol=1e-14)
            np.testing.assert_allclose(m.hidden(seq[:i - 1], i), hs[:, i - 1], atol=1e-14)

    def test_first_position_reads_padding_only(self):
        m = make()
        p = m.params
        pre = p["hidden_bias"] + (p["context_weight_1"] + p["context_weight_2"]) @ p["ngram_embed"][:, m.pad_id]
        np.testing.assert_allclose(m.hidden([], 1), sigmoid(pre), atol=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            make().hidden([1, 2], 2)

    @given(st.lists(st.integers(0, 6), min_size=3, max_size=10), st.integers(0, 6))
    @settings(max_examples=40, deadline=None)
    def test_ngram_term_is_local(self, history, replacement):
        # changing a word outside the (n-1)-window leaves the n-gram term unchanged
        m = make()
        changed = list(history)
        changed[0] = replacement
        np.testing.assert_array_equal(m.ngram_term(history), m.ngram_term(changed))


class TestFeedForwardAblation:

    def test_doc_term_ignored(self):
        ffn = make(doc_context=False)
        np.testing.assert_array_equal(ffn.doc_term([1, 2, 3]), np.zeros(ffn.H))

    def test_bitwise_reduction(self):
        # with doc_context off and a zero doc_embed, the full model gives bit-identical states
        ffn = make(doc_context=False)
        full = DocNadeLmModel({k: v.copy() for k, v in ffn.params.items()}, ffn.partition, ffn.n, doc_context=True)
        seq = [0, 5, 2, 2, 6, 1]
        assert np.array_equal(ffn.hidden_states(seq), full.hidden_states(seq))
        assert ffn.doc_logprob(seq) == full.doc_logprob(seq)

    def test_no_doc_gradient(self):
        _, grads = make(doc_context=False).loss_and_grad([0, 1, 2])
        assert "doc_embed" not in grads

    def test_history_beyond_window_ignored(self):
        ffn = make(doc_context=False)
        a = ffn.conditional_logprobs([0, 1, 2, 3, 4])[-1]
        b = ffn.conditional_logprobs([6, 5, 2, 3, 4])[-1]
        assert a == b


class TestGradients:

    @pytest.mark.parametrize("doc_context", [True, False])
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_gradcheck(self, n, doc_context):
        m = make(8, 4, n=n, seed=n, doc_context=doc_context)
        seq = [7, 0, 7, 3]
        assert gradcheck(lambda p: m.loss_and_grad(seq), m.params).passed

    def test_padding_column_gets_gradient(self):
        _, g = make().loss_and_grad([1, 2])
        assert np.abs(g["ngram_embed"][:, -1]).max() > 0

    def test_chain_rule(self):
        m = make()
        seq = [2, 6, 0]
        total = sum(m.word_logprob_2level(m.hidden(seq[:i], i + 1), w) for i, w in enumerate(seq))
        assert m.doc_logprob(seq) == pytest.approx(total, abs=1e-12)

    def test_training_lowers_loss(self):
        m = make(6, 4)
        seq = [0, 1, 2, 0, 1, 2, 0, 1, 2]
        before = -m.doc_logprob(seq)
        opt = SGD(0.2)
        for _ in range(60):
            m.train_step(seq, opt)
        assert -m.doc_logprob(seq) < before - math.log(2)
