import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import jitter
from docnade.corpus import SplitContext
from docnade.deep_docnade import (DeepDocNadeModel, EnsembleSpec, ensemble_logprob, ensemble_member_logprobs,
                                  split_weight)
from docnade.nn_core import Adam, gradcheck, log_mean_exp


def make(V=6, widths=(4,), seed=0):
    rng = np.random.default_rng(seed)
    m = DeepDocNadeModel.init(V, widths, rng)
    jitter(m.params, rng)
    return m


class TestStructure:

    @pytest.mark.parametrize("widths", [(5,), (5, 3), (4, 4, 2)])
    def test_depths(self, widths):
        m = make(widths=widths)
        assert m.depth == len(widths) and m.widths == list(widths)

    def test_unsupported_depth(self):
        with pytest.raises(ValueError, match="unsupported depth"):
            DeepDocNadeModel.init(5, (3, 3, 3, 3), np.random.default_rng(0))

    @pytest.mark.parametrize("widths", [(5,), (5, 3), (4, 4, 2)])
    def test_normalized(self, widths, rng):
        m = make(64, widths)
        hist = {int(w): int(c) for w, c in zip(rng.integers(0, 64, 5), rng.integers(1, 4, 5))}
        assert abs(m.forward(hist)[1].sum() - 1.0) < 1e-12

    def test_conditionals_match_forward(self):
        m = make(8, (4, 3))
        seq = [2, 5, 2, 7]
        logp = m.conditional_logprobs(seq)
        for i, w in enumerate(seq):
            hist = {}
            for u in seq[:i]:
                hist[u] = hist.get(u, 0) + 1
            assert logp[i] == pytest.approx(math.log(m.forward(hist)[1][w]), abs=1e-13)

    def test_dense_and_sparse_histogram(self):
        m = make()
        dense = np.array([0, 2, 0, 1, 0, 0])
        np.testing.assert_allclose(m.forward(dense)[1], m.forward({1: 2, 3: 1})[1], atol=1e-15)


class TestSplitLoss:

    @pytest.mark.parametrize("D", [1, 2, 5, 17])
    def test_weight_boundaries(self, D):
        assert split_weight(D, 1) == 1
        assert split_weight(D, D) == D
        assert isinstance(split_weight(D, D), Fraction)

    def test_weight_range(self):
        with pytest.raises(ValueError):
            split_weight(3, 4)

    def test_full_target_is_plain_sum(self):
        m = make()
        s = SplitContext({}, {1: 2, 4: 1}, 1, 3)
        p = m.forward({})[1]
        assert m.split_loss(s) == pytest.approx(-(2 * math.log(p[1]) + math.log(p[4])), abs=1e-13)

    def test_last_position_is_scaled(self):
        m = make()
        s = SplitContext({1: 2}, {4: 1}, 3, 3)
        assert m.split_loss(s) == pytest.approx(-3 * math.log(m.forward({1: 2})[1][4]), abs=1e-13)

    def test_empty_target(self):
        with pytest.raises(ValueError, match="empty target side"):
            make().split_loss(SplitContext({1: 1}, {}, 2, 1))

    def test_exact_expectation_equals_ordered_nll(self):
        # averaging the exact-split loss over every (ordering, cut) recovers the mean ordered NLL
        m = make(5, (3, 2))
        words = [0, 0, 3, 4]
        D = len(words)
        perms = list(itertools.permutations(words))
        nll = np.mean([-m.ordered_doc_logprob(p) for p in perms])
        total = 0.0
        for p in perms:
            for i in range(1, D + 1):
                left, right = {}, {}
                for u in p[:i - 1]:
                    left[u] = left.get(u, 0) + 1
                for u in p[i - 1:]:
                    right[u] = right.get(u, 0) + 1
                total += m.split_loss(SplitContext(left, right, i, D))
        assert total / (len(perms) * D) == pytest.approx(nll, abs=1e-12)

    @pytest.mark.parametrize("widths", [(4,), (4, 3), (3, 4, 2)])
    @pytest.mark.parametrize("act", ["tanh", "sigmoid"])
    def test_gradcheck(self, widths, act):
        rng = np.random.default_rng(1)
        m = DeepDocNadeModel.init(6, widths, rng, act=act)
        jitter(m.params, rng)
        s = SplitContext({0: 1, 2: 2}, {2: 1, 5: 1}, 4, 5)
        assert gradcheck(lambda p: m.split_loss_and_grad(s), m.params).passed

    @given(st.integers(0, 2**32 - 1), st.booleans())
    def test_draw_split_never_empty(self, seed, exact):
        s = make().draw_split({3: 1, 1: 1}, np.random.default_rng(seed), exact)
        assert s.right_hist and 1 <= s.i <= s.D == 2

    def test_training_lowers_loss(self):
        m = make(6, (5,), seed=2)
        bags = [{0: 3, 1: 2}, {0: 1, 1: 4}]
        seqs = [[0, 0, 0, 1, 1], [1, 0, 1, 1, 1]]
        before = sum(-m.ordered_doc_logprob(s) for s in seqs)
        opt = Adam(lr=0.05)
        rng = np.random.default_rng(0)
        for _ in range(100):
            m.train_batch(bags, rng, opt)
        assert sum(-m.ordered_doc_logprob(s) for s in seqs) < before


class TestEnsemble:

    def test_m1_is_single_ordering(self):
        m = make()
        spec = EnsembleSpec(M=1, seed=3)
        members = ensemble_member_logprobs(m, {1: 2, 2: 1}, spec, "doc")
        assert ensemble_logprob(m, {1: 2, 2: 1}, spec, "doc") == pytest.approx(members[0], abs=1e-14)

    def test_reproducible(self):
        m = make()
        spec = EnsembleSpec(M=8, seed=3)
        assert ensemble_logprob(m, {1: 2, 2: 3}, spec, "a") == ensemble_logprob(m, {1: 2, 2: 3}, spec, "a")

    def test_log_mean_exp(self):
        m = make()
        spec = EnsembleSpec(M=6, seed=1)
        lp = ensemble_member_logprobs(m, {0: 2, 5: 2}, spec, "x")
        assert ensemble_logprob(m, {0: 2, 5: 2}, spec, "x") == pytest.approx(math.log(np.mean(np.exp(lp))), abs=1e-13)

    @given(st.integers(1, 20), st.integers(0, 1000))
    def test_jensen(self, M, seed):
        m = make(seed=seed % 7)
        spec = EnsembleSpec(M=M, seed=seed)
        lp = ensemble_member_logprobs(m, {0: 1, 1: 2, 3: 1}, spec)
        assert ensemble_logprob(m, {0: 1, 1: 2, 3: 1}, spec) >= lp.mean() - 1e-12

    def test_bad_size(self):
        with pytest.raises(ValueError):
            EnsembleSpec(M=0)

    def test_log_mean_exp_single(self):
        assert log_mean_exp([-3.5]) == -3.5
