import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from docnade.synthetic import topic_corpus, topical_sentences
from docnade.training import TrainConfig, build_model, evaluate, fit


class TestConfig:

    def test_defaults_per_kind(self):
        assert TrainConfig(kind="docnade").activation == "sigmoid"
        assert TrainConfig(kind="deep_docnade").activation == "tanh"

    @given(st.sampled_from(["docnade", "deep_docnade", "docnade_lm"]), st.integers(1, 100),
           st.floats(1e-5, 1.0), st.booleans())
    def test_text_roundtrip(self, kind, hidden, lr, exact):
        cfg = TrainConfig(kind=kind, hidden=hidden, lr=lr, exact_split=exact)
        assert TrainConfig.parse(cfg.to_text()) == cfg

    def test_overrides_win(self):
        cfg = TrainConfig.parse("hidden=7\nlr=0.5\n", hidden=9)
        assert cfg.hidden == 9 and cfg.lr == 0.5

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown or malformed"):
            TrainConfig.parse("hiden=3\n")

    @pytest.mark.parametrize("layers", [0, 4])
    def test_depth(self, layers):
        with pytest.raises(ValueError, match="unsupported depth"):
            TrainConfig(kind="deep_docnade", layers=layers)


class TestFit:

    def test_loss_decreases(self):
        docs = topic_corpus(40, V=12, doc_len=(5, 10), seed=0)
        cfg = TrainConfig(kind="docnade", hidden=5, epochs=15, batch_size=8, lr=0.02, seed=0)
        model = build_model(cfg, 12)
        history = fit(model, docs, cfg)
        assert history[-1].mean_loss < history[0].mean_loss

    def test_early_stopping_restores_best(self):
        docs = topic_corpus(30, V=12, doc_len=(5, 10), seed=1)
        cfg = TrainConfig(kind="deep_docnade", hidden=5, epochs=40, batch_size=5, lr=0.05, seed=1, patience=2)
        model = build_model(cfg, 12)
        history = fit(model, docs[:20], cfg, valid=docs[20:])
        best = min(r.valid_perplexity for r in history)
        assert evaluate(model, docs[20:], M=1, seed=cfg.seed).perplexity == best

    def test_language_model_perplexity_is_pooled(self):
        sentences, V = topical_sentences(4, seed=0)
        cfg = TrainConfig(kind="docnade_lm", hidden=4, ngram=3, epochs=0)
        model = build_model(cfg, V)
        total = sum(model.doc_logprob(s.ids) for s in sentences)
        n = sum(len(s) for s in sentences)
        assert evaluate(model, sentences).perplexity == pytest.approx(math.exp(-total / n), rel=1e-12)

    def test_huffman_uses_frequencies(self):
        cfg = TrainConfig(kind="docnade", hidden=3, tree="huffman")
        model = build_model(cfg, 4, frequencies=[100, 1, 1, 0])
        assert model.tree.depths()[0] == 1
        assert np.isfinite(model.doc_logprob([0, 3]))
