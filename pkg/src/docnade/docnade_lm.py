"""DocNADE language model.

The hidden state before word i adds two terms to a shared bias: the sum of
document-context embeddings of *all* previous words, and an n-gram term where
each of the last n-1 words' embeddings goes through its own position matrix.
Positions before the start of the document read a reserved padding column
(index V) of the n-gram embedding table. The output is a two-level softmax:
p(w | h) = p(class(w) | h) * p(w | class(w), h).
"""
from __future__ import annotations

import numpy as np

from .nn_core import Params, activation, activation_grad, init_params, log_softmax
from .vocab_tree import ClassPartition


class DocNadeLmModel:
    kind = "docnade_lm"

    def __init__(self, params: Params, partition: ClassPartition, n: int,
                 act: str = "sigmoid", doc_context: bool = True):
        if n < 2:
            raise ValueError("n-gram order must be >= 2")
        self.params = params
        self.partition = partition
        self.n = n
        self.act = act
        # False gives the feed-forward n-gram ablation (no document term)
        self.doc_context = doc_context
        H, V = params["doc_embed"].shape
        C = partition.C
        expected = {"doc_embed": (H, V), "ngram_embed": (H, V + 1), "hidden_bias": (H,),
                    "class_weight": (C, H), "class_bias": (C,), "word_weight": (V, H), "word_bias": (V,)}
        for k in range(1, n):
            expected[f"context_weight_{k}"] = (H, H)
        for name, shape in expected.items():
            if name not in params:
                raise ValueError(f"missing parameter {name}")
            if params[name].shape != shape:
                raise ValueError(f"{name} has shape {params[name].shape}, expected {shape}")
        if partition.V != V:
            raise ValueError("class partition does not cover the vocabulary")
        self._pos_in_class = partition.position_in_class()

    @classmethod
    def init(cls, V: int, H: int, n: int, partition: ClassPartition, rng: np.random.Generator,
             act: str = "sigmoid", doc_context: bool = True, output_init: str = "uniform_fan") -> "DocNadeLmModel":
        params = {
            "doc_embed": init_params((H, V), "uniform_fan", rng) if doc_context else np.zeros((H, V)),
            "ngram_embed": init_params((H, V + 1), "uniform_fan", rng),
            "hidden_bias": np.zeros(H),
            "class_weight": init_params((partition.C, H), output_init, rng),
            "class_bias": np.zeros(partition.C),
            "word_weight": init_params((V, H), output_init, rng),
            "word_bias": np.zeros(V),
        }
        for k in range(1, n):
            params[f"context_weight_{k}"] = init_params((H, H), "uniform_fan", rng)
        return cls(params, partition, n, act, doc_context)

    @property
    def V(self) -> int:
        return self.params["doc_embed"].shape[1]

    @property
    def H(self) -> int:
        return self.params["doc_embed"].shape[0]

    @property
    def pad_id(self) -> int:
        return self.V

    def _check_ids(self, seq) -> np.ndarray:
        seq = np.asarray(seq, dtype=np.int64)
        if seq.size and (seq.min() < 0 or seq.max() >= self.V):
            raise ValueError(f"word id out of range [0, {self.V})")
        return seq

    def _contexts(self, seq: np.ndarray) -> list[np.ndarray]:
        """For k = 1..n-1, the id at position i-k for every i (pad before the start)."""
        padded = np.concatenate([np.full(self.n - 1, self.pad_id, dtype=np.int64), seq])
        D = seq.size
        return [padded[self.n - 1 - k: self.n - 1 - k + D] for k in range(1, self.n)]

    def ngram_term(self, recent) -> np.ndarray:
        """n-gram contribution given the preceding words (only the last n-1 are read)."""
        recent = self._check_ids(recent)
        h = np.zeros(self.H)
        for k in range(1, self.n):
            w = recent[-k] if k <= recent.size else self.pad_id
            h = h + self.params[f"context_weight_{k}"] @ self.params["ngram_embed"][:, w]
        return h

    def doc_term(self, history) -> np.ndarray:
        history = self._check_ids(history)
        if not self.doc_context:
            return np.zeros(self.H)
        return self.params["doc_embed"][:, history].sum(axis=1)

    def hidden(self, history, i: int) -> np.ndarray:
        """Hidden state for predicting word ``i`` (1-based) given words 1..i-1."""
        history = self._check_ids(history)
        if history.size != i - 1:
            raise ValueError(f"history has {history.size} words but position is {i}")
        pre = (self.params["hidden_bias"] + self.doc_term(history)) + self.ngram_term(history)
        return activation(self.act, pre)

    def _doc_sums(self, seq: np.ndarray) -> np.ndarray:
        D = seq.size
        if not self.doc_context:
            return np.zeros((self.H, D))
        out = np.zeros((self.H, D))
        if D > 1:
            out[:, 1:] = np.cumsum(self.params["doc_embed"][:, seq[:-1]], axis=1)
        return out

    def hidden_states(self, seq) -> np.ndarray:
        """H x D matrix of hidden states, one column per predicted position."""
        seq = self._check_ids(seq)
        return self._hidden_from(seq, self._contexts(seq))

    def _hidden_from(self, seq, ctxs) -> np.ndarray:
        lm = np.zeros((self.H, seq.size))
        for k, ctx in enumerate(ctxs, start=1):
            lm = lm + self.params[f"context_weight_{k}"] @ self.params["ngram_embed"][:, ctx]
        pre = (self.params["hidden_bias"][:, None] + self._doc_sums(seq)) + lm
        return activation(self.act, pre)

    # -- output layer --------------------------------------------------------

    def class_logprobs(self, h: np.ndarray) -> np.ndarray:
        return log_softmax(self.params["class_weight"] @ h + self.params["class_bias"])

    def within_class_logprobs(self, h: np.ndarray, c: int) -> np.ndarray:
        m = self.partition.members[c]
        return log_softmax(self.params["word_weight"][m] @ h + self.params["word_bias"][m])

    def word_logprob_2level(self, h: np.ndarray, w: int) -> float:
        if not 0 <= w < self.V:
            raise ValueError(f"unknown word {w}")
        c = int(self.partition.class_of[w])
        return float(self.class_logprobs(h)[c] + self.within_class_logprobs(h, c)[self._pos_in_class[w]])

    def all_word_logprobs(self, h: np.ndarray) -> np.ndarray:
        out = np.empty(self.V)
        lc = self.class_logprobs(h)
        for c, m in enumerate(self.partition.members):
            out[m] = lc[c] + self.within_class_logprobs(h, c)
        return out

    def _output(self, hs: np.ndarray, seq: np.ndarray, need_grad: bool):
        """Per-position log-probs; with ``need_grad`` also d(NLL)/d(hs) and output grads."""
        p = self.params
        D = seq.size
        cls = self.partition.class_of[seq]
        zc = p["class_weight"] @ hs + p["class_bias"][:, None]
        lc = log_softmax(zc, axis=0)
        logp = lc[cls, np.arange(D)].copy()
        grads = {}
        dh = None
        if need_grad:
            dzc = np.exp(lc)
            dzc[cls, np.arange(D)] -= 1.0
            grads["class_weight"] = dzc @ hs.T
            grads["class_bias"] = dzc.sum(axis=1)
            dh = p["class_weight"].T @ dzc
            grads["word_weight"] = np.zeros_like(p["word_weight"])
            grads["word_bias"] = np.zeros_like(p["word_bias"])
        for c in np.unique(cls):
            pos = np.flatnonzero(cls == c)
            m = self.partition.members[c]
            zw = p["word_weight"][m] @ hs[:, pos] + p["word_bias"][m][:, None]
            lw = log_softmax(zw, axis=0)
            rows = self._pos_in_class[seq[pos]]
            logp[pos] += lw[rows, np.arange(pos.size)]
            if need_grad:
                dzw = np.exp(lw)
                dzw[rows, np.arange(pos.size)] -= 1.0
                grads["word_weight"][m] += dzw @ hs[:, pos].T
                grads["word_bias"][m] += dzw.sum(axis=1)
                dh[:, pos] += p["word_weight"][m].T @ dzw
        return logp, dh, grads

    def conditional_logprobs(self, seq) -> np.ndarray:
        seq = self._check_ids(seq)
        return self._output(self.hidden_states(seq), seq, need_grad=False)[0]

    def doc_logprob(self, seq) -> float:
        seq = self._check_ids(seq)
        if seq.size == 0:
            raise ValueError("empty document")
        return float(np.sum(self.conditional_logprobs(seq)))

    sequence_logprob = doc_logprob

    def loss_and_grad(self, seq) -> tuple[float, Params]:
        seq = self._check_ids(seq)
        if seq.size == 0:
            raise ValueError("empty document")
        p = self.params
        ctxs = self._contexts(seq)
        hs = self._hidden_from(seq, ctxs)
        logp, dh, grads = self._output(hs, seq, need_grad=True)
        da = dh * activation_grad(self.act, hs)            # H x D
        grads["hidden_bias"] = da.sum(axis=1)
        g_ngram_t = np.zeros((self.V + 1, self.H))
        for k, ctx in enumerate(ctxs, start=1):
            U = p[f"context_weight_{k}"]
            grads[f"context_weight_{k}"] = da @ p["ngram_embed"][:, ctx].T
            np.add.at(g_ngram_t, ctx, (U.T @ da).T)
        grads["ngram_embed"] = g_ngram_t.T.copy()
        if self.doc_context:
            # word at position k enters the document sum of every later position
            after = np.cumsum(da[:, ::-1], axis=1)[:, ::-1]
            contrib = np.zeros_like(da)
            contrib[:, :-1] = after[:, 1:]
            g_doc_t = np.zeros((self.V, self.H))
            np.add.at(g_doc_t, seq, contrib.T)
            grads["doc_embed"] = g_doc_t.T.copy()
        return -float(np.sum(logp)), grads

    def train_step(self, seq, optimizer) -> float:
        nll, grads = self.loss_and_grad(seq)
        optimizer.step(self.params, grads)
        return nll

    def train_batch(self, seqs, optimizer) -> float:
        total, acc = 0.0, None
        for seq in seqs:
            nll, g = self.loss_and_grad(seq)
            total += nll
            if acc is None:
                acc = g
            else:
                for k in acc:
                    acc[k] += g[k]
        n = len(seqs)
        optimizer.step(self.params, {k: v / n for k, v in acc.items()})
        return total / n
