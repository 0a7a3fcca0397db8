"""Single-hidden-layer DocNADE with a binary-tree output layer."""
from __future__ import annotations

import itertools

import numpy as np

from .corpus import Document
from .nn_core import Params, activation, activation_grad, init_params, log_mean_exp, log_sigmoid, sigmoid
from .vocab_tree import BinaryWordTree


class DocNadeModel:
    """Autoregressive bag-of-words model.

    Every prefix of a document is summarized by the sum of its word
    embeddings (columns of ``params["embed"]``), so hidden states depend only
    on the context's word counts. Each conditional is a product of logistic
    decisions along the target word's path in ``tree``; one logistic unit per
    internal node (rows of ``params["node_weight"]``).
    """

    kind = "docnade"

    def __init__(self, params: Params, tree: BinaryWordTree, act: str = "sigmoid"):
        H, V = params["embed"].shape
        if tree.V != V:
            raise ValueError(f"tree has {tree.V} leaves but vocabulary has {V} words")
        expected = {"embed": (H, V), "hidden_bias": (H,), "node_weight": (V - 1, H), "node_bias": (V - 1,)}
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ValueError(f"{name} has shape {params[name].shape}, expected {shape}")
        self.params = params
        self.tree = tree
        self.act = act
        self._nodes, self._bits, self._mask = tree.padded_paths()

    @classmethod
    def init(cls, V: int, H: int, tree: BinaryWordTree, rng: np.random.Generator,
             act: str = "sigmoid", output_init: str = "uniform_fan") -> "DocNadeModel":
        params = {
            "embed": init_params((H, V), "uniform_fan", rng),
            "hidden_bias": np.zeros(H),
            "node_weight": init_params((V - 1, H), output_init, rng),
            "node_bias": np.zeros(V - 1),
        }
        return cls(params, tree, act)

    @property
    def V(self) -> int:
        return self.params["embed"].shape[1]

    @property
    def H(self) -> int:
        return self.params["embed"].shape[0]

    def _check_ids(self, seq) -> np.ndarray:
        seq = np.asarray(seq, dtype=np.int64)
        if seq.size and (seq.min() < 0 or seq.max() >= self.V):
            raise ValueError(f"word id out of range [0, {self.V})")
        return seq

    def hidden_states(self, seq) -> np.ndarray:
        """H x (D+1) matrix; column i holds the state after the first i words."""
        seq = self._check_ids(seq)
        cols = np.concatenate([self.params["hidden_bias"][:, None], self.params["embed"][:, seq]], axis=1)
        # running pre-activation: bias, then one embedding added per position
        return activation(self.act, np.cumsum(cols, axis=1))

    def word_logprob(self, h: np.ndarray, w: int) -> float:
        nodes, bits = self.tree.word_path(int(w))
        z = self.params["node_bias"][nodes] + self.params["node_weight"][nodes] @ h
        return float(np.sum(log_sigmoid(np.where(bits == 1, z, -z))))

    def all_word_logprobs(self, h: np.ndarray) -> np.ndarray:
        """log p(w | h) for every word, via the padded path tables."""
        z = self.params["node_bias"][self._nodes] + self.params["node_weight"][self._nodes] @ h
        sign = 2.0 * self._bits - 1.0
        return np.sum(log_sigmoid(sign * z) * self._mask, axis=1)

    def _forward(self, seq: np.ndarray):
        hs = self.hidden_states(seq)
        h = hs[:, :-1].T                                    # D x H, state before each word
        nodes, bits, mask = self._nodes[seq], self._bits[seq], self._mask[seq]
        nw = self.params["node_weight"][nodes]              # D x L x H
        z = np.einsum("dlh,dh->dl", nw, h) + self.params["node_bias"][nodes]
        return hs, h, nodes, bits, mask, nw, z

    def conditional_logprobs(self, seq) -> np.ndarray:
        seq = self._check_ids(seq)
        _, _, _, bits, mask, _, z = self._forward(seq)
        return np.sum(log_sigmoid((2.0 * bits - 1.0) * z) * mask, axis=1)

    def doc_logprob(self, seq) -> float:
        seq = self._check_ids(seq)
        if seq.size == 0:
            raise ValueError("empty document")
        return float(np.sum(self.conditional_logprobs(seq)))

    sequence_logprob = doc_logprob

    def bag_logprob_exact(self, counts: dict[int, int]) -> float:
        """log of the uniform average of p over all distinct orderings (small D only)."""
        words = [w for w in sorted(counts) for _ in range(counts[w])]
        if len(words) > 8:
            raise ValueError("enumeration bound exceeded")
        if not words:
            raise ValueError("empty document")
        orderings = sorted(set(itertools.permutations(words)))
        return log_mean_exp([self.doc_logprob(o) for o in orderings])

    def doc_representation(self, doc) -> np.ndarray:
        """Hidden state given the whole document; independent of word order."""
        if isinstance(doc, Document):
            keys, cnts = doc.bag_arrays()
        elif isinstance(doc, dict):
            keys = np.array(sorted(doc), dtype=np.int64)
            cnts = np.array([doc[k] for k in keys], dtype=np.float64)
        else:
            keys, cnts = np.unique(self._check_ids(doc), return_counts=True)
        pre = self.params["hidden_bias"] + self.params["embed"][:, keys] @ np.asarray(cnts, dtype=np.float64)
        return activation(self.act, pre)

    def loss_and_grad(self, seq) -> tuple[float, Params]:
        """Negative log-likelihood of one ordered document and its gradient."""
        seq = self._check_ids(seq)
        if seq.size == 0:
            raise ValueError("empty document")
        p = self.params
        hs, h, nodes, bits, mask, nw, z = self._forward(seq)
        nll = -float(np.sum(log_sigmoid((2.0 * bits - 1.0) * z) * mask))

        dz = (sigmoid(z) - bits) * mask                     # D x L
        g_node_w = np.zeros_like(p["node_weight"])
        g_node_b = np.zeros_like(p["node_bias"])
        np.add.at(g_node_w, nodes, dz[:, :, None] * h[:, None, :])
        np.add.at(g_node_b, nodes, dz)

        dh = np.einsum("dl,dlh->dh", dz, nw)
        da = dh * activation_grad(self.act, h)              # D x H
        # word k feeds every later position: reverse cumulative sum of deltas
        after = np.cumsum(da[::-1], axis=0)[::-1]
        contrib = np.zeros_like(da)
        contrib[:-1] = after[1:]
        g_embed_t = np.zeros((self.V, self.H))
        np.add.at(g_embed_t, seq, contrib)
        grads = {
            "embed": g_embed_t.T.copy(),
            "hidden_bias": da.sum(axis=0),
            "node_weight": g_node_w,
            "node_bias": g_node_b,
        }
        return nll, grads

    def batch_loss_and_grad(self, seqs) -> tuple[float, Params]:
        """Mean NLL and mean gradient over several ordered documents."""
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
        return total / n, {k: v / n for k, v in acc.items()}

    def train_step(self, seq, optimizer) -> float:
        nll, grads = self.loss_and_grad(seq)
        optimizer.step(self.params, grads)
        return nll

    def train_batch(self, seqs, optimizer) -> float:
        loss, grads = self.batch_loss_and_grad(seqs)
        optimizer.step(self.params, grads)
        return loss
