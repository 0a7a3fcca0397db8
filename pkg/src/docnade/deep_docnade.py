"""Deep DocNADE: stacked hidden layers over the context histogram, a flat
softmax output, and training on a single random context/target split per
document."""
from __future__ import annotations

import zlib
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .corpus import SplitContext, sample_ordering, split_histogram, split_ordering, Document
from .nn_core import Params, activation, activation_grad, init_params, log_mean_exp, log_softmax

SUPPORTED_DEPTHS = (1, 2, 3)


@dataclass(frozen=True)
class EnsembleSpec:
    M: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("ensemble size must be >= 1")


def split_weight(D: int, i: int) -> Fraction:
    """Rescaling of the target-side sum: D / (D - i + 1), exact."""
    if not 1 <= i <= D:
        raise ValueError(f"split position {i} outside 1..{D}")
    return Fraction(D, D - i + 1)


def _as_pairs(hist) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(hist, dict):
        keys = np.array(sorted(hist), dtype=np.int64)
        vals = np.array([hist[k] for k in keys], dtype=np.float64)
    else:
        dense = np.asarray(hist, dtype=np.float64)
        keys = np.flatnonzero(dense)
        vals = dense[keys]
    if vals.size and vals.min() < 0:
        raise ValueError("negative count in histogram")
    return keys, vals


class DeepDocNadeModel:
    kind = "deep_docnade"

    def __init__(self, params: Params, act: str = "tanh"):
        self.params = params
        self.act = act
        self.depth = 1
        while f"hidden_weight_{self.depth + 1}" in params:
            self.depth += 1
        if self.depth not in SUPPORTED_DEPTHS:
            raise ValueError("unsupported depth")
        widths = self.widths
        V = self.V
        expected = {"embed": (widths[0], V), "hidden_bias_1": (widths[0],),
                    "out_weight": (V, widths[-1]), "out_bias": (V,)}
        for n in range(2, self.depth + 1):
            expected[f"hidden_weight_{n}"] = (widths[n - 1], widths[n - 2])
            expected[f"hidden_bias_{n}"] = (widths[n - 1],)
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ValueError(f"{name} has shape {params[name].shape}, expected {shape}")

    @classmethod
    def init(cls, V: int, widths, rng: np.random.Generator, act: str = "tanh",
             output_init: str = "uniform_fan") -> "DeepDocNadeModel":
        widths = [int(w) for w in widths]
        if len(widths) not in SUPPORTED_DEPTHS:
            raise ValueError("unsupported depth")
        params = {"embed": init_params((widths[0], V), "uniform_fan", rng),
                  "hidden_bias_1": np.zeros(widths[0])}
        for n in range(2, len(widths) + 1):
            params[f"hidden_weight_{n}"] = init_params((widths[n - 1], widths[n - 2]), "uniform_fan", rng)
            params[f"hidden_bias_{n}"] = np.zeros(widths[n - 1])
        params["out_weight"] = init_params((V, widths[-1]), output_init, rng)
        params["out_bias"] = np.zeros(V)
        return cls(params, act)

    @property
    def V(self) -> int:
        return self.params["embed"].shape[1]

    @property
    def widths(self) -> list[int]:
        out = [self.params["embed"].shape[0]]
        for n in range(2, self.depth + 1):
            out.append(self.params[f"hidden_weight_{n}"].shape[0])
        return out

    # -- forward ---------------------------------------------------------

    def _layers(self, pre1: np.ndarray) -> list[np.ndarray]:
        """Hidden layers from first-layer pre-activations (vector or H1 x B)."""
        hs = [activation(self.act, pre1)]
        for n in range(2, self.depth + 1):
            W, c = self.params[f"hidden_weight_{n}"], self.params[f"hidden_bias_{n}"]
            bias = c if pre1.ndim == 1 else c[:, None]
            hs.append(activation(self.act, bias + W @ hs[-1]))
        return hs

    def _out_logits(self, top: np.ndarray) -> np.ndarray:
        b = self.params["out_bias"]
        return self.params["out_weight"] @ top + (b if top.ndim == 1 else b[:, None])

    def _pre1(self, hist) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        keys, vals = _as_pairs(hist)
        if keys.size and keys.max() >= self.V:
            raise ValueError("word id out of range")
        pre = self.params["hidden_bias_1"] + self.params["embed"][:, keys] @ vals
        return pre, keys, vals

    def forward(self, hist) -> tuple[list[np.ndarray], np.ndarray]:
        """Hidden layers and the output distribution given a context histogram."""
        pre, _, _ = self._pre1(hist)
        hs = self._layers(pre)
        return hs, np.exp(log_softmax(self._out_logits(hs[-1])))

    def doc_representation(self, doc) -> np.ndarray:
        hist = doc.histogram() if isinstance(doc, Document) else doc
        return self.forward(hist)[0][-1]

    def conditional_logprobs(self, seq) -> np.ndarray:
        seq = np.asarray(seq, dtype=np.int64)
        if seq.size and (seq.min() < 0 or seq.max() >= self.V):
            raise ValueError("word id out of range")
        cols = np.concatenate([self.params["hidden_bias_1"][:, None], self.params["embed"][:, seq[:-1]]], axis=1)
        pre = np.cumsum(cols, axis=1)                       # incremental first layer
        logp = log_softmax(self._out_logits(self._layers(pre)[-1]), axis=0)
        return logp[seq, np.arange(seq.size)]

    def ordered_doc_logprob(self, seq) -> float:
        seq = np.asarray(seq, dtype=np.int64)
        if seq.size == 0:
            raise ValueError("empty document")
        return float(np.sum(self.conditional_logprobs(seq)))

    sequence_logprob = ordered_doc_logprob

    # -- split loss --------------------------------------------------------

    def split_loss(self, split: SplitContext) -> float:
        return self.split_loss_and_grad(split, need_grad=False)[0]

    def split_loss_and_grad(self, split: SplitContext, need_grad: bool = True):
        rkeys, rvals = _as_pairs(split.right_hist)
        if rvals.sum() < 1:
            raise ValueError("empty target side")
        pre, lkeys, lvals = self._pre1(split.left_hist)
        hs = self._layers(pre)
        logp = log_softmax(self._out_logits(hs[-1]))
        factor = split.D / (split.D - split.i + 1)
        loss = factor * float(-np.dot(rvals, logp[rkeys]))
        if not need_grad:
            return loss, None

        p = self.params
        dlogits = factor * rvals.sum() * np.exp(logp)
        dlogits[rkeys] -= factor * rvals
        grads = {"out_weight": np.outer(dlogits, hs[-1]), "out_bias": dlogits}
        dh = p["out_weight"].T @ dlogits
        for n in range(self.depth, 1, -1):
            da = dh * activation_grad(self.act, hs[n - 1])
            grads[f"hidden_weight_{n}"] = np.outer(da, hs[n - 2])
            grads[f"hidden_bias_{n}"] = da
            dh = p[f"hidden_weight_{n}"].T @ da
        da = dh * activation_grad(self.act, hs[0])
        g_embed = np.zeros_like(p["embed"])
        g_embed[:, lkeys] = np.outer(da, lvals)
        grads["embed"] = g_embed
        grads["hidden_bias_1"] = da
        return loss, grads

    def draw_split(self, counts: dict[int, int], rng: np.random.Generator, exact: bool = False) -> SplitContext:
        """Histogram split (default) or exact shuffle-then-cut; never an empty target side."""
        while True:
            split = split_ordering(counts, rng) if exact else split_histogram(counts, rng)
            if split.right_hist:
                return split

    def train_step(self, counts: dict[int, int], rng: np.random.Generator, optimizer, exact: bool = False) -> float:
        loss, grads = self.split_loss_and_grad(self.draw_split(counts, rng, exact))
        optimizer.step(self.params, grads)
        return loss

    def train_batch(self, bags, rng, optimizer, exact: bool = False) -> float:
        total, acc = 0.0, None
        for counts in bags:
            loss, g = self.split_loss_and_grad(self.draw_split(counts, rng, exact))
            total += loss
            if acc is None:
                acc = g
            else:
                for k in acc:
                    acc[k] += g[k]
        n = len(bags)
        optimizer.step(self.params, {k: v / n for k, v in acc.items()})
        return total / n


# -- ordering ensembles -------------------------------------------------------

def ensemble_rng(spec: EnsembleSpec, source_id: str = "") -> np.random.Generator:
    """Per-document generator, fixed by (spec.seed, source_id)."""
    return np.random.default_rng([spec.seed, zlib.crc32(source_id.encode("utf-8"))])


def ensemble_member_logprobs(model, counts: dict[int, int], spec: EnsembleSpec, source_id: str = "") -> np.ndarray:
    """Log-probabilities of the document under ``spec.M`` sampled orderings.

    Works with any model exposing ``sequence_logprob``.
    """
    rng = ensemble_rng(spec, source_id)
    bag = Document(counts=dict(counts))
    return np.array([model.sequence_logprob(sample_ordering(bag, rng).ids) for _ in range(spec.M)])


def ensemble_logprob(model, counts: dict[int, int], spec: EnsembleSpec, source_id: str = "") -> float:
    """log((1/M) sum_m p(v^(m))), computed with max subtraction."""
    return log_mean_exp(ensemble_member_logprobs(model, counts, spec, source_id))
