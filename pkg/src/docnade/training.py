"""Run configuration, model construction and the epoch loop."""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .corpus import Document, sample_ordering
from .deep_docnade import DeepDocNadeModel, EnsembleSpec, SUPPORTED_DEPTHS, ensemble_logprob
from .docnade import DocNadeModel
from .docnade_lm import DocNadeLmModel
from .evalkit import perplexity, word_perplexity
from .nn_core import make_optimizer
from .vocab_tree import build_class_partition, build_huffman_tree, build_random_tree

log = logging.getLogger(__name__)

DEFAULT_ACTIVATION = {"docnade": "sigmoid", "deep_docnade": "tanh", "docnade_lm": "sigmoid"}


@dataclass
class TrainConfig:
    kind: str = "docnade"
    hidden: int = 50
    layers: int = 1
    ngram: int = 6
    activation: str = ""            # empty: per-kind default
    optimizer: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 50
    batch_size: int = 64
    seed: int = 1234
    tree: str = "random"
    group: int = 1
    patience: int = 0               # 0 disables early stopping
    valid_ensemble: int = 1
    exact_split: bool = False
    doc_context: bool = True
    output_init: str = "uniform_fan"

    def __post_init__(self):
        if self.kind not in DEFAULT_ACTIVATION:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if not self.activation:
            self.activation = DEFAULT_ACTIVATION[self.kind]
        if self.kind == "deep_docnade" and self.layers not in SUPPORTED_DEPTHS:
            raise ValueError("unsupported depth")
        if self.tree not in ("random", "huffman"):
            raise ValueError(f"unknown tree kind {self.tree!r}")
        if self.hidden < 1 or self.epochs < 0 or self.batch_size < 1 or self.group < 1:
            raise ValueError("hidden, batch_size and group must be positive")
        if self.kind == "docnade_lm" and self.ngram < 2:
            raise ValueError("n-gram order must be >= 2")

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}={str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str, **overrides) -> "TrainConfig":
        """Flat ``key=value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if not sep or key not in types:
                raise ValueError(f"config line {lineno}: unknown or malformed entry {line!r}")
            values[key] = _coerce(raw, types[key])
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def _coerce(raw: str, typ: str):
    if typ == "bool":
        if raw.lower() not in ("true", "false", "1", "0"):
            raise ValueError(f"not a boolean: {raw!r}")
        return raw.lower() in ("true", "1")
    if typ == "int":
        return int(raw)
    if typ == "float":
        return float(raw)
    return raw


def build_model(cfg: TrainConfig, V: int, frequencies=None):
    rng = np.random.default_rng([cfg.seed, 0])
    if cfg.kind == "docnade":
        if cfg.tree == "huffman":
            tree = build_huffman_tree([max(int(f), 1) for f in (frequencies or [1] * V)])
        else:
            tree = build_random_tree(V, seed=cfg.seed)
        return DocNadeModel.init(V, cfg.hidden, tree, rng, cfg.activation, cfg.output_init)
    if cfg.kind == "deep_docnade":
        return DeepDocNadeModel.init(V, [cfg.hidden] * cfg.layers, rng, cfg.activation, cfg.output_init)
    return DocNadeLmModel.init(V, cfg.hidden, cfg.ngram, build_class_partition(V), rng,
                               cfg.activation, cfg.doc_context, cfg.output_init)


def logprob_fn(model, M: int = 1, seed: int = 0) -> Callable[[Document], float]:
    """Document scorer: ordering ensemble for the topic models, sequence log-prob for the LM."""
    if model.kind == "docnade_lm":
        return lambda d: model.doc_logprob(d.ids)
    spec = EnsembleSpec(M, seed)
    return lambda d: ensemble_logprob(model, d.histogram(), spec, d.source_id)


def evaluate(model, docs, M: int = 1, seed: int = 0, threads: int = 1):
    fn = logprob_fn(model, M, seed)
    if model.kind == "docnade_lm":
        return word_perplexity(fn, docs, threads=threads)
    return perplexity(fn, docs, M=M, threads=threads)


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    valid_perplexity: float = math.nan


def fit(model, docs: list[Document], cfg: TrainConfig, valid: list[Document] | None = None,
        on_epoch: Callable[[EpochRecord], None] | None = None) -> list[EpochRecord]:
    """Train in place. Topic models get a fresh ordering (or split) per document per epoch."""
    if not docs:
        raise ValueError("empty training corpus")
    opt = make_optimizer(cfg.optimizer, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    rng = np.random.default_rng([cfg.seed, 1])
    bags = [d.histogram() for d in docs] if model.kind != "docnade_lm" else None
    history: list[EpochRecord] = []
    best, best_params, stale = math.inf, None, 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(docs))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if model.kind == "docnade":
                seqs = [sample_ordering(docs[j], rng).ids for j in idx]
                total += model.train_batch(seqs, opt) * len(idx)
            elif model.kind == "deep_docnade":
                total += model.train_batch([bags[j] for j in idx], rng, opt, cfg.exact_split) * len(idx)
            else:
                total += model.train_batch([docs[j].ids for j in idx], opt) * len(idx)
        rec = EpochRecord(epoch, total / len(docs))
        if valid:
            rec.valid_perplexity = evaluate(model, valid, cfg.valid_ensemble, cfg.seed).perplexity
            if rec.valid_perplexity < best:
                best, stale = rec.valid_perplexity, 0
                best_params = {k: v.copy() for k, v in model.params.items()}
            else:
                stale += 1
        history.append(rec)
        log.info("epoch %d loss %.6f valid ppl %.4f", epoch, rec.mean_loss, rec.valid_perplexity)
        if on_epoch:
            on_epoch(rec)
        if cfg.patience and valid and stale >= cfg.patience:
            log.info("early stop after %d epochs without improvement", stale)
            break
    if best_params is not None and cfg.patience:
        for k, v in best_params.items():
            model.params[k][...] = v
    return history
