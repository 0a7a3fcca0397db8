"""Evaluation: perplexity, retrieval precision/recall, embedding inspection."""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .deep_docnade import EnsembleSpec, ensemble_logprob


@dataclass
class PerplexityReport:
    perplexity: float
    n_docs: int
    n_words: int
    M: int = 1
    rows: list[tuple[str, int, float]] = field(default_factory=list, repr=False)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["doc_id", "n_words", "logprob"])
            for doc_id, n, lp in self.rows:
                w.writerow([doc_id, n, repr(float(lp))])


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def perplexity(logprob_fn: Callable, docs: Sequence, M: int = 1, threads: int = 1) -> PerplexityReport:
    """exp(-(1/T) sum_t log p(v_t) / |v_t|): per-word normalization inside each document."""
    docs = list(docs)
    if not docs:
        raise ValueError("no documents to evaluate")
    lengths = [len(d) for d in docs]
    if min(lengths) == 0:
        raise ValueError("empty document in evaluation set")
    logps = _map(logprob_fn, docs, threads)
    mean = sum(lp / n for lp, n in zip(logps, lengths)) / len(docs)
    rows = [(getattr(d, "source_id", str(t)), n, lp) for t, (d, n, lp) in enumerate(zip(docs, lengths, logps))]
    return PerplexityReport(math.exp(-mean), len(docs), sum(lengths), M, rows)


def word_perplexity(logprob_fn: Callable, docs: Sequence, threads: int = 1) -> PerplexityReport:
    """exp(-sum log p / total words): pooled over every word of every document."""
    docs = list(docs)
    if not docs:
        raise ValueError("no documents to evaluate")
    lengths = [len(d) for d in docs]
    logps = _map(logprob_fn, docs, threads)
    rows = [(getattr(d, "source_id", str(t)), n, lp) for t, (d, n, lp) in enumerate(zip(docs, lengths, logps))]
    return PerplexityReport(math.exp(-sum(logps) / sum(lengths)), len(docs), sum(lengths), 1, rows)


def ensemble_perplexity(model, docs: Sequence, spec: EnsembleSpec, max_docs: int | None = None,
                        threads: int = 1) -> PerplexityReport:
    """Perplexity with each document scored by an M-ordering ensemble.

    ``max_docs`` keeps only the first documents of the list.
    """
    docs = list(docs)[:max_docs] if max_docs else list(docs)
    return perplexity(lambda d: ensemble_logprob(model, d.histogram(), spec, d.source_id), docs,
                      M=spec.M, threads=threads)


# -- retrieval ------------------------------------------------------------------

@dataclass
class PRCurve:
    cutoffs: np.ndarray
    recall: np.ndarray
    precision: np.ndarray
    n_queries: int
    missing_labels: int = 0

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.recall.tolist(), self.precision.tolist()))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["cutoff", "recall", "precision"])
            for k, r, p in zip(self.cutoffs, self.recall, self.precision):
                w.writerow([int(k), repr(float(r)), repr(float(p))])


def cosine_similarities(query: np.ndarray, db: np.ndarray) -> np.ndarray:
    """Cosine of ``query`` against each row of ``db``; zero-norm rows get -inf."""
    qn = np.linalg.norm(query)
    dn = np.linalg.norm(db, axis=1)
    sims = np.full(db.shape[0], -np.inf)
    if qn == 0:
        warnings.warn("zero-norm query representation; all similarities are -inf")
        return sims
    ok = dn > 0
    if not ok.all():
        warnings.warn(f"{int((~ok).sum())} zero-norm database representations ranked last")
    sims[ok] = (db[ok] @ query) / (dn[ok] * qn)
    return sims


def default_cutoffs(n_db: int, db_labels: Sequence) -> np.ndarray:
    """1, 2, 5, 10, 20, 50, ... up to N, plus every per-label relevant-set size."""
    grid = set()
    base = 1
    while base <= n_db:
        for m in (1, 2, 5):
            if m * base <= n_db:
                grid.add(m * base)
        base *= 10
    grid.add(n_db)
    sizes: dict = {}
    for labels in db_labels:
        for lab in set(labels):
            sizes[lab] = sizes.get(lab, 0) + 1
    grid.update(sizes.values())
    return np.array(sorted(grid), dtype=np.int64)


def retrieval_pr(query_reps, db_reps, query_labels, db_labels, cutoffs=None,
                 db_ids: Sequence | None = None) -> PRCurve:
    """Precision/recall at rank cutoffs, averaged over each query's labels and then over queries.

    Database documents are ranked by descending cosine similarity; ties go to
    the smaller ``db_ids`` entry (default: database position).
    """
    query_reps = np.asarray(query_reps, dtype=np.float64)
    db_reps = np.asarray(db_reps, dtype=np.float64)
    if query_reps.shape[1] != db_reps.shape[1]:
        raise ValueError("query and database representations differ in width")
    N = db_reps.shape[0]
    cutoffs = default_cutoffs(N, db_labels) if cutoffs is None else np.asarray(cutoffs, dtype=np.int64)
    if cutoffs.min() < 1 or cutoffs.max() > N:
        raise ValueError(f"cutoffs must lie in 1..{N}")
    tie_key = np.arange(N) if db_ids is None else np.array(db_ids)
    db_sets = [set(labs) for labs in db_labels]
    rel_size: dict = {}
    for labs in db_sets:
        for lab in labs:
            rel_size[lab] = rel_size.get(lab, 0) + 1

    recall_sum = np.zeros(cutoffs.size)
    prec_sum = np.zeros(cutoffs.size)
    missing = 0
    for q, labels in zip(query_reps, query_labels):
        labels = sorted(set(labels))
        if not labels:
            raise ValueError("query without labels")
        sims = cosine_similarities(q, db_reps)
        order = np.lexsort((tie_key, -sims))
        q_rec = np.zeros(cutoffs.size)
        q_prec = np.zeros(cutoffs.size)
        for lab in labels:
            relevant = np.array([lab in db_sets[j] for j in order], dtype=np.int64)
            hits = np.cumsum(relevant)[cutoffs - 1]
            total = rel_size.get(lab, 0)
            if total == 0:
                missing += 1
                continue                                     # all-zero curve for this label
            q_rec = q_rec + hits / total
            q_prec = q_prec + hits / cutoffs
        recall_sum = recall_sum + q_rec / len(labels)
        prec_sum = prec_sum + q_prec / len(labels)
    nq = query_reps.shape[0]
    if missing:
        warnings.warn(f"{missing} query labels have no relevant database document")
    return PRCurve(cutoffs, recall_sum / nq, prec_sum / nq, nq, missing)


# -- embedding inspection ----------------------------------------------------------

def nearest_words(W: np.ndarray, w: int, k: int) -> list[int]:
    """k columns of ``W`` most cosine-similar to column ``w``, excluding ``w``; ties by id."""
    V = W.shape[1]
    if not 0 <= w < V:
        raise ValueError(f"unknown word {w}")
    if k >= V:
        raise ValueError("k must be smaller than the vocabulary")
    norms = np.linalg.norm(W, axis=0)
    if norms[w] == 0:
        raise ValueError(f"word {w} has a zero embedding")
    zero = norms == 0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} zero-norm embeddings excluded")
    sims = np.full(V, -np.inf)
    ok = ~zero
    sims[ok] = (W[:, ok].T @ W[:, w]) / (norms[ok] * norms[w])
    sims[w] = -np.inf
    candidates = np.flatnonzero(ok & (np.arange(V) != w))
    order = candidates[np.lexsort((candidates, -sims[candidates]))]
    return order[:k].tolist()


def hidden_unit_topics(W: np.ndarray, unit: int, top_k: int = 10) -> list[int]:
    """Words with the largest signed connection to hidden ``unit``; ties by id."""
    if not 0 <= unit < W.shape[0]:
        raise ValueError(f"unknown hidden unit {unit}")
    row = W[unit]
    order = np.lexsort((np.arange(row.size), -row))
    return order[:top_k].tolist()
