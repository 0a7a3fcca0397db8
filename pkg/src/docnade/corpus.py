"""Corpus ingestion, vocabularies, count transforms and context sampling.

Documents come in two forms: an ordered sequence of word ids, or a sparse
bag of counts. The topic models train on bags (sampling orderings or splits
on the fly); the language model consumes sequences.
"""
from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np


class CorpusError(ValueError):
    pass


@dataclass
class Vocabulary:
    tokens: list[str]
    frequencies: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.frequencies:
            self.frequencies = [0] * len(self.tokens)
        if len(self.frequencies) != len(self.tokens):
            raise CorpusError("frequencies and tokens differ in length")
        self._index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self._index) != len(self.tokens):
            raise CorpusError("duplicate token in vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    @property
    def padding_id(self) -> int:
        # one past the last word; only ever used as LM context
        return len(self.tokens)

    def lookup(self, token: str) -> int:
        return self._index[token]

    def get(self, token: str, default=None):
        return self._index.get(token, default)

    def token(self, i: int) -> str:
        return self.tokens[i]

    def digest(self) -> str:
        """Stable hash of the token list (frequencies are not part of identity)."""
        h = hashlib.sha256()
        for tok in self.tokens:
            h.update(tok.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for tok, freq in zip(self.tokens, self.frequencies):
                f.write(f"{tok}\t{freq}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        tokens, freqs = [], []
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f):
                line = line.rstrip("\n")
                if not line:
                    raise CorpusError(f"{path}:{lineno + 1}: empty vocabulary line")
                parts = line.split("\t")
                tokens.append(parts[0])
                freqs.append(int(parts[1]) if len(parts) > 1 and parts[1] else 0)
        return cls(tokens, freqs)


@dataclass
class Document:
    """A document in sequence form (``ids``) or bag form (``counts``)."""

    ids: np.ndarray | None = None
    counts: dict[int, int] | None = None
    labels: tuple[str, ...] = ()
    source_id: str = ""

    def __post_init__(self):
        if self.ids is None and self.counts is None:
            raise CorpusError("document needs ids or counts")
        if self.ids is not None:
            self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.counts is not None:
            for w, n in self.counts.items():
                if n < 1:
                    raise CorpusError(f"non-positive count for word {w}")

    @property
    def is_bag(self) -> bool:
        return self.ids is None

    def __len__(self) -> int:
        if self.ids is not None:
            return int(self.ids.size)
        return int(sum(self.counts.values()))

    def histogram(self) -> dict[int, int]:
        if self.counts is not None:
            return dict(self.counts)
        return histogram(self.ids)

    def bag_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted word ids and their counts as parallel arrays."""
        hist = self.histogram()
        keys = np.array(sorted(hist), dtype=np.int64)
        return keys, np.array([hist[k] for k in keys], dtype=np.int64)

    def as_bag(self) -> "Document":
        return Document(counts=self.histogram(), labels=self.labels, source_id=self.source_id)

    def max_id(self) -> int:
        if self.ids is not None:
            return int(self.ids.max()) if self.ids.size else -1
        return max(self.counts, default=-1)


def histogram(ids) -> dict[int, int]:
    return {int(w): int(n) for w, n in sorted(Counter(int(i) for i in ids).items())}


@dataclass(frozen=True)
class SplitContext:
    left_hist: dict[int, int]
    right_hist: dict[int, int]
    i: int
    D: int


# -- vocabulary -------------------------------------------------------------

def build_vocab(tokenized_docs: Iterable[list[str]], max_size: int) -> Vocabulary:
    """Keep the ``max_size`` most frequent tokens, ties broken lexicographically."""
    if max_size < 1:
        raise CorpusError("max_size must be >= 1")
    freq: Counter = Counter()
    seen = False
    for toks in tokenized_docs:
        seen = True
        freq.update(toks)
    if not seen or not freq:
        raise CorpusError("empty corpus")
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))[:max_size]
    return Vocabulary([t for t, _ in ranked], [n for _, n in ranked])


def tokenize(text: str, stopwords: frozenset[str] | None = None) -> list[str]:
    toks = text.lower().split()
    if stopwords:
        toks = [t for t in toks if t not in stopwords]
    return toks


def encode(tokens: list[str], vocab: Vocabulary) -> tuple[list[int], int]:
    """Map tokens to ids, dropping out-of-vocabulary ones. Returns (ids, n_dropped)."""
    ids = [vocab.get(t) for t in tokens]
    kept = [i for i in ids if i is not None]
    return kept, len(ids) - len(kept)


# -- transforms and sampling ------------------------------------------------

def log_count_transform(counts: dict[int, int], base: float = math.e) -> dict[int, int]:
    """Replace each count n by round(log(1 + n)); zeros drop out of the map."""
    out = {}
    for w, n in counts.items():
        if n < 0:
            raise CorpusError(f"negative count for word {w}")
        m = int(math.floor(math.log1p(n) / math.log(base) + 0.5))
        if m > 0:
            out[w] = m
    return out


def sample_ordering(doc: Document, rng: np.random.Generator) -> Document:
    """Uniformly random ordering of the words of a bag."""
    keys, cnts = doc.bag_arrays()
    if cnts.sum() == 0:
        raise CorpusError("empty document")
    seq = rng.permutation(np.repeat(keys, cnts))
    return Document(ids=seq, labels=doc.labels, source_id=doc.source_id)


def split_histogram(counts: dict[int, int], rng: np.random.Generator) -> SplitContext:
    """Split a bag by drawing, per word, how many copies go left (uniform on 0..n)."""
    D = sum(counts.values())
    if D == 0:
        raise CorpusError("empty document")
    keys = sorted(counts)
    n = np.array([counts[k] for k in keys], dtype=np.int64)
    k_left = rng.integers(0, n + 1)
    left = {w: int(k) for w, k in zip(keys, k_left) if k > 0}
    right = {w: int(r) for w, r in zip(keys, n - k_left) if r > 0}
    return SplitContext(left, right, 1 + int(k_left.sum()), D)


def split_ordering(counts: dict[int, int], rng: np.random.Generator) -> SplitContext:
    """Exact split: shuffle the words, then cut at a uniform position i in 1..D."""
    D = sum(counts.values())
    if D == 0:
        raise CorpusError("empty document")
    seq = sample_ordering(Document(counts=counts), rng).ids
    i = int(rng.integers(1, D + 1))
    return SplitContext(histogram(seq[: i - 1]), histogram(seq[i - 1:]), i, D)


def group_sentences(sentences: list[Document], k: int) -> list[Document]:
    """Concatenate consecutive, non-overlapping blocks of ``k`` sentences."""
    if k < 1:
        raise CorpusError("group size must be >= 1")
    groups = []
    for start in range(0, len(sentences), k):
        block = sentences[start:start + k]
        ids = np.concatenate([s.ids for s in block]) if block else np.zeros(0, np.int64)
        labels = tuple(sorted({lab for s in block for lab in s.labels}))
        sid = block[0].source_id if len(block) == 1 else f"{block[0].source_id}..{block[-1].source_id}"
        groups.append(Document(ids=ids, labels=labels, source_id=sid))
    return groups


# -- file formats -----------------------------------------------------------

def _split_record(line: str, path, lineno: int) -> tuple[str, tuple[str, ...], str]:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 3:
        raise CorpusError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
    labels = tuple(lab for lab in parts[1].split(",") if lab)
    return parts[0], labels, parts[2]


def read_bow(path) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            doc_id, labels, body = _split_record(line, path, lineno)
            counts = {}
            for item in body.split():
                w, _, n = item.partition(":")
                counts[int(w)] = counts.get(int(w), 0) + int(n)
            docs.append(Document(counts=counts, labels=labels, source_id=doc_id))
    return docs


def read_seq(path) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            doc_id, labels, body = _split_record(line, path, lineno)
            ids = np.array([int(t) for t in body.split()], dtype=np.int64)
            docs.append(Document(ids=ids, labels=labels, source_id=doc_id))
    return docs


def read_corpus(path) -> list[Document]:
    """Read a .bow or .seq file, dispatching on the suffix."""
    suffix = Path(path).suffix
    if suffix == ".bow":
        return read_bow(path)
    if suffix == ".seq":
        return read_seq(path)
    raise CorpusError(f"unknown corpus format {suffix!r} (expected .bow or .seq)")


def _format_bow(doc: Document) -> str:
    hist = doc.histogram()
    body = " ".join(f"{w}:{hist[w]}" for w in sorted(hist))
    return f"{doc.source_id}\t{','.join(doc.labels)}\t{body}\n"


def _format_seq(doc: Document) -> str:
    body = " ".join(str(int(w)) for w in doc.ids)
    return f"{doc.source_id}\t{','.join(doc.labels)}\t{body}\n"


def write_bow(path, docs: Iterable[Document]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for doc in docs:
            f.write(_format_bow(doc))


def write_seq(path, docs: Iterable[Document]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for doc in docs:
            if doc.ids is None:
                raise CorpusError(f"document {doc.source_id!r} has no word order")
            f.write(_format_seq(doc))


def read_raw(path) -> Iterator[tuple[str, tuple[str, ...], str]]:
    """Raw text input: ``doc_id<TAB>labels<TAB>text`` lines, or bare text lines."""
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if "\t" in line:
                doc_id, labels, text = _split_record(line, path, lineno)
            else:
                doc_id, labels, text = str(lineno - 1), (), line
            yield doc_id, labels, text


def check_ids(docs: Iterable[Document], V: int) -> None:
    for doc in docs:
        if doc.max_id() >= V:
            raise CorpusError(f"document {doc.source_id!r} has word id {doc.max_id()} >= V={V}")
