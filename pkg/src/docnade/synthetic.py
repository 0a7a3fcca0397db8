"""Small synthetic corpora with known topical structure, for tests and toy runs."""
from __future__ import annotations

import numpy as np

from .corpus import Document


def topic_corpus(n_docs: int, V: int = 50, n_topics: int = 2, doc_len=(20, 40),
                 purity: float = 0.95, seed: int = 0) -> list[Document]:
    """Bags of words where each document draws from one topic's block of the vocabulary.

    Topic t owns a contiguous block of V / n_topics words and receives
    ``purity`` of the probability mass; the rest is spread over all other words.
    """
    rng = np.random.default_rng(seed)
    blocks = np.array_split(np.arange(V), n_topics)
    docs = []
    for t in range(n_docs):
        topic = int(rng.integers(n_topics))
        if blocks[topic].size == V:
            p = np.full(V, 1.0 / V)
        else:
            p = np.full(V, (1.0 - purity) / (V - blocks[topic].size))
            p[blocks[topic]] = purity / blocks[topic].size
        D = int(rng.integers(doc_len[0], doc_len[1] + 1))
        ids = rng.choice(V, size=D, p=p)
        docs.append(Document(ids=ids, labels=(f"topic{topic}",), source_id=f"d{t:05d}"))
    return docs


def topical_sentences(n_docs: int, sentences_per_doc: int = 5, n_topics: int = 4,
                      words_per_topic: int = 8, n_function: int = 6, seed: int = 0):
    """Sentences whose content words depend only on a hidden per-document topic.

    Each sentence is ``f f T f f T`` (f: function word, T: topic word), so a
    trigram window never contains a topic word when a topic word is
    predicted; only the document context can reveal the topic. Returns
    (sentences, V), sentences in document order.
    """
    rng = np.random.default_rng(seed)
    V = n_function + n_topics * words_per_topic
    sentences = []
    for d in range(n_docs):
        topic = int(rng.integers(n_topics))
        topic_words = n_function + topic * words_per_topic + np.arange(words_per_topic)
        for s in range(sentences_per_doc):
            f = rng.integers(n_function, size=4)
            t = rng.choice(topic_words, size=2)
            ids = np.array([f[0], f[1], t[0], f[2], f[3], t[1]])
            sentences.append(Document(ids=ids, labels=(f"topic{topic}",), source_id=f"d{d:04d}s{s}"))
    return sentences, V
