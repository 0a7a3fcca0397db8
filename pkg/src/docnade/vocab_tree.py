"""Output-layer structures over the vocabulary.

``BinaryWordTree`` factorizes a word distribution into binary decisions along
a root-to-leaf path; ``ClassPartition`` is the two-level (class, word)
factorization used by the language model.

Internal nodes are numbered in preorder, so the root is always node 0. A
child reference ``>= 0`` is an internal node; ``< 0`` encodes the leaf of
word ``-(ref + 1)``.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class BinaryWordTree:
    left: np.ndarray
    right: np.ndarray
    path_nodes: tuple[np.ndarray, ...]
    path_bits: tuple[np.ndarray, ...]

    @property
    def V(self) -> int:
        return len(self.path_nodes)

    @property
    def n_internal(self) -> int:
        return int(self.left.size)

    def depths(self) -> np.ndarray:
        return np.array([p.size for p in self.path_nodes])

    def leaf_of(self, w: int) -> tuple[int, int]:
        """(parent internal node, side bit) of word ``w``'s leaf."""
        nodes, bits = self.word_path(w)
        return int(nodes[-1]), int(bits[-1])

    def word_path(self, w: int) -> tuple[np.ndarray, np.ndarray]:
        if not 0 <= w < self.V:
            raise TreeError(f"unknown word {w}")
        return self.path_nodes[w], self.path_bits[w]

    def padded_paths(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(V, L) arrays of nodes, bits and a validity mask, L = max depth."""
        L = int(self.depths().max())
        nodes = np.zeros((self.V, L), dtype=np.int64)
        bits = np.zeros((self.V, L), dtype=np.float64)
        mask = np.zeros((self.V, L), dtype=np.float64)
        for w, (n, b) in enumerate(zip(self.path_nodes, self.path_bits)):
            nodes[w, : n.size] = n
            bits[w, : n.size] = b
            mask[w, : n.size] = 1.0
        return nodes, bits, mask

    def kraft_sum(self) -> float:
        return float(sum(2.0 ** -p.size for p in self.path_nodes))

    # -- serialization -----------------------------------------------------

    def to_preorder(self) -> tuple[list[list[int]], list[int]]:
        """Preorder child-kind flags ``[left_is_leaf, right_is_leaf]`` per
        internal node, plus the words of the leaves in left-to-right order."""
        return _preorder(self.left, self.right)

    @classmethod
    def from_preorder(cls, flags, leaves) -> "BinaryWordTree":
        """Rebuild and validate a tree from :meth:`to_preorder` output."""
        V = len(leaves)
        if V < 2 or len(flags) != V - 1:
            raise TreeError(f"tree with {len(flags)} internal nodes cannot hold {V} leaves")
        if sorted(leaves) != list(range(V)):
            raise TreeError("leaf table is not a permutation of the vocabulary")
        left = np.full(V - 1, -1, dtype=np.int64)
        right = np.full(V - 1, -1, dtype=np.int64)
        children = (left, right)
        leaf_it = iter(leaves)
        n_nodes = 1
        # child slots (parent, side) in preorder
        stack = [(0, 1), (0, 0)]
        while stack:
            parent, side = stack.pop()
            f = flags[parent]
            if len(f) != 2 or any(x not in (0, 1) for x in f):
                raise TreeError(f"bad child flags at node {parent}")
            if f[side]:
                w = next(leaf_it, None)
                if w is None:
                    raise TreeError("leaf table exhausted")
                children[side][parent] = -w - 1
            else:
                if n_nodes >= V - 1:
                    raise TreeError("preorder node list exhausted")
                children[side][parent] = n_nodes
                stack += [(n_nodes, 1), (n_nodes, 0)]
                n_nodes += 1
        if n_nodes != V - 1 or next(leaf_it, None) is not None:
            raise TreeError("tree description has unused entries")
        return _with_paths(left, right, V)


def _preorder(left, right) -> tuple[list[list[int]], list[int]]:
    flags, leaves = [], []
    stack = [0]
    while stack:
        ref = stack.pop()
        if ref < 0:
            leaves.append(-ref - 1)
            continue
        flags.append([int(left[ref] < 0), int(right[ref] < 0)])
        stack.append(int(right[ref]))
        stack.append(int(left[ref]))
    return flags, leaves


def _with_paths(left: np.ndarray, right: np.ndarray, V: int) -> BinaryWordTree:
    nodes: list = [None] * V
    bits: list = [None] * V
    stack = [(0, [], [])]
    while stack:
        node, pn, pb = stack.pop()
        for bit, child in ((0, int(left[node])), (1, int(right[node]))):
            if child < 0:
                w = -child - 1
                if nodes[w] is not None:
                    raise TreeError(f"word {w} has two leaves")
                nodes[w] = np.array(pn + [node], dtype=np.int64)
                bits[w] = np.array(pb + [bit], dtype=np.int64)
            else:
                stack.append((child, pn + [node], pb + [bit]))
    if any(n is None for n in nodes):
        raise TreeError("some word has no leaf")
    return BinaryWordTree(left, right, tuple(nodes), tuple(bits))


def _from_nested(root, V: int) -> BinaryWordTree:
    """Number a nested (left, right) / int-leaf structure in preorder."""
    left = np.zeros(V - 1, dtype=np.int64)
    right = np.zeros(V - 1, dtype=np.int64)
    children = (left, right)
    if not isinstance(root, tuple):
        raise TreeError("tree needs at least one internal node")
    counter = 1
    stack = [(0, root)]
    while stack:
        me, (lsub, rsub) = stack.pop()
        pushed = []
        for side, sub in ((0, lsub), (1, rsub)):
            if isinstance(sub, tuple):
                children[side][me] = counter
                pushed.append((counter, sub))
                counter += 1
            else:
                children[side][me] = -int(sub) - 1
        stack.extend(pushed)
    # ids above follow discovery order; canonicalize to preorder
    return BinaryWordTree.from_preorder(*_preorder(left, right))


def build_random_tree(V: int, seed=0) -> BinaryWordTree:
    """Balanced full binary tree over a seed-shuffled word list."""
    if V < 2:
        raise TreeError("degenerate vocabulary")
    words = np.random.default_rng(seed).permutation(V).tolist()

    def halve(ws):
        if len(ws) == 1:
            return ws[0]
        mid = len(ws) // 2
        return (halve(ws[:mid]), halve(ws[mid:]))

    return _from_nested(halve(words), V)


def build_huffman_tree(frequencies) -> BinaryWordTree:
    """Huffman tree; equal weights merge the subtree with the smaller minimum word id first."""
    freqs = [int(f) for f in frequencies]
    V = len(freqs)
    if V < 2:
        raise TreeError("degenerate vocabulary")
    if min(freqs) < 1:
        raise TreeError("zero frequency in Huffman input; smooth counts to >= 1")
    heap = [(f, w, w) for w, f in enumerate(freqs)]
    heapq.heapify(heap)
    while len(heap) > 1:
        f1, m1, a = heapq.heappop(heap)
        f2, m2, b = heapq.heappop(heap)
        heapq.heappush(heap, (f1 + f2, min(m1, m2), (a, b)))
    return _from_nested(heap[0][2], V)


@dataclass(frozen=True)
class ClassPartition:
    class_of: np.ndarray
    members: tuple[np.ndarray, ...]

    @property
    def C(self) -> int:
        return len(self.members)

    @property
    def V(self) -> int:
        return int(self.class_of.size)

    def sizes(self) -> list[int]:
        return [int(m.size) for m in self.members]

    def position_in_class(self) -> np.ndarray:
        pos = np.zeros(self.V, dtype=np.int64)
        for m in self.members:
            pos[m] = np.arange(m.size)
        return pos

    @classmethod
    def from_class_of(cls, class_of) -> "ClassPartition":
        class_of = np.asarray(class_of, dtype=np.int64)
        if class_of.size == 0 or class_of.min() < 0:
            raise TreeError("invalid class assignment")
        C = int(class_of.max()) + 1
        members = tuple(np.flatnonzero(class_of == c) for c in range(C))
        if any(m.size == 0 for m in members):
            raise TreeError("empty class in partition")
        return cls(class_of, members)


def build_class_partition(V: int) -> ClassPartition:
    """ceil(sqrt(V)) contiguous classes whose sizes differ by at most one."""
    if V < 2:
        raise TreeError("degenerate vocabulary")
    C = math.isqrt(V - 1) + 1
    base, extra = divmod(V, C)
    sizes = [base + 1] * extra + [base] * (C - extra)
    class_of = np.repeat(np.arange(C), sizes)
    return ClassPartition.from_class_of(class_of)
