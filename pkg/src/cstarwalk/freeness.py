"""Freeness certificates for finite families of free-group words.

The rank of the subgroup generated by a family of reduced words is
computed by graph folding: wedge the word loops at a base vertex, fold
until no vertex carries two equally labeled edges in the same direction,
and read off rank = edges - vertices + 1.  A family of n distinct words
is a free basis of its span iff that rank equals n (generating sets of
minimal size in free groups are bases).
"""

from __future__ import annotations

from typing import Iterable, List, Sequence, Tuple

from .errors import ResourceError

Word = Tuple[int, ...]


class _FoldingGraph:
    """Union-find backed edge-labelled graph supporting Stallings folding."""

    def __init__(self):
        self.parent: List[int] = []
        self.slots: List[dict] = []  # vertex -> {(label, outgoing): vertex}

    def new_vertex(self) -> int:
        self.parent.append(len(self.parent))
        self.slots.append({})
        return len(self.parent) - 1

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def add_edge(self, u: int, v: int, label: int) -> None:
        """Insert u --label--> v (label > 0), folding conflicts away."""
        pending = [(u, v, label)]
        while pending:
            a, b, lab = pending.pop()
            a, b = self.find(a), self.find(b)
            out = self.slots[a].get((lab, True))
            if out is not None and self.find(out) != b:
                self._merge(self.find(out), b, pending)
                a, b = self.find(a), self.find(b)
            self.slots[a][(lab, True)] = b
            inc = self.slots[b].get((lab, False))
            if inc is not None and self.find(inc) != a:
                self._merge(self.find(inc), a, pending)
                a, b = self.find(a), self.find(b)
            self.slots[b][(lab, False)] = a

    def _merge(self, a: int, b: int, pending) -> None:
        stack = [(a, b)]
        while stack:
            a, b = stack.pop()
            a, b = self.find(a), self.find(b)
            if a == b:
                continue
            if len(self.slots[a]) < len(self.slots[b]):
                a, b = b, a
            self.parent[b] = a
            for slot, w in self.slots[b].items():
                w = self.find(w)
                cur = self.slots[a].get(slot)
                if cur is None:
                    self.slots[a][slot] = w
                else:
                    cur = self.find(cur)
                    if cur != w:
                        stack.append((cur, w))
            self.slots[b] = {}

    def rank(self) -> int:
        roots = {self.find(v) for v in range(len(self.parent))}
        edges = 0
        for r in roots:
            edges += sum(1 for (lab, outgoing) in self.slots[r] if outgoing)
        return edges - len(roots) + 1


def subgroup_rank(words: Iterable[Word], edge_budget: int = 3_000_000) -> int:
    """Rank of the subgroup of a free group generated by the given words."""
    words = [w for w in words if w]
    total = sum(len(w) for w in words)
    if total > edge_budget:
        raise ResourceError(
            f"folding graph with {total} edges exceeds budget {edge_budget}"
        )
    graph = _FoldingGraph()
    base = graph.new_vertex()
    for word in words:
        cur = base
        for i, letter in enumerate(word):
            nxt = base if i == len(word) - 1 else graph.new_vertex()
            if letter > 0:
                graph.add_edge(cur, nxt, letter)
            else:
                graph.add_edge(nxt, cur, -letter)
            cur = graph.find(nxt)
    return graph.rank()


def is_free_basis(words: Sequence[Word], edge_budget: int = 3_000_000) -> bool:
    """Whether the words are distinct, nontrivial, and freely generate a
    subgroup of rank len(words) (hence form a basis of their span)."""
    distinct = set(words)
    if () in distinct or len(distinct) != len(words):
        return False
    return subgroup_rank(distinct, edge_budget) == len(distinct)


class FreeSetRegistry:
    """Cache of families already proven to be free bases.

    A subset of a proven free basis is itself a free basis of its span,
    so subset queries avoid re-folding.
    """

    def __init__(self):
        self._proven: List[frozenset] = []

    def check(self, words: Sequence[Word], edge_budget: int = 3_000_000) -> bool:
        family = frozenset(words)
        if () in family or len(family) != len(words):
            return False
        for proven in self._proven:
            if family <= proven:
                return True
        if is_free_basis(list(family), edge_budget):
            self._proven.append(family)
            return True
        return False

    def register(self, words: Sequence[Word], edge_budget: int = 3_000_000) -> bool:
        return self.check(words, edge_budget)
