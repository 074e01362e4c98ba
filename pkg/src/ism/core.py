"""Sequences, subsequence matching and support counting.

Items are dense non-negative integers; sequences (database rows and
patterns alike) are plain tuples of items. A pattern multiset is a
``collections.Counter`` keyed by pattern tuple.
"""

from __future__ import annotations

from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence as Seq

import numpy as np

Sequence = tuple[int, ...]
PatternMultiset = Counter  # Counter[Sequence]

NEVER = np.iinfo(np.int32).max


class Occurrence(NamedTuple):
    """One embedding of ``pattern`` into a row: ``row[positions[k]] == pattern[k]``."""

    pattern: Sequence
    positions: tuple[int, ...]

    def is_valid_in(self, row: Seq[int]) -> bool:
        if len(self.positions) != len(self.pattern):
            return False
        if any(b <= a for a, b in zip(self.positions, self.positions[1:])):
            return False
        return all(0 <= p < len(row) and row[p] == x for p, x in zip(self.positions, self.pattern))


@dataclass
class SequenceDatabase:
    """An ordered list of rows over the item universe ``range(vocab_size)``."""

    rows: list[Sequence]
    vocab_size: int = field(default=-1)

    def __post_init__(self) -> None:
        self.rows = [tuple(int(x) for x in r) for r in self.rows]
        top = max((max(r) for r in self.rows if r), default=-1)
        if self.vocab_size < 0:
            self.vocab_size = top + 1
        if not self.rows:
            raise ValueError("a sequence database needs at least one row")
        if top >= self.vocab_size or any(x < 0 for r in self.rows for x in r):
            raise ValueError(f"item ids must lie in [0, {self.vocab_size})")

    @property
    def N(self) -> int:
        return len(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, i: int) -> Sequence:
        return self.rows[i]

    def items(self) -> list[int]:
        """Distinct items present in the database, ascending."""
        return sorted({x for r in self.rows for x in r})


def total_items(multiset: PatternMultiset) -> int:
    return sum(len(s) * c for s, c in multiset.items())


def is_subsequence(pattern: Seq[int], row: Seq[int]) -> bool:
    it = iter(row)
    return all(x in it for x in pattern)


def leftmost_embedding(pattern: Seq[int], row: Seq[int], skip: set[int] | None = None) -> tuple[int, ...] | None:
    """Positions of the greedy-leftmost embedding avoiding ``skip``, or None."""
    out = []
    k = 0
    m = len(pattern)
    for i, x in enumerate(row):
        if skip and i in skip:
            continue
        if x == pattern[k]:
            out.append(i)
            k += 1
            if k == m:
                return tuple(out)
    return None


def _greedy_disjoint(pattern: Sequence, row: Seq[int]) -> list[tuple[int, ...]]:
    # Exact when the pattern's items are pairwise distinct.
    used: set[int] = set()
    found = []
    while True:
        emb = leftmost_embedding(pattern, row, used)
        if emb is None:
            return found
        used.update(emb)
        found.append(emb)


def _dp_disjoint(pattern: Sequence, row: Seq[int]) -> list[tuple[int, ...]]:
    """Exact packing for patterns with repeated items.

    Scans the row once, tracking how many open partial copies sit at each
    progress level. Copies at the same level are interchangeable, so the
    state is a count vector. Each state keeps a linked list of moves from
    which one optimal family of embeddings is rebuilt.
    """
    m = len(pattern)
    start = (0,) * (m - 1)
    # state -> (completed, moves) where moves is a cons list ((pos, level), rest)
    states: dict[tuple[int, ...], tuple[int, tuple | None]] = {start: (0, None)}
    levels_for: dict[int, list[int]] = {}
    for k, x in enumerate(pattern):
        levels_for.setdefault(x, []).append(k)
    for pos, x in enumerate(row):
        ks = levels_for.get(x)
        if not ks:
            continue
        new = dict(states)
        for st, (done, moves) in states.items():
            for k in ks:
                if k > 0 and st[k - 1] == 0:
                    continue
                s = list(st)
                if k > 0:
                    s[k - 1] -= 1
                if k + 1 < m:
                    s[k] += 1
                    d = done
                else:
                    d = done + 1
                key = tuple(s)
                prev = new.get(key)
                if prev is None or prev[0] < d:
                    new[key] = (d, ((pos, k), moves))
        states = new
    best = max(states.values(), key=lambda v: v[0])
    moves = []
    node = best[1]
    while node is not None:
        moves.append(node[0])
        node = node[1]
    moves.reverse()
    open_at: list[list[list[int]]] = [[] for _ in range(m)]
    found = []
    for pos, k in moves:
        copy = [pos] if k == 0 else open_at[k - 1].pop()
        if k > 0:
            copy.append(pos)
        if k + 1 == m:
            found.append(tuple(copy))
        else:
            open_at[k].append(copy)
    found.sort()
    return found


def max_disjoint_occurrences(pattern: Seq[int], row: Seq[int]) -> tuple[int, list[Occurrence]]:
    """Maximum number of position-disjoint embeddings of ``pattern`` in ``row``.

    Returns the count and one witness family. Greedy leftmost extraction is
    used when the pattern has no repeated item (it is optimal there); other
    patterns go through an exact dynamic programme, since greedy extraction
    can fall short, e.g. ``(0, 1, 0)`` in ``(0, 1, 0, 1, 0, 0, 0)``.
    """
    pattern = tuple(pattern)
    if not pattern:
        raise ValueError("pattern must be non-empty")
    if len(pattern) == 1:
        emb = [(i,) for i, x in enumerate(row) if x == pattern[0]]
    elif len(set(pattern)) == len(pattern):
        emb = _greedy_disjoint(pattern, row)
    else:
        emb = _dp_disjoint(pattern, row)
    return len(emb), [Occurrence(pattern, e) for e in emb]


def count_disjoint(pattern: Seq[int], row: Seq[int]) -> int:
    return max_disjoint_occurrences(pattern, row)[0]


def support(pattern: Seq[int], db: SequenceDatabase | Iterable[Seq[int]]) -> int:
    return sum(1 for row in db if is_subsequence(pattern, row))


def supported_multiset(row: Seq[int], model_patterns: Iterable[Sequence]) -> PatternMultiset:
    """Patterns embedded in ``row`` with their maximal disjoint multiplicity."""
    out: PatternMultiset = Counter()
    for s in model_patterns:
        if is_subsequence(s, row):
            out[tuple(s)] = count_disjoint(s, row)
    return out


# -- vectorised embedding bounds, used for fast support of concatenations --

def first_end(pattern: Seq[int], row: Seq[int]) -> int:
    """Index at which the leftmost embedding finishes, ``NEVER`` if absent."""
    k = 0
    m = len(pattern)
    for i, x in enumerate(row):
        if x == pattern[k]:
            k += 1
            if k == m:
                return i
    return NEVER


def last_start(pattern: Seq[int], row: Seq[int]) -> int:
    """Largest ``i`` such that the pattern embeds into ``row[i:]``, -1 if absent."""
    k = len(pattern) - 1
    for i in range(len(row) - 1, -1, -1):
        if row[i] == pattern[k]:
            k -= 1
            if k < 0:
                return i
    return -1


@dataclass
class EmbeddingIndex:
    """Per-row embedding bounds for a set of patterns.

    ``S1 + S2`` embeds in a row iff the leftmost embedding of ``S1`` ends
    before the rightmost embedding of ``S2`` starts, so the support of any
    concatenation is one vectorised comparison.
    """

    rows: list[Sequence]
    ends: dict[Sequence, np.ndarray] = field(default_factory=dict)
    starts: dict[Sequence, np.ndarray] = field(default_factory=dict)

    def add(self, pattern: Sequence) -> None:
        if pattern in self.ends:
            return
        if len(pattern) == 1:
            x = pattern[0]
            ends = np.full(len(self.rows), NEVER, dtype=np.int32)
            starts = np.full(len(self.rows), -1, dtype=np.int32)
            for i, row in enumerate(self.rows):
                if x in row:
                    ends[i] = row.index(x)
                    starts[i] = len(row) - 1 - row[::-1].index(x)
        else:
            ends = np.fromiter((first_end(pattern, r) for r in self.rows), np.int32, len(self.rows))
            starts = np.fromiter((last_start(pattern, r) for r in self.rows), np.int32, len(self.rows))
        self.ends[pattern] = ends
        self.starts[pattern] = starts

    def discard(self, pattern: Sequence) -> None:
        self.ends.pop(pattern, None)
        self.starts.pop(pattern, None)

    def support(self, pattern: Sequence) -> int:
        self.add(pattern)
        return int(np.count_nonzero(self.ends[pattern] != NEVER))

    def concat_mask(self, left: Sequence, right: Sequence) -> np.ndarray:
        return self.ends[left] < self.starts[right]

    def concat_support(self, left: Sequence, right: Sequence) -> int:
        return int(np.count_nonzero(self.concat_mask(left, right)))
