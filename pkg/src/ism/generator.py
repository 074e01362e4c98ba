"""Sampling databases from the subsequence-interleaving model.

All randomness comes from ``numpy.random.Generator`` (PCG64). Row ``i`` of
a sampled database draws from ``default_rng([seed, i])`` so the output does
not depend on how rows are scheduled.
"""

from __future__ import annotations

import math
from collections import Counter
from functools import lru_cache
from typing import Sequence as Seq

import numpy as np

from .core import PatternMultiset, Sequence, SequenceDatabase, total_items
from .inference import Model, MultiplicityDistribution

MAX_ENUMERATE = 12


def make_rng(seed: int | np.random.Generator) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_multiplicities(model: Model, rng: np.random.Generator) -> PatternMultiset:
    """Draw ``z_S ~ Categorical(pi_S)`` independently for every pattern."""
    out: PatternMultiset = Counter()
    for s, dist in model.dists.items():
        probs = dist.probs
        if probs[0] == 1.0:
            continue
        z = int(rng.choice(len(probs), p=probs))
        if z:
            out[s] = z
    return out


def splice(row: list[int], pattern: Seq[int], rng: np.random.Generator) -> list[int]:
    """Merge ``pattern`` into ``row`` keeping both orders.

    The pattern's slots are a uniform ``m``-subset of the ``L + m`` output
    positions, which is the same as a uniform multiset of ``m`` gaps.
    """
    m = len(pattern)
    size = len(row) + m
    slots = set(rng.choice(size, size=m, replace=False).tolist())
    out = []
    a = b = 0
    for k in range(size):
        if k in slots:
            out.append(pattern[b])
            b += 1
        else:
            out.append(row[a])
            a += 1
    return out


def _occurrences(multiset: PatternMultiset) -> list[Sequence]:
    return [s for s in sorted(multiset) for _ in range(multiset[s])]


def interleave_sample(multiset: PatternMultiset, rng: np.random.Generator) -> Sequence:
    """Splice pattern occurrences, in sorted pattern order, into an empty row one at a time."""
    occs = _occurrences(multiset)
    if not occs:
        raise ValueError("cannot interleave an empty multiset")
    row: list[int] = []
    for s in occs:
        row = splice(row, s, rng)
    return tuple(row)


def enumerate_interleavings(multiset: PatternMultiset) -> set[Sequence]:
    """Every distinct sequence obtained by interleaving all occurrences in ``multiset``."""
    if total_items(multiset) > MAX_ENUMERATE:
        raise ValueError(f"enumeration limited to {MAX_ENUMERATE} items in total")
    occs = tuple(_occurrences(multiset))

    @lru_cache(maxsize=None)
    def rest(state: tuple[tuple[Sequence, int], ...]) -> frozenset[Sequence]:
        # state: sorted (pattern, progress) pairs; equal pairs are interchangeable
        if all(k == len(s) for s, k in state):
            return frozenset([()])
        out = set()
        tried = set()
        for j, (s, k) in enumerate(state):
            if k == len(s) or (s, k) in tried:
                continue
            tried.add((s, k))
            nxt = tuple(sorted(state[:j] + ((s, k + 1),) + state[j + 1:]))
            for tail in rest(nxt):
                out.add((s[k],) + tail)
        return frozenset(out)

    return set(rest(tuple(sorted((s, 0) for s in occs))))


def uniform_interleaving_sample(multiset: PatternMultiset, rng: np.random.Generator) -> Sequence:
    """Exactly uniform draw from the interleaving set (small multisets only)."""
    members = sorted(enumerate_interleavings(multiset))
    return members[int(rng.integers(len(members)))]


def sample_database(model: Model, n_rows: int, seed: int = 0, allow_empty: bool = False) -> SequenceDatabase | list:
    """Independent rows from the generative model; empty draws are redrawn."""
    if n_rows <= 0:
        if allow_empty:
            return []
        raise ValueError("n_rows must be positive")
    if all(d.probs[0] == 1.0 for d in model.dists.values()):
        raise ValueError("every pattern has zero inclusion probability")
    rows = []
    for i in range(n_rows):
        rng = np.random.default_rng([seed, i])
        while True:
            ms = sample_multiplicities(model, rng)
            if ms:
                break
        rows.append(interleave_sample(ms, rng))
    return SequenceDatabase(rows, model.vocab_size)


def process_item(process: int, k: int, process_items: int) -> int:
    return process * process_items + k


def parallel_process_db(n_processes: int = 5, process_items: int = 5, total_length: int = 1_000_000,
                        row_length: int = 100, seed: int = 0) -> tuple[SequenceDatabase, set[Sequence]]:
    """Independent cyclic processes interleaved at random, cut into rows.

    Process ``i`` emits items ``i*process_items + 0, 1, ...`` in a cycle. Each
    step picks a process uniformly at random. The generating set holds every
    contiguous window (length 2 to ``process_items``, wrapping around) of
    each process's cycle.
    """
    if total_length % row_length:
        raise ValueError("row_length must divide total_length")
    rng = make_rng(seed)
    choice = rng.integers(n_processes, size=total_length)
    stream = np.empty(total_length, dtype=np.int64)
    for p in range(n_processes):
        where = np.flatnonzero(choice == p)
        stream[where] = p * process_items + np.arange(len(where)) % process_items
    rows = [tuple(int(x) for x in stream[a:a + row_length]) for a in range(0, total_length, row_length)]
    generating = set()
    for p in range(n_processes):
        cycle = [process_item(p, k, process_items) for k in range(process_items)]
        for length in range(2, process_items + 1):
            for start in range(process_items):
                generating.add(tuple(cycle[(start + j) % process_items] for j in range(length)))
    return SequenceDatabase(rows, n_processes * process_items), generating


def random_planted_model(n_patterns: int, alphabet: int, min_len: int, max_len: int,
                         min_prob: float, max_prob: float, seed: int = 0) -> Model:
    """Model with random non-singleton patterns included at most once per row."""
    rng = make_rng(seed)
    dists = {}
    while len(dists) < n_patterns:
        size = int(rng.integers(min_len, max_len + 1))
        s = tuple(int(x) for x in rng.choice(alphabet, size=size, replace=False))
        if s in dists:
            continue
        p = float(rng.uniform(min_prob, max_prob))
        dists[s] = MultiplicityDistribution((1.0 - p, p))
    return Model(dists, alphabet)


def interleaving_bound(multiset: PatternMultiset) -> int:
    return math.factorial(total_items(multiset))
