"""Independent brute-force references used by the test-suite."""

from __future__ import annotations

from collections import Counter
from itertools import combinations

import numpy as np

from ism.core import Occurrence, supported_multiset
from ism.inference import Covering, Model, MultiplicityDistribution, row_log_prob


def all_coverings(row, patterns):
    """Every partition of ``row`` into occurrences of ``patterns``.

    The smallest free position must start some occurrence, which keeps the
    enumeration free of duplicates.
    """
    n = len(row)

    def rec(free):
        if not free:
            yield []
            return
        p = free[0]
        rest = free[1:]
        for s in patterns:
            if s[0] != row[p]:
                continue
            for idx in combinations(rest, len(s) - 1):
                if all(row[i] == x for i, x in zip(idx, s[1:])):
                    occ = Occurrence(s, (p,) + idx)
                    left = [i for i in rest if i not in idx]
                    for tail in rec(left):
                        yield [occ] + tail

    yield from rec(list(range(n)))


def best_covering_value(row, model: Model):
    """Maximum of ln p(X, z) over all partition coverings of ``row``."""
    supported = supported_multiset(row, model.patterns)
    best = None
    for occs in all_coverings(row, list(supported)):
        counts = Counter(o.pattern for o in occs)
        v = row_log_prob(Covering(counts, occs, 0.0), supported, model)
        if best is None or v > best:
            best = v
    return best, supported


def random_instance(rng: np.random.Generator, max_len: int = 8, max_patterns: int = 6, alphabet: int = 3):
    """A row plus a model with singletons for its items and a few longer patterns."""
    length = int(rng.integers(1, max_len + 1))
    row = tuple(int(x) for x in rng.integers(alphabet, size=length))
    items = sorted(set(row))
    dists = {}

    def rand_dist():
        size = int(rng.integers(2, 5))
        probs = rng.dirichlet(np.ones(size))
        return MultiplicityDistribution(tuple(probs / probs.sum()))

    for x in items:
        # singleton distributions long enough to cover any usage
        probs = rng.dirichlet(np.ones(length + 1))
        dists[(x,)] = MultiplicityDistribution(tuple(probs / probs.sum()))
    tries = 0
    while len(dists) < max_patterns and tries < 50:
        tries += 1
        size = int(rng.integers(2, 4))
        idx = sorted(rng.choice(length, size=min(size, length), replace=False).tolist())
        s = tuple(row[i] for i in idx)
        if len(s) >= 2 and s not in dists:
            dists[s] = rand_dist()
    return row, Model(dists, alphabet)
