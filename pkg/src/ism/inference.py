"""Per-row inference: the covering objective and the greedy multiset cover."""

from __future__ import annotations

import math
import random
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence as Seq

from .core import Occurrence, PatternMultiset, Sequence, total_items

LOG_ZERO = -1e100
"""Stand-in for ln(0); keeps profit comparisons total-ordered."""

_LN_FACT = [0.0]


def log_factorial(n: int) -> float:
    """ln(n!) as a running sum of ln j, memoised."""
    while len(_LN_FACT) <= n:
        _LN_FACT.append(_LN_FACT[-1] + math.log(len(_LN_FACT)))
    return _LN_FACT[n]


def permutation_penalty(total: int) -> float:
    """-ln(total!), the log of the bound on the number of interleavings."""
    return -log_factorial(total)


def safe_log(p: float) -> float:
    return math.log(p) if p > 0.0 else LOG_ZERO


class CoverageError(RuntimeError):
    """A row contains items with no singleton pattern to cover them."""

    def __init__(self, missing: Iterable[int], row_index: int | None = None):
        self.missing = sorted(set(missing))
        self.row_index = row_index
        where = "" if row_index is None else f" in row {row_index}"
        super().__init__(f"cannot cover items {self.missing}{where}: no singleton pattern")


class InfeasibleMultiplicityError(ValueError):
    pass


@dataclass(frozen=True)
class MultiplicityDistribution:
    """Categorical distribution over how many times a pattern is included."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) < 2:
            raise ValueError("a multiplicity distribution needs entries for 0 and 1")
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError(f"probabilities out of [0, 1]: {probs}")
        if abs(math.fsum(probs) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {math.fsum(probs)!r}, not 1")

    @classmethod
    def from_histogram(cls, hist: Mapping[int, int], n: int) -> MultiplicityDistribution:
        """Empirical distribution from ``hist[m]`` = rows with multiplicity ``m >= 1``."""
        top = max((m for m, c in hist.items() if c), default=1)
        probs = [0.0] * (max(top, 1) + 1)
        used = 0
        for m, c in hist.items():
            if c:
                probs[m] = c / n
                used += c
        probs[0] = (n - used) / n
        return cls(tuple(probs))

    def __len__(self) -> int:
        return len(self.probs)

    def __getitem__(self, m: int) -> float:
        return self.probs[m] if m < len(self.probs) else 0.0

    @property
    def inclusion(self) -> float:
        """p(z >= 1)."""
        return 1.0 - self.probs[0]

    def logs(self) -> tuple[float, ...]:
        return tuple(safe_log(p) for p in self.probs)


@dataclass
class Model:
    """The pattern set and one multiplicity distribution per pattern.

    ``dists`` preserves insertion order, which doubles as pattern order.
    """

    dists: dict[Sequence, MultiplicityDistribution]
    vocab_size: int
    _logs: dict[Sequence, tuple[float, ...]] = field(default_factory=dict, repr=False, compare=False)

    @property
    def patterns(self) -> list[Sequence]:
        return list(self.dists)

    def __contains__(self, pattern: Sequence) -> bool:
        return pattern in self.dists

    def __len__(self) -> int:
        return len(self.dists)

    def log_probs(self, pattern: Sequence) -> tuple[float, ...]:
        lp = self._logs.get(pattern)
        if lp is None:
            lp = self._logs[pattern] = self.dists[pattern].logs()
        return lp

    def replace(self, updates: Mapping[Sequence, MultiplicityDistribution] = {},
                remove: Iterable[Sequence] = ()) -> Model:
        """New model with some distributions swapped, added or dropped."""
        drop = set(remove)
        dists = {s: d for s, d in self.dists.items() if s not in drop}
        dists.update(updates)
        logs = {s: v for s, v in self._logs.items() if s in dists and s not in updates}
        return Model(dists, self.vocab_size, logs)

    def non_singletons(self) -> list[Sequence]:
        return [s for s in self.dists if len(s) > 1]


@dataclass
class Covering:
    """A non-overlapping multiset covering of one row (the row's ``z`` values)."""

    chosen: PatternMultiset
    occurrences: list[Occurrence]
    objective_value: float

    def z(self, pattern: Sequence) -> int:
        return self.chosen.get(pattern, 0)

    def is_partition_of(self, row: Seq[int]) -> bool:
        seen: set[int] = set()
        for occ in self.occurrences:
            if not occ.is_valid_in(row) or seen.intersection(occ.positions):
                return False
            seen.update(occ.positions)
        counts = Counter(o.pattern for o in self.occurrences)
        return len(seen) == len(row) and counts == Counter(+self.chosen)


def coverage_g(c: PatternMultiset) -> int:
    return total_items(c)


def objective_f(c: PatternMultiset, model: Model) -> float:
    """Sum of ln pi_S[#S] over patterns in ``c`` plus the permutation penalty.

    Returns ``LOG_ZERO`` when any needed probability is zero.
    """
    total = 0.0
    for s, m in c.items():
        if m <= 0:
            continue
        dist = model.dists[s]
        if m >= len(dist):
            raise InfeasibleMultiplicityError(f"multiplicity {m} of {s} exceeds distribution length {len(dist)}")
        p = dist.probs[m]
        if p == 0.0:
            return LOG_ZERO
        total += math.log(p)
    return total + permutation_penalty(coverage_g(c))


def _log_table(patterns: Iterable[Sequence], model: Model,
               forced: Mapping[Sequence, Seq[float]] | None) -> dict[Sequence, tuple[float, ...]]:
    table = {}
    for s in patterns:
        if forced and s in forced:
            table[s] = tuple(safe_log(p) for p in forced[s])
        else:
            table[s] = model.log_probs(s)
    return table


def cover_row(row: Sequence, supported: Mapping[Sequence, int],
              logs: Mapping[Sequence, tuple[float, ...]]) -> Covering:
    """Greedy cover against a precomputed log-probability table.

    Each step takes the pattern with the best profit per covered item. The
    profit of raising ``#S`` from ``m`` to ``m+1`` is
    ``ln(pi[m+1] / pi[m])`` minus the growth of the factorial penalty.
    Profits are ranked in three tiers so that infinite gains never go
    through sentinel arithmetic: +inf (``pi[m] == 0 < pi[m+1]``), finite,
    and -inf (``pi[m+1] == 0``). Non-singletons are dropped once their next
    multiplicity has zero probability; singletons stay as a last resort so
    every row can be covered. Ties prefer longer, then lexicographically
    smaller patterns.
    """
    n = len(row)
    if n == 0:
        return Covering(Counter(), [], 0.0)
    singles = {s[0] for s in supported if len(s) == 1}
    missing = set(row) - singles
    if missing:
        raise CoverageError(missing)

    free: dict[int, list[int]] = {}
    for i, x in enumerate(row):
        free.setdefault(x, []).append(i)

    order = sorted(supported, key=lambda s: (-len(s), s))
    log_factorial(n + max(len(s) for s in order))
    lnf = _LN_FACT
    # per candidate: [pattern, size, log-probs, current multiplicity]
    active = [[s, len(s), logs[s], 0] for s in order]
    occurrences: list[Occurrence] = []
    g = 0
    while g < n:
        base = lnf[g]
        best = None
        bt, bv = -2, 0.0
        dead = []
        for entry in active:
            s, size, lp, m = entry
            nxt = lp[m + 1] if m + 1 < len(lp) else LOG_ZERO
            pen = lnf[g + size] - base
            if nxt <= LOG_ZERO:
                if size > 1:
                    dead.append(entry)
                    continue
                tier, val = -1, -pen
            else:
                cur = lp[m] if m < len(lp) else LOG_ZERO
                if cur <= LOG_ZERO:
                    tier, val = 1, (nxt - pen) / size
                else:
                    tier, val = 0, (nxt - cur - pen) / size
            if tier > bt or (tier == bt and val > bv):
                bt, bv, best = tier, val, entry
        for entry in dead:
            active.remove(entry)
        if best is None:
            raise CoverageError(x for x, p in free.items() if p)
        positions = _embed(best[0], free)
        if positions is None:
            active.remove(best)
            continue
        s = best[0]
        for x, p in zip(s, positions):
            lst = free[x]
            del lst[bisect_right(lst, p) - 1]
        best[3] += 1
        occurrences.append(Occurrence(s, positions))
        g += best[1]

    counts: Counter = Counter(o.pattern for o in occurrences)
    value = sum(logs[s][m] if m < len(logs[s]) else LOG_ZERO for s, m in counts.items())
    value = max(value, LOG_ZERO) + permutation_penalty(g)
    return Covering(counts, occurrences, value)


def _embed(pattern: Sequence, free: Mapping[int, list[int]]) -> tuple[int, ...] | None:
    pos = -1
    out = []
    for x in pattern:
        lst = free.get(x)
        if not lst:
            return None
        k = bisect_right(lst, pos)
        if k == len(lst):
            return None
        pos = lst[k]
        out.append(pos)
    return tuple(out)


def greedy_cover(row: Seq[int], supported: Mapping[Sequence, int], model: Model,
                 forced: Mapping[Sequence, Seq[float]] | None = None) -> Covering:
    """Cover ``row`` with occurrences of ``supported`` patterns.

    ``forced`` overrides distributions for patterns not (yet) in the model,
    e.g. the ``(0, 1, ..., 1)`` prior given to a structural-EM candidate.
    """
    logs = _log_table(supported, model, forced)
    return cover_row(tuple(row), supported, logs)


def row_log_prob(covering: Covering, supported: Iterable[Sequence], model: Model,
                 forced: Mapping[Sequence, Seq[float]] | None = None) -> float:
    """ln p(X, z | Pi) restricted to the patterns supported by the row.

    Unlike ``objective_f`` this includes ``ln pi_S[0]`` for supported
    patterns the covering leaves unused; patterns that cannot occur in the
    row add the same constant to every covering and are omitted.
    """
    supported = list(supported)
    logs = _log_table(supported, model, forced)
    total = 0.0
    for s in supported:
        m = covering.z(s)
        lp = logs[s]
        total += lp[m] if m < len(lp) else LOG_ZERO
    return max(total, LOG_ZERO) + permutation_penalty(coverage_g(covering.chosen))


def check_submodularity(model: Model, trials: int, seed: int = 0, tol: float = 1e-9) -> bool:
    """Randomised check of the multiset diminishing-returns inequality for ``objective_f``.

    Draws ``C <= D`` with equal multiplicity of a probe pattern ``S`` and
    tests ``f(C + S) - f(C) >= f(D + S) - f(D)``. Multiplicities stay below
    each distribution's length so ``f`` is always defined.
    """
    rng = random.Random(seed)
    patterns = model.patterns
    room = {s: len(model.dists[s]) - 1 for s in patterns}
    for _ in range(trials):
        d: Counter = Counter()
        for s in patterns:
            k = rng.randint(0, room[s])
            if k:
                d[s] = k
        c = Counter({s: rng.randint(0, k) for s, k in d.items()})
        c = +c
        probes = [s for s in patterns if c[s] == d[s] and d[s] < room[s]]
        if not probes:
            continue
        s = rng.choice(probes)
        c_plus = c + Counter({s: 1})
        d_plus = d + Counter({s: 1})
        gain_c = objective_f(c_plus, model) - objective_f(c, model)
        gain_d = objective_f(d_plus, model) - objective_f(d, model)
        if gain_c < gain_d - tol:
            return False
    return True


def nonmonotone_witness(model: Model) -> tuple[PatternMultiset, Sequence] | None:
    """Some ``(C, S)`` with ``f(C + S) < f(C)``, searching from the empty multiset."""
    empty: Counter = Counter()
    for s in model.patterns:
        if len(model.dists[s]) > 1 and objective_f(Counter({s: 1}), model) < objective_f(empty, model):
            return empty, s
    return None
