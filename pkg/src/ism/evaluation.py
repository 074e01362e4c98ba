"""Ranking, recovery and redundancy measures for mined pattern sets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence as Seq

import numpy as np

from .core import Sequence, SequenceDatabase, is_subsequence, support
from .inference import Covering, Model

RECALL_LEVELS = tuple(i / 10 for i in range(11))


@dataclass(frozen=True)
class RankedPattern:
    pattern: Sequence
    interestingness: float
    inclusion_probability: float
    support: int
    explained_rows: int

    @property
    def is_singleton(self) -> bool:
        return len(self.pattern) == 1


def explained_rows(pattern: Sequence, coverings: Iterable[Covering]) -> int:
    return sum(1 for c in coverings if c.z(pattern) >= 1)


def interestingness(pattern: Sequence, coverings: Seq[Covering], db: SequenceDatabase) -> float:
    """Fraction of supporting rows whose covering actually uses the pattern."""
    supp = support(pattern, db)
    if supp == 0:
        raise ValueError(f"interestingness undefined for unsupported pattern {pattern}")
    return explained_rows(pattern, coverings) / supp


def rank_patterns(model: Model, coverings: Seq[Covering], db: SequenceDatabase) -> list[RankedPattern]:
    """Model patterns by interestingness, then inclusion probability, support, and pattern."""
    used: dict[Sequence, int] = {}
    for c in coverings:
        for s, m in c.chosen.items():
            if m:
                used[s] = used.get(s, 0) + 1
    out = []
    for s, dist in model.dists.items():
        supp = support(s, db)
        explained = used.get(s, 0)
        score = explained / supp if supp else 0.0
        out.append(RankedPattern(s, score, dist.inclusion, supp, explained))
    out.sort(key=lambda r: (-r.interestingness, -r.inclusion_probability, -r.support, r.pattern))
    return out


def non_singletons(ranked: Iterable[RankedPattern]) -> list[RankedPattern]:
    return [r for r in ranked if not r.is_singleton]


def precision_recall_at_k(mined: Seq[Sequence], generating: Iterable[Sequence], k: int) -> tuple[float, float]:
    generating = {tuple(g) for g in generating}
    if not generating:
        raise ValueError("generating set is empty")
    if k < 1:
        raise ValueError("k must be at least 1")
    hits = sum(1 for s in mined[:k] if tuple(s) in generating)
    return hits / k, hits / len(generating)


def pr_curve(mined: Seq[Sequence], generating: Iterable[Sequence]) -> list[tuple[float, float]]:
    """(precision, recall) at every cut-off k = 1 .. len(mined)."""
    generating = {tuple(g) for g in generating}
    return [precision_recall_at_k(mined, generating, k) for k in range(1, len(mined) + 1)]


def interpolated_precision_11pt(pr: Seq[tuple[float, float]]) -> list[float]:
    """Best precision at recall >= r for r = 0.0, 0.1, ..., 1.0 (0 where unreachable)."""
    if not pr:
        raise ValueError("empty precision/recall curve")
    out = []
    for level in RECALL_LEVELS:
        reach = [p for p, r in pr if r >= level - 1e-12]
        out.append(max(reach) if reach else 0.0)
    return out


def process_recall(mined: Seq[Sequence], process_of: Mapping[int, int], n_processes: int, k: int) -> float:
    """Fraction of processes with at least one pure (single-process) pattern among the top ``k``."""
    found = set()
    for s in mined[:k]:
        owners = {process_of[x] for x in s}
        if len(s) > 1 and len(owners) == 1:
            found |= owners
    return len(found) / n_processes


def edit_distance(a: Seq[int], b: Seq[int]) -> int:
    """Item-level Levenshtein distance with unit costs."""
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def redundancy_metrics(patterns: Seq[Sequence], top_k: int | None = None) -> tuple[float, float, int]:
    """Average inter-sequence distance, average containing sequences, unique items.

    Only non-singletons count and the list is cut to its first ``top_k``.
    CS counts, for each pattern, the other set members that contain it.
    """
    pats = [tuple(p) for p in patterns if len(p) > 1]
    if top_k is not None:
        pats = pats[:top_k]
    if len(pats) < 2:
        raise ValueError("need at least two non-singleton patterns")
    isd = []
    cs = []
    for i, p in enumerate(pats):
        others = pats[:i] + pats[i + 1:]
        isd.append(min(edit_distance(p, q) for q in others))
        cs.append(sum(1 for q in others if is_subsequence(p, q)))
    items = {x for p in pats for x in p}
    return float(np.mean(isd)), float(np.mean(cs)), len(items)


def feature_matrix(db: SequenceDatabase, patterns: Seq[Sequence], k: int | None = None) -> np.ndarray:
    """Binary N x k matrix: entry (i, j) is 1 iff pattern j occurs in row i."""
    if k is None:
        k = len(patterns)
    if k > len(patterns):
        raise ValueError(f"k={k} exceeds the {len(patterns)} available patterns")
    out = np.zeros((db.N, k), dtype=np.int8)
    for j, p in enumerate(patterns[:k]):
        for i, row in enumerate(db.rows):
            if is_subsequence(p, row):
                out[i, j] = 1
    return out
