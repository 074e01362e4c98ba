"""Hard EM, structural EM, candidate generation and the top-level miner."""

from __future__ import annotations

import heapq
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence as Seq

import numpy as np

from .core import EmbeddingIndex, Sequence, SequenceDatabase, count_disjoint, supported_multiset
from .inference import (
    CoverageError,
    Covering,
    Model,
    MultiplicityDistribution,
    cover_row,
    log_factorial,
    safe_log,
)

log = logging.getLogger(__name__)


@dataclass
class EmConfig:
    """Knobs for the miner; defaults follow the published experimental setup."""

    tolerance: float = 1e-5
    max_em_iterations: int = 100
    structural_iterations: int = 1000
    em_interval: int = 1
    queue_capacity: int = 100_000
    rebuild_every: int = 50
    workers: int = 1
    rescore: str = "fixed"
    max_candidates: int | None = None

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        for name in ("max_em_iterations", "structural_iterations", "em_interval",
                     "queue_capacity", "rebuild_every", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.rescore not in ("fixed", "reoptimize"):
            raise ValueError("rescore must be 'fixed' or 'reoptimize'")


# ---------------------------------------------------------------- E / M steps

try:
    from ._fastcover import cover_rows_fast
except ImportError:  # pragma: no cover - numba missing
    cover_rows_fast = None

USE_COMPILED = cover_rows_fast is not None


def _cover_chunk(args):
    rows, supported, logs = args
    if USE_COMPILED:
        return cover_rows_fast(rows, supported, logs)
    return [cover_row(r, s, logs) for r, s in zip(rows, supported)]


def _log_table(model: Model, forced: Mapping[Sequence, Seq[float]] | None = None):
    logs = {s: model.log_probs(s) for s in model.dists}
    if forced:
        for s, v in forced.items():
            logs[s] = tuple(safe_log(p) for p in v)
    return logs


def cover_rows(rows: Seq[Sequence], supported: Seq[Mapping[Sequence, int]], logs,
               executor: ProcessPoolExecutor | None = None, workers: int = 1) -> list[Covering]:
    """Greedy-cover many rows; identical rows are solved once.

    Output order always matches input order, whatever the worker count.
    """
    first: dict[Sequence, int] = {}
    uniq_rows, uniq_sup, slot = [], [], []
    for r, s in zip(rows, supported):
        k = first.get(r)
        if k is None:
            k = first[r] = len(uniq_rows)
            uniq_rows.append(r)
            uniq_sup.append(s)
        slot.append(k)
    if executor is not None and workers > 1 and len(uniq_rows) > 1:
        bounds = np.linspace(0, len(uniq_rows), workers + 1).astype(int)
        chunks = [(uniq_rows[a:b], uniq_sup[a:b], logs) for a, b in zip(bounds, bounds[1:]) if b > a]
        solved = [c for part in executor.map(_cover_chunk, chunks) for c in part]
    else:
        solved = _cover_chunk((uniq_rows, uniq_sup, logs))
    return [solved[k] for k in slot]


def e_step(db: SequenceDatabase, model: Model, supported: Seq[Mapping[Sequence, int]] | None = None,
           executor: ProcessPoolExecutor | None = None, workers: int = 1) -> list[Covering]:
    """One covering per row under the current model."""
    if supported is None:
        supported = [supported_multiset(r, model.patterns) for r in db.rows]
    logs = _log_table(model)
    try:
        return cover_rows(db.rows, supported, logs, executor, workers)
    except CoverageError as err:
        for i, r in enumerate(db.rows):
            if set(err.missing) & set(r):
                raise CoverageError(err.missing, i) from None
        raise


def usage_histograms(coverings: Iterable[Covering]) -> dict[Sequence, Counter]:
    """``hist[S][m]`` = number of rows whose covering uses ``S`` exactly ``m >= 1`` times."""
    hist: dict[Sequence, Counter] = {}
    for cov in coverings:
        for s, m in cov.chosen.items():
            if m:
                hist.setdefault(s, Counter())[m] += 1
    return hist


def m_step(coverings: Seq[Covering], model: Model) -> Model:
    """Empirical multiplicity histograms, accumulated in row order."""
    n = len(coverings)
    hist = usage_histograms(coverings)
    dists = {s: MultiplicityDistribution.from_histogram(hist.get(s, {}), n) for s in model.dists}
    return Model(dists, model.vocab_size)


def frobenius_change(a: Model, b: Model) -> float:
    total = 0.0
    for s in set(a.dists) | set(b.dists):
        pa = a.dists[s].probs if s in a.dists else (1.0,)
        pb = b.dists[s].probs if s in b.dists else (1.0,)
        width = max(len(pa), len(pb))
        for m in range(width):
            d = (pa[m] if m < len(pa) else 0.0) - (pb[m] if m < len(pb) else 0.0)
            total += d * d
    return math.sqrt(total)


def mean_log_prob(hist: Mapping[Sequence, Mapping[int, int]], model: Model, n: int,
                  mean_penalty: float) -> float:
    """Average over rows of ln p(X, z | Pi), from usage histograms.

    Every pattern of the model contributes, including ``ln pi_S[0]`` for
    rows that do not use it. Each full covering of a row has the same
    permutation penalty, so it enters as a per-row constant.
    """
    total = 0.0
    for s in model.dists:
        total += _pattern_term(hist.get(s, {}), model.log_probs(s), n)
    return total - mean_penalty


def _pattern_term(hist: Mapping[int, int], logs: Seq[float], n: int) -> float:
    used = 0
    t = 0.0
    for m, c in hist.items():
        if c:
            used += c
            t += c * (logs[m] if m < len(logs) else safe_log(0.0))
    if n > used:
        t += (n - used) * logs[0]
    return t / n


def _entropy_term(hist: Mapping[int, int], n: int) -> float:
    # _pattern_term evaluated at the distribution the M-step would produce
    used = sum(hist.values())
    t = 0.0
    for c in list(hist.values()) + [n - used]:
        if c:
            t += c * math.log(c / n)
    return t / n


def init_model(db: SequenceDatabase) -> Model:
    """Singleton patterns with their empirical per-row count distributions.

    With singletons only there is exactly one covering of each row, so this
    is the M-step of that covering; for rows holding an item at most once it
    reduces to ``(1 - supp/N, supp/N)``.
    """
    n = db.N
    hist: dict[int, Counter] = {}
    for row in db.rows:
        for x, c in Counter(row).items():
            hist.setdefault(x, Counter())[c] += 1
    dists = {(x,): MultiplicityDistribution.from_histogram(hist[x], n) for x in sorted(hist)}
    return Model(dists, db.vocab_size)


def reseed_singletons(model: Model, db: SequenceDatabase) -> Model:
    """Re-insert singletons that are absent or have ``pi[1] == 0`` for items present in the data."""
    fresh = init_model(db)
    updates = {}
    for s, dist in fresh.dists.items():
        cur = model.dists.get(s)
        if cur is None or cur[1] == 0.0:
            updates[s] = dist
    return model.replace(updates) if updates else model


# ----------------------------------------------------------- candidate queue

@dataclass
class CandidateQueue:
    """Support-ordered queue of pairwise concatenations of model patterns."""

    capacity: int = 100_000
    heap: list = field(default_factory=list)
    support_cache: dict[Sequence, int] = field(default_factory=dict)
    rejected: set[Sequence] = field(default_factory=set)
    built: bool = False
    accepted_since_build: int = 0
    _tick: int = 0

    def __len__(self) -> int:
        return len(self.heap)

    def stale(self, rebuild_every: int) -> bool:
        return not self.built or not self.heap or self.accepted_since_build >= rebuild_every

    def build(self, model: Model, index: EmbeddingIndex) -> None:
        self.heap = []
        self.built = True
        self.accepted_since_build = 0
        ranked = rank_by_support(model, index)
        seen: set[Sequence] = set()
        for left, right in candidate_pairs(ranked):
            cand = left + right
            if cand in seen or cand in model.dists or cand in self.rejected:
                continue
            seen.add(cand)
            supp = self.support_cache.get(cand)
            if supp is None:
                supp = self.support_cache[cand] = index.concat_support(left, right)
            heapq.heappush(self.heap, (-supp, self._tick, cand, left, right))
            self._tick += 1
            if len(self.heap) >= self.capacity:
                break

    def extend(self, pattern: Sequence, model: Model, index: EmbeddingIndex) -> None:
        """Queue the concatenations of a newly accepted ``pattern`` with every model pattern.

        Keeps the queue keyed to the current pattern set between full rebuilds.
        """
        if not self.built:
            return
        queued = {entry[2] for entry in self.heap}
        for s in rank_by_support(model, index):
            for left, right in ((pattern, s), (s, pattern)):
                cand = left + right
                if cand in queued or cand in model.dists or cand in self.rejected:
                    continue
                queued.add(cand)
                supp = self.support_cache.get(cand)
                if supp is None:
                    supp = self.support_cache[cand] = index.concat_support(left, right)
                heapq.heappush(self.heap, (-supp, self._tick, cand, left, right))
                self._tick += 1
        if len(self.heap) > self.capacity:
            self.heap = heapq.nsmallest(self.capacity, self.heap)
            heapq.heapify(self.heap)

    def pop(self, model: Model) -> tuple[Sequence, Sequence, Sequence, int] | None:
        while self.heap:
            negsupp, _, cand, left, right = heapq.heappop(self.heap)
            if cand in self.rejected or cand in model.dists:
                continue
            return cand, left, right, -negsupp
        return None


def rank_by_support(model: Model, index: EmbeddingIndex) -> list[Sequence]:
    """Model patterns by decreasing support, ties by pattern order."""
    for s in model.dists:
        index.add(s)
    return sorted(model.dists, key=lambda s: (-index.support(s), s))


def candidate_pairs(ranked: Seq[Sequence]):
    """Ordered pairs, highest-ranked first: (0,0), (0,1), ..., (1,0), ..."""
    for a in ranked:
        for b in ranked:
            yield a, b


def generate_candidates(model: Model, db: SequenceDatabase, queue: CandidateQueue,
                        index: EmbeddingIndex | None = None) -> Sequence | None:
    """Pull the best untried candidate, building the queue first if needed."""
    if index is None:
        index = EmbeddingIndex(db.rows)
    if not queue.built or not queue.heap:
        queue.build(model, index)
    hit = queue.pop(model)
    return None if hit is None else hit[0]


# ------------------------------------------------------------------- the miner

@dataclass
class Trace:
    """What happened during a run; used by tests and progress reporting."""

    evaluated: list[tuple[Sequence, bool]] = field(default_factory=list)
    accepted_profits: list[tuple[float, float]] = field(default_factory=list)
    em_iterations: list[int] = field(default_factory=list)
    em_objectives: list[list[float]] = field(default_factory=list)
    max_mstep_sum_error: float = 0.0

    def note_model(self, model: Model) -> None:
        for d in model.dists.values():
            err = abs(math.fsum(d.probs) - 1.0)
            if err > self.max_mstep_sum_error:
                self.max_mstep_sum_error = err


class Miner:
    """Mining state over one database.

    Caches, per row, the supported multiset and the current covering, plus
    per-pattern usage histograms, so a structural-EM candidate only costs
    re-covering the rows that contain it.
    """

    def __init__(self, db: SequenceDatabase, cfg: EmConfig | None = None, model: Model | None = None):
        self.db = db
        self.cfg = cfg or EmConfig()
        self.rows = db.rows
        self.n = db.N
        self.mean_penalty = math.fsum(log_factorial(len(r)) for r in self.rows) / self.n
        self.model = model if model is not None else init_model(db)
        self.index = EmbeddingIndex(self.rows)
        self.queue = CandidateQueue(self.cfg.queue_capacity)
        self.trace = Trace()
        self.executor: ProcessPoolExecutor | None = None
        self.supported = [Counter() for _ in self.rows]
        for s in self.model.dists:
            self._attach(s)
        self.coverings: list[Covering] = []
        self.hist: dict[Sequence, Counter] = {}
        self.profit = -math.inf
        self.accepted = 0

    # -- pattern bookkeeping

    def _attach(self, pattern: Sequence, counts: Mapping[int, int] | None = None) -> None:
        if counts is None:
            counts = {}
            if len(pattern) == 1:
                x = pattern[0]
                for i, r in enumerate(self.rows):
                    c = r.count(x)
                    if c:
                        counts[i] = c
            else:
                self.index.add(pattern)
                for i in np.flatnonzero(self.index.ends[pattern] != np.iinfo(np.int32).max):
                    counts[int(i)] = count_disjoint(pattern, self.rows[i])
        for i, c in counts.items():
            self.supported[i][pattern] = c

    def _detach(self, pattern: Sequence) -> None:
        for sup in self.supported:
            sup.pop(pattern, None)
        self.index.discard(pattern)
        self.hist.pop(pattern, None)

    # -- EM

    def _e_step(self, forced=None, rows: Seq[int] | None = None, extra=None) -> list[Covering]:
        logs = _log_table(self.model, forced)
        idx = range(self.n) if rows is None else rows
        sup = [self.supported[i] if extra is None else {**self.supported[i], **extra.get(i, {})} for i in idx]
        return cover_rows([self.rows[i] for i in idx], sup, logs, self.executor, self.cfg.workers)

    def _full_e_step(self) -> list[Covering]:
        try:
            return self._e_step()
        except CoverageError as err:
            log.warning("reseeding singletons after coverage failure: %s", err)
            self.model = reseed_singletons(self.model, self.db)
            for s in self.model.dists:
                if len(s) == 1 and not any(s in sup for sup in self.supported):
                    self._attach(s)
            return self._e_step()

    def hard_em(self) -> float:
        """Alternate E and M steps to a fixed point, then prune unused patterns."""
        cfg = self.cfg
        objectives = []
        k = 0
        for k in range(1, cfg.max_em_iterations + 1):
            covs = self._full_e_step()
            hist = usage_histograms(covs)
            objectives.append(mean_log_prob(hist, self.model, self.n, self.mean_penalty))
            new = m_step(covs, self.model)
            self.trace.note_model(new)
            delta = frobenius_change(self.model, new)
            self.model, self.coverings, self.hist = new, covs, hist
            if delta <= cfg.tolerance:
                break
        self.trace.em_iterations.append(k)
        self.trace.em_objectives.append(objectives)
        dead = [s for s, d in self.model.dists.items() if len(s) > 1 and d.probs[0] == 1.0]
        if dead:
            self.model = self.model.replace(remove=dead)
            for s in dead:
                self._detach(s)
                self.queue.rejected.add(s)
        self.profit = mean_log_prob(self.hist, self.model, self.n, self.mean_penalty)
        return self.profit

    # -- structural EM

    def next_candidate(self):
        if self.queue.stale(self.cfg.rebuild_every):
            self.queue.build(self.model, self.index)
        return self.queue.pop(self.model)

    def structural_step(self) -> bool:
        """Try candidates until one improves the mean objective; False if none left."""
        rebuilt_empty = False
        while True:
            if self.cfg.max_candidates is not None and len(self.trace.evaluated) >= self.cfg.max_candidates:
                return False
            hit = self.next_candidate()
            if hit is None:
                if rebuilt_empty or not self.queue.built:
                    return False
                self.queue.build(self.model, self.index)
                rebuilt_empty = True
                hit = self.queue.pop(self.model)
                if hit is None:
                    return False
            rebuilt_empty = False
            cand, left, right, supp = hit
            ok = self.evaluate(cand, left, right)
            self.trace.evaluated.append((cand, ok))
            if ok:
                self.accepted += 1
                self.queue.accepted_since_build += 1
                self.queue.extend(cand, self.model, self.index)
                return True
            self.queue.rejected.add(cand)

    def evaluate(self, cand: Sequence, left: Sequence | None = None, right: Sequence | None = None) -> bool:
        """Add ``cand`` with the forced prior, E-step, M-step, rescore; keep it if the profit rises."""
        if left is not None and left in self.index.ends and right in self.index.ends:
            mask = self.index.concat_mask(left, right)
        else:
            self.index.add(cand)
            mask = self.index.ends[cand] != np.iinfo(np.int32).max
        rows = [int(i) for i in np.flatnonzero(mask)]
        if not rows:
            return False
        occ_cache: dict[Sequence, int] = {}
        occ = {}
        for i in rows:
            r = self.rows[i]
            c = occ_cache.get(r)
            if c is None:
                c = occ_cache[r] = count_disjoint(cand, r)
            occ[i] = c
        forced = {cand: (0.0,) + (1.0,) * max(occ.values())}
        extra = {i: {cand: c} for i, c in occ.items()}
        new_covs = self._e_step(forced, rows, extra)

        # M-step restricted to patterns whose usage changed
        changed: dict[Sequence, Counter] = {}
        for i, cov in zip(rows, new_covs):
            old = self.coverings[i].chosen
            if old == cov.chosen:
                continue
            for s, m in old.items():
                h = changed.get(s)
                if h is None:
                    h = changed[s] = Counter(self.hist.get(s, {}))
                h[m] -= 1
            for s, m in cov.chosen.items():
                h = changed.get(s)
                if h is None:
                    h = changed[s] = Counter(self.hist.get(s, {}))
                h[m] += 1
        if cand not in changed:
            return False
        for h in changed.values():
            for m in [m for m, c in h.items() if c == 0]:
                del h[m]

        if self.cfg.rescore == "fixed":
            new_profit = self.profit
            for s, h in changed.items():
                if s in self.model.dists:
                    new_profit -= _pattern_term(self.hist.get(s, {}), self.model.log_probs(s), self.n)
                new_profit += _entropy_term(h, self.n)
            if not new_profit > self.profit + 1e-10 * max(1.0, abs(self.profit)):
                return False
            updates = {s: MultiplicityDistribution.from_histogram(h, self.n) for s, h in changed.items()}
            self.model = self.model.replace(updates)
            self._attach(cand, occ)
            self.index.add(cand)
            for i, cov in zip(rows, new_covs):
                self.coverings[i] = cov
            self.hist.update(changed)
            self.trace.note_model(self.model)
            self.trace.accepted_profits.append((self.profit, new_profit))
            self.profit = new_profit
            log.debug("accepted %s profit=%.6f", cand, new_profit)
            return True
        return self._evaluate_reoptimize(cand, rows, new_covs, occ)

    def _evaluate_reoptimize(self, cand, rows, new_covs, occ) -> bool:
        # Re-solve every row under the M-step parameters instead of rescoring fixed coverings.
        covs = list(self.coverings)
        for i, cov in zip(rows, new_covs):
            covs[i] = cov
        trial = m_step(covs, self.model.replace({cand: MultiplicityDistribution((1.0, 0.0))}))
        current = self.model
        self.model = trial
        extra = {i: {cand: c} for i, c in occ.items()}
        resolved = self._e_step(None, range(self.n), extra)
        hist = usage_histograms(resolved)
        new_profit = mean_log_prob(hist, trial, self.n, self.mean_penalty)
        if not new_profit > self.profit + 1e-10 * max(1.0, abs(self.profit)):
            self.model = current
            return False
        old = self.profit
        self._attach(cand, occ)
        self.index.add(cand)
        self.coverings, self.hist, self.profit = resolved, hist, new_profit
        self.trace.note_model(self.model)
        self.trace.accepted_profits.append((old, new_profit))
        return True

    # -- driver

    def run(self) -> tuple[Model, list[Covering]]:
        cfg = self.cfg
        if cfg.workers > 1:
            self.executor = ProcessPoolExecutor(max_workers=cfg.workers)
        try:
            self.hard_em()
            for it in range(1, cfg.structural_iterations + 1):
                ok = self.structural_step()
                log.info("ism iteration=%d candidates=%d accepted=%d patterns=%d objective=%.6f",
                         it, len(self.trace.evaluated), self.accepted, len(self.model), self.profit)
                if not ok:
                    break
                if self.accepted % cfg.em_interval == 0:
                    self.hard_em()
            self.hard_em()
        finally:
            if self.executor is not None:
                self.executor.shutdown()
                self.executor = None
        return self.model, self.coverings


def hard_em(model: Model, db: SequenceDatabase, cfg: EmConfig | None = None) -> tuple[Model, list[Covering], float]:
    miner = Miner(db, cfg, model)
    profit = miner.hard_em()
    return miner.model, miner.coverings, profit


def structural_em_step(model: Model, db: SequenceDatabase, queue: CandidateQueue,
                       current_profit: float | None = None,
                       cfg: EmConfig | None = None) -> tuple[Model, bool, float]:
    """One structural-EM iteration from a model whose parameters are at an M-step fixed point.

    ``current_profit`` defaults to the mean objective of the model's own
    coverings; the queue (and its rejected set) is shared with the caller.
    """
    miner = Miner(db, cfg, model)
    miner.queue = queue
    covs = miner._full_e_step()
    miner.coverings = covs
    miner.hist = usage_histograms(covs)
    miner.profit = (mean_log_prob(miner.hist, model, miner.n, miner.mean_penalty)
                    if current_profit is None else current_profit)
    accepted = miner.structural_step()
    return miner.model, accepted, miner.profit


def ism(db: SequenceDatabase, cfg: EmConfig | None = None, seed: int = 0) -> tuple[Model, list[Covering]]:
    """Mine interesting sequences. The search is deterministic; ``seed`` is recorded only."""
    miner = Miner(db, cfg)
    return miner.run()
