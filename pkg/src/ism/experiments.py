"""Scaled-down versions of the published experiments, shared by scripts and tests."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import Sequence, SequenceDatabase
from .evaluation import precision_recall_at_k, process_recall, rank_patterns
from .generator import parallel_process_db, random_planted_model, sample_database
from .learning import EmConfig, Miner


@dataclass
class RunResult:
    ranked: list[Sequence]
    seconds: float
    miner: Miner
    extra: dict = field(default_factory=dict)


def mine(db: SequenceDatabase, cfg: EmConfig) -> RunResult:
    start = time.perf_counter()
    miner = Miner(db, cfg)
    model, coverings = miner.run()
    seconds = time.perf_counter() - start
    ranked = [r.pattern for r in rank_patterns(model, coverings, db)]
    return RunResult(ranked, seconds, miner)


def synthetic_recovery(n_patterns: int = 10, alphabet: int = 50, min_len: int = 2, max_len: int = 4,
                       min_prob: float = 0.2, max_prob: float = 0.5, n_rows: int = 1000,
                       iterations: int = 200, queue: int = 10_000, top_k: int = 10,
                       seed: int = 0) -> RunResult:
    """Plant random patterns, sample a database, mine it and score the top-k non-singletons."""
    planted = random_planted_model(n_patterns, alphabet, min_len, max_len, min_prob, max_prob, seed=seed)
    db = sample_database(planted, n_rows, seed=seed)
    res = mine(db, EmConfig(structural_iterations=iterations, queue_capacity=queue))
    top = [s for s in res.ranked if len(s) > 1]
    precision, recall = precision_recall_at_k(top, planted.dists, top_k) if top else (0.0, 0.0)
    res.extra.update(planted=planted.patterns, precision=precision, recall=recall, top=top[:top_k])
    return res


def parallel_processes(n_processes: int = 5, process_items: int = 5, n_rows: int = 1000,
                       row_length: int = 100, iterations: int = 50, top_k: int = 25,
                       seed: int = 0) -> RunResult:
    """Mine interleaved cyclic processes and count processes with a pure top-k pattern."""
    db, generating = parallel_process_db(n_processes, process_items, n_rows * row_length, row_length, seed=seed)
    res = mine(db, EmConfig(structural_iterations=iterations))
    process_of = {x: x // process_items for x in range(n_processes * process_items)}
    top = [s for s in res.ranked if len(s) > 1]
    res.extra.update(
        top=top[:top_k],
        recall=process_recall(top, process_of, n_processes, top_k),
        true_windows=sum(1 for s in top[:top_k] if s in generating),
    )
    return res


def spuriousness(n_rows: int = 1000, alphabet: int = 20, length: int = 20, first: int = 50,
                 iterations: int = 100, seed: int = 0) -> RunResult:
    """Mine i.i.d. uniform noise; report the acceptance rate over the first candidates."""
    rng = np.random.default_rng(seed)
    db = SequenceDatabase([tuple(int(x) for x in rng.integers(alphabet, size=length)) for _ in range(n_rows)],
                          alphabet)
    res = mine(db, EmConfig(structural_iterations=iterations, max_candidates=None))
    evaluated = res.miner.trace.evaluated
    head = evaluated[:first]
    res.extra.update(
        evaluated=len(evaluated),
        head=len(head),
        acceptance_rate=sum(ok for _, ok in head) / max(len(head), 1),
        non_singletons=len(res.miner.model.non_singletons()),
    )
    return res


def scaling(sizes=(1000, 2000, 4000), iterations: int = 50, n_patterns: int = 10, alphabet: int = 50,
            seed: int = 0) -> dict[int, float]:
    """Wall-clock mining time per database size, all sampled from one planted model."""
    planted = random_planted_model(n_patterns, alphabet, 2, 4, 0.2, 0.5, seed=seed)
    # warm-up so compilation of the covering kernel is not billed to the first size
    mine(sample_database(planted, 50, seed=seed), EmConfig(structural_iterations=2))
    times = {}
    for n in sizes:
        db = sample_database(planted, n, seed=seed)
        times[n] = mine(db, EmConfig(structural_iterations=iterations)).seconds
    return times
