from __future__ import annotations

import math
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ism.core import EmbeddingIndex, SequenceDatabase, support
from ism.generator import random_planted_model, sample_database
from ism.inference import Covering, Model, MultiplicityDistribution
from ism.learning import (
    CandidateQueue,
    EmConfig,
    Miner,
    candidate_pairs,
    cover_rows,
    e_step,
    frobenius_change,
    generate_candidates,
    hard_em,
    init_model,
    ism,
    m_step,
    mean_log_prob,
    rank_by_support,
    reseed_singletons,
    structural_em_step,
    usage_histograms,
    _log_table,
)


def D(*p):
    return MultiplicityDistribution(p)


def test_config_validation():
    with pytest.raises(ValueError):
        EmConfig(tolerance=0)
    with pytest.raises(ValueError):
        EmConfig(queue_capacity=0)
    with pytest.raises(ValueError):
        EmConfig(rescore="sometimes")


def test_init_model_relative_frequency():
    m = init_model(SequenceDatabase([(1,), (1,), (2,)]))
    assert m.patterns == [(1,), (2,)]
    assert m.dists[(1,)].probs == pytest.approx((1 / 3, 2 / 3))
    assert m.dists[(2,)].probs == pytest.approx((2 / 3, 1 / 3))


def test_init_model_counts_repeats():
    # the only covering of (5, 5) by singletons uses (5) twice
    m = init_model(SequenceDatabase([(5, 5)]))
    assert m.dists[(5,)].probs == (0.0, 0.0, 1.0)


def test_m_step_histograms():
    s = (1, 2)
    model = Model({s: D(0.5, 0.5), (3,): D(0.5, 0.5)}, 4)
    covs = [Covering(Counter({s: m}), [], 0.0) for m in (2, 0, 0, 1)]
    new = m_step(covs, model)
    assert new.dists[s].probs == (0.5, 0.25, 0.25)
    assert new.dists[(3,)].probs == (1.0, 0.0)
    every = m_step([Covering(Counter({s: 1}), [], 0.0)] * 3, model)
    assert every.dists[s].probs == (0.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.integers(0, 3), min_size=1, max_size=4), min_size=1, max_size=30))
def test_m_step_sums_to_one(zs):
    pats = [(0,), (1, 2), (3, 4, 5), (6,)]
    model = Model({s: D(0.5, 0.5) for s in pats}, 7)
    covs = [Covering(Counter({s: z for s, z in zip(pats, row) if z}), [], 0.0) for row in zs]
    for d in m_step(covs, model).dists.values():
        assert abs(math.fsum(d.probs) - 1.0) <= 1e-9
        assert min(d.probs) >= 0.0


def test_e_step_identical_rows_identical_coverings():
    db = SequenceDatabase([(1, 2, 3)] * 4 + [(3, 1)])
    covs = e_step(db, init_model(db))
    assert all(c.chosen == covs[0].chosen for c in covs[:4])
    assert all(c.is_partition_of(r) for c, r in zip(covs, db.rows))


def test_cover_rows_order_independent_of_workers():
    from concurrent.futures import ProcessPoolExecutor

    model = random_planted_model(4, 12, 2, 3, 0.3, 0.6, seed=3)
    db = sample_database(model, 60, seed=3)
    mdl = init_model(db)
    sup = [Counter({(x,): r.count(x) for x in set(r)}) for r in db.rows]
    logs = _log_table(mdl)
    serial = cover_rows(db.rows, sup, logs)
    with ProcessPoolExecutor(max_workers=3) as ex:
        par = cover_rows(db.rows, sup, logs, ex, 3)
    assert [c.chosen for c in serial] == [c.chosen for c in par]
    assert [c.objective_value for c in serial] == [c.objective_value for c in par]


def test_hard_em_two_identical_rows():
    db = SequenceDatabase([(1,), (1,)])
    model, covs, profit = hard_em(init_model(db), db, EmConfig())
    assert model.dists[(1,)].probs == (0.0, 1.0)
    assert profit == pytest.approx(0.0)


def test_hard_em_fixed_point_unchanged():
    db = SequenceDatabase([(1, 2), (2,), (1,)])
    m1, _, _ = hard_em(init_model(db), db)
    m2, _, _ = hard_em(m1, db)
    assert frobenius_change(m1, m2) == 0.0


def test_hard_em_prunes_unused_and_rejects_them():
    db = SequenceDatabase([(1, 2)] * 3)
    model = init_model(db).replace({(2, 1): D(0.0, 1.0)})
    miner = Miner(db, EmConfig(), model)
    miner.hard_em()
    assert (2, 1) not in miner.model
    assert (2, 1) in miner.queue.rejected
    assert (1,) in miner.model and (2,) in miner.model


def test_reseed_singletons():
    db = SequenceDatabase([(1, 3), (3,)])
    partial = Model({(1,): D(0.5, 0.5)}, 4)
    assert (3,) in reseed_singletons(partial, db)
    full = init_model(db)
    assert reseed_singletons(full, db) is full
    dead = full.replace({(3,): D(1.0, 0.0)})
    assert reseed_singletons(dead, db).dists[(3,)].probs == (0.0, 1.0)


def test_candidate_enumeration_order():
    db = SequenceDatabase([(1,)] * 10 + [(2,)] * 5)
    model = init_model(db)
    ranked = rank_by_support(model, EmbeddingIndex(db.rows))
    assert ranked == [(1,), (2,)]
    assert [a + b for a, b in candidate_pairs(ranked)] == [(1, 1), (1, 2), (2, 1), (2, 2)]


def test_queue_pops_by_support_and_skips_rejected():
    db = SequenceDatabase([(1, 2, 1)] * 3 + [(2, 1)] * 2)
    model = init_model(db)
    queue = CandidateQueue(capacity=10)
    assert generate_candidates(model, db, queue) == (2, 1)  # support 5
    queue.rejected.add((1, 2))
    rest = []
    while (c := generate_candidates(model, db, queue)) is not None and len(rest) < 3:
        rest.append(c)
        if c == (1, 1):
            break
    assert (1, 2) not in rest
    assert len(queue) <= queue.capacity


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.integers(0, 4), min_size=1, max_size=6).map(tuple), min_size=1, max_size=8),
       st.integers(1, 30))
def test_queue_respects_capacity_and_support(rows, cap):
    db = SequenceDatabase(rows)
    model = init_model(db)
    queue = CandidateQueue(capacity=cap)
    queue.build(model, EmbeddingIndex(db.rows))
    assert len(queue) <= cap
    for negsupp, _, cand, left, right in queue.heap:
        assert cand == left + right and -negsupp == support(cand, db)
        assert cand not in model


def test_structural_step_accepts_correlated_pair():
    db = SequenceDatabase([(1, 2)] * 50 + [(3,)] * 50)
    model, _, profit = hard_em(init_model(db), db)
    new, accepted, new_profit = structural_em_step(model, db, CandidateQueue(), profit)
    assert accepted and (1, 2) in new
    assert new.dists[(1, 2)].probs == (0.5, 0.5)
    # singletons went from (0.5, 0.5) to unused: two entropy terms became one
    half_pen = math.log(2) / 2  # mean of ln|X|! over rows of length 2 and 1
    assert profit == pytest.approx(3 * math.log(0.5) - half_pen)
    assert new_profit == pytest.approx(2 * math.log(0.5) - half_pen)


def test_structural_step_rejects_exact_tie():
    # every row is (1, 2): singletons already have pi = (0, 1), so adding
    # (1, 2) leaves the mean objective unchanged and is not accepted
    db = SequenceDatabase([(1, 2)] * 100)
    model, _, profit = hard_em(init_model(db), db)
    new, accepted, new_profit = structural_em_step(model, db, CandidateQueue(), profit)
    assert not accepted and new_profit == profit == pytest.approx(-math.log(2))


def test_zero_support_candidate_rejected():
    db = SequenceDatabase([(1, 2)] * 5 + [(3,)] * 5)
    miner = Miner(db)
    miner.hard_em()
    assert not miner.evaluate((3, 1))


def test_ism_recovers_full_pattern():
    db = SequenceDatabase([(1, 2, 3)] * 20 + [(4,)] * 20)
    model, covs = ism(db, EmConfig(structural_iterations=10))
    assert model.non_singletons() == [(1, 2, 3)]
    assert model.dists[(1, 2, 3)].probs == (0.5, 0.5)
    assert all(c.chosen == {(1, 2, 3): 1} for c in covs[:20])


def test_ism_deterministic():
    model = random_planted_model(3, 10, 2, 3, 0.3, 0.6, seed=5)
    db = sample_database(model, 80, seed=5)
    cfg = EmConfig(structural_iterations=15)
    a, _ = ism(db, cfg, seed=1)
    b, _ = ism(db, cfg, seed=1)
    assert a.dists == b.dists and a.patterns == b.patterns


def test_accepted_steps_strictly_increase_and_sums_hold():
    model = random_planted_model(4, 15, 2, 3, 0.3, 0.6, seed=7)
    db = sample_database(model, 150, seed=7)
    miner = Miner(db, EmConfig(structural_iterations=20))
    miner.run()
    assert miner.trace.accepted_profits
    assert all(new > old for old, new in miner.trace.accepted_profits)
    assert miner.trace.max_mstep_sum_error <= 1e-9
    assert all(k <= miner.cfg.max_em_iterations for k in miner.trace.em_iterations)
    evaluated = [c for c, _ in miner.trace.evaluated]
    assert len(evaluated) == len(set(evaluated))
    assert miner.queue.rejected.isdisjoint(miner.model.dists)


def test_mean_log_prob_matches_direct_sum():
    db = SequenceDatabase([(1, 2), (1, 2, 1), (2,)])
    model, covs, profit = hard_em(init_model(db), db)
    direct = 0.0
    for c, r in zip(covs, db.rows):
        direct += sum(model.log_probs(s)[c.z(s)] for s in model.dists) - math.lgamma(len(r) + 1)
    assert profit == pytest.approx(direct / db.N)
    hist = usage_histograms(covs)
    mean_pen = sum(math.lgamma(len(r) + 1) for r in db.rows) / db.N
    assert mean_log_prob(hist, model, db.N, mean_pen) == pytest.approx(profit)


def test_reoptimize_rescoring_runs():
    db = SequenceDatabase([(1, 2)] * 30 + [(3, 4)] * 30)
    model, _ = ism(db, EmConfig(structural_iterations=5, rescore="reoptimize"))
    assert (1, 2) in model and (3, 4) in model


def test_queue_extend_adds_new_concatenations():
    db = SequenceDatabase([(1, 2, 3)] * 4 + [(3,)] * 2)
    model = init_model(db)
    index = EmbeddingIndex(db.rows)
    queue = CandidateQueue(capacity=100)
    queue.build(model, index)
    model = model.replace({(1, 2): D(0.0, 1.0)})
    index.add((1, 2))
    queue.extend((1, 2), model, index)
    queued = {c for _, _, c, _, _ in queue.heap}
    assert (1, 2, 3) in queued and (3, 1, 2) in queued
    assert len(queued) == len(queue.heap)
    small = CandidateQueue(capacity=3)
    small.build(init_model(db), index)
    small.extend((1, 2), model, index)
    assert len(small) == 3


def test_extension_proposed_before_stale_pairs():
    # once (1, 2) is accepted, (1, 2)(3) is tried ahead of the leftover singleton pairs
    db = SequenceDatabase([(1, 2, 3)] * 30 + [(1, 2)] * 10 + [(4,)] * 30)
    miner = Miner(db, EmConfig(structural_iterations=20))
    model, _ = miner.run()
    order = [c for c, _ in miner.trace.evaluated]
    assert (1, 2, 3) in model
    assert order.index((1, 2, 3)) < order.index((1, 1))
