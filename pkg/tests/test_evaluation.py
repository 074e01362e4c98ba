from __future__ import annotations

from collections import Counter
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ism.core import SequenceDatabase, is_subsequence
from ism.evaluation import (
    edit_distance,
    feature_matrix,
    interestingness,
    interpolated_precision_11pt,
    pr_curve,
    precision_recall_at_k,
    process_recall,
    rank_patterns,
    redundancy_metrics,
)
from ism.inference import Covering, Model, MultiplicityDistribution

A, B, C, D_ = (1, 2), (3, 4), (5, 6), (7, 8)
seqs = st.lists(st.integers(0, 3), max_size=6).map(tuple)


def cov(*pats):
    return Covering(Counter(pats), [], 0.0)


def test_interestingness_ratios():
    db = SequenceDatabase([(1, 2)] * 10)
    assert interestingness((1, 2), [cov((1, 2))] * 10, db) == 1.0
    assert interestingness((1, 2), [cov((1, 2))] * 5 + [cov((1,), (2,))] * 5, db) == 0.5
    assert interestingness((1, 2), [cov((1,), (2,))] * 10, db) == 0.0
    with pytest.raises(ValueError):
        interestingness((9,), [cov((1, 2))] * 10, db)


def test_rank_order_and_tiebreak():
    db = SequenceDatabase([(1, 2, 3)] * 4)
    model = Model({(1, 2): MultiplicityDistribution((0.8, 0.2)),
                   (3,): MultiplicityDistribution((0.1, 0.9)),
                   (1,): MultiplicityDistribution((0.5, 0.5)),
                   (2,): MultiplicityDistribution((0.5, 0.5))}, 4)
    covs = [cov((1, 2), (3,))] * 2 + [cov((1,), (2,), (3,))] * 2
    ranked = rank_patterns(model, covs, db)
    assert [r.pattern for r in ranked] == [(3,), (1,), (2,), (1, 2)]
    assert ranked[-1].interestingness == 0.5 and not ranked[-1].is_singleton
    assert sorted(r.pattern for r in ranked) == sorted(model.patterns)
    # equal interestingness: higher inclusion probability first
    covs = [cov((1, 2), (3,))] * 4
    model2 = Model({(1, 2): MultiplicityDistribution((0.8, 0.2)),
                    (3,): MultiplicityDistribution((0.1, 0.9))}, 4)
    assert [r.pattern for r in rank_patterns(model2, covs, db)] == [(3,), (1, 2)]


def test_precision_recall_examples():
    assert precision_recall_at_k([A, B, C], {A, B, D_}, 3) == (2 / 3, 2 / 3)
    assert precision_recall_at_k([A, B], {A, B}, 2) == (1.0, 1.0)
    assert precision_recall_at_k([A, C], {A, B, D_}, 1) == (1.0, 1 / 3)
    with pytest.raises(ValueError):
        precision_recall_at_k([A], set(), 1)
    with pytest.raises(ValueError):
        precision_recall_at_k([A], {A}, 0)


def test_interpolated_precision_examples():
    assert interpolated_precision_11pt([(1.0, 1.0)]) == [1.0] * 11
    got = interpolated_precision_11pt([(1.0, 0.5), (0.5, 1.0)])
    assert got == [1.0] * 6 + [0.5] * 5
    with pytest.raises(ValueError):
        interpolated_precision_11pt([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(range(12)), min_size=1, max_size=12, unique=True),
       st.sets(st.sampled_from(range(12)), min_size=1))
def test_pr_properties(mined, generating):
    mined = [(x,) for x in mined]
    generating = {(x,) for x in generating}
    for k in range(1, len(mined) + 1):
        p, r = precision_recall_at_k(mined, generating, k)
        assert round(p * k) == round(r * len(generating))
    curve = interpolated_precision_11pt(pr_curve(mined, generating))
    assert all(a >= b for a, b in zip(curve, curve[1:]))


def test_edit_distance_oracle():
    assert edit_distance((1, 2), (1, 2, 3)) == 1
    assert edit_distance((), (1, 2)) == 2
    assert edit_distance((1, 2, 3), (3, 2, 1)) == 2


def brute_edit(a, b):
    if not a:
        return len(b)
    if not b:
        return len(a)
    return min(brute_edit(a[1:], b) + 1, brute_edit(a, b[1:]) + 1, brute_edit(a[1:], b[1:]) + (a[0] != b[0]))


@settings(max_examples=200, deadline=None)
@given(seqs, seqs)
def test_edit_distance_matches_recursion(a, b):
    assert edit_distance(a, b) == brute_edit(a, b) == edit_distance(b, a)


def test_redundancy_examples():
    isd, cs, unique = redundancy_metrics([(1, 2), (1, 2, 3)])
    assert isd == 1.0 and cs == 0.5 and unique == 3
    assert redundancy_metrics([(1, 2), (1, 2)])[0] == 0.0
    isd, cs, _ = redundancy_metrics([(1, 2, 3), (4, 5, 6), (7, 8, 9)])
    assert isd >= 3 and cs == 0
    with pytest.raises(ValueError):
        redundancy_metrics([(1, 2), (3,)])
    with pytest.raises(ValueError):
        redundancy_metrics([(1, 2), (3, 4), (5, 6)], top_k=1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.integers(0, 4), min_size=2, max_size=4).map(tuple), min_size=2, max_size=6),
       st.randoms())
def test_redundancy_permutation_invariant(pats, rnd):
    shuffled = list(pats)
    rnd.shuffle(shuffled)
    a, b = redundancy_metrics(pats), redundancy_metrics(shuffled)
    assert a[0] == pytest.approx(b[0]) and a[1] == pytest.approx(b[1]) and a[2] == b[2]


def test_feature_matrix():
    db = SequenceDatabase([(1, 2, 3), (3, 1), (2,)])
    pats = [(1,), (1, 3), (9, 9), (2, 3)]
    fm = feature_matrix(db, pats, 3)
    assert fm.shape == (3, 3)
    assert fm[:, 2].sum() == 0
    for i, j in product(range(3), range(3)):
        assert fm[i, j] == is_subsequence(pats[j], db[i])
    assert feature_matrix(SequenceDatabase([(5,)] * 4), [(5,)]).tolist() == [[1]] * 4
    with pytest.raises(ValueError):
        feature_matrix(db, pats, 5)


def test_process_recall_counts_pure_patterns():
    process_of = {x: x // 5 for x in range(10)}
    assert process_recall([(0, 1), (5, 6)], process_of, 2, 2) == 1.0
    assert process_recall([(0, 5), (1,)], process_of, 2, 2) == 0.0
    assert process_recall([(0, 1), (5, 6)], process_of, 2, 1) == 0.5
