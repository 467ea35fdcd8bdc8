import numpy as np
import pytest

from replaygauge.core.errors import InvalidParameter, NoEvaluableUsers, ZeroDenominator
from replaygauge.schemas.evaluation import RelevanceCriterion
from replaygauge.services.evaluation_service import (
    average_precision_at_k,
    composition_report,
    criterion_relevance,
    map_at_k,
)
from replaygauge.services.signals_service import summarize_interactions
from tests.conftest import make_log

A, B, C, X = 1, 2, 3, 9


def brute_force_ap(recs, relevant, k, denominator):
    total = 0.0
    for m in range(1, min(k, len(recs)) + 1):
        if recs[m - 1] in relevant:
            hits = 0
            for j in range(m):
                if recs[j] in relevant:
                    hits += 1
            total += hits / m
    return total / denominator


# -- relevance ---------------------------------------------------------------

def test_relevance_sets_per_criterion():
    hidden = summarize_interactions(make_log([
        (1, A, 10), (1, A, 100), (1, A, 200),   # p=3, K=1, P=2
        (1, B, 100), (1, B, 100),               # liked
        (1, C, 5),                              # disliked
    ]))
    sets = {c: criterion_relevance(hidden, c)[1] for c in RelevanceCriterion}
    assert sets[RelevanceCriterion.EVENTS] == {A, B, C}
    assert sets[RelevanceCriterion.STREAMS] == {A, B}
    assert sets[RelevanceCriterion.SKIPS] == {A, C}
    assert sets[RelevanceCriterion.LIKES] == {B}
    assert sets[RelevanceCriterion.DISLIKES] == {C}


def test_users_without_hidden_events_get_empty_sets():
    hidden = summarize_interactions(make_log([(1, A, 100)]))
    relevance = criterion_relevance(hidden, "events", users=[1, 2])
    assert relevance == {1: {A}, 2: set()}


def test_visible_tracks_are_not_relevant():
    hidden = summarize_interactions(make_log([(1, A, 100), (1, B, 100)]))
    relevance = criterion_relevance(hidden, "streams", visible_tracks={1: {A}})
    assert relevance == {1: {B}}


# -- average precision -------------------------------------------------------

def test_ap_worked_example():
    assert average_precision_at_k([A, B, C], {A, C}, 3, 2) == pytest.approx(0.8333333333333334)


def test_ap_no_hits():
    assert average_precision_at_k([A, B], {X}, 2, 1) == 0.0


def test_ap_short_list():
    assert average_precision_at_k([A], {A}, 10, 1) == 1.0


def test_ap_truncates_at_k():
    assert average_precision_at_k([B, A], {A}, 1, 1) == 0.0


def test_ap_errors():
    with pytest.raises(ZeroDenominator):
        average_precision_at_k([A], {A}, 1, 0)
    with pytest.raises(InvalidParameter):
        average_precision_at_k([A], {A}, 0, 1)


# -- MAP ---------------------------------------------------------------------

def test_map_is_mean_of_ap():
    recs = {1: [B, A], 2: [A]}
    result = map_at_k(recs, {1: {A}, 2: {A}}, 10)
    assert result.value == 0.75
    assert result.users_evaluated == 2
    assert result.distribution.mean == 0.75


def test_map_excludes_users_without_relevant_tracks():
    result = map_at_k({1: [A], 2: [A]}, {1: {A}, 2: set()}, 10)
    assert result.value == 1.0
    assert (result.users_evaluated, result.users_excluded) == (1, 1)


def test_map_user_without_list_scores_zero():
    result = map_at_k({}, {1: {A}, 2: {A}}, 5)
    assert result.value == 0.0
    assert result.users_evaluated == 2


def test_map_without_evaluable_users():
    with pytest.raises(NoEvaluableUsers):
        map_at_k({1: [A]}, {1: set()}, 10)


def test_map_with_fixed_denominators():
    result = map_at_k({1: [A]}, {1: {A}}, 10, denominators={1: 4})
    assert result.value == 0.25


@pytest.mark.parametrize("instance", range(100))
def test_map_matches_brute_force(instance):
    rng = np.random.default_rng(instance)
    n_users, n_items = int(rng.integers(1, 51)), int(rng.integers(1, 51))
    recs, relevance, denominators = {}, {}, {}
    for user in range(n_users):
        length = int(rng.integers(0, min(30, n_items) + 1))
        recs[user] = (rng.permutation(n_items)[:length] + 1).tolist()
        relevance[user] = set((np.flatnonzero(rng.random(n_items) < 0.2) + 1).tolist())
        denominators[user] = len(relevance[user]) + int(rng.integers(0, 3))
    k = int(rng.integers(1, 31))

    for user in recs:
        if relevance[user]:
            got = average_precision_at_k(recs[user], relevance[user], k, denominators[user])
            assert got == brute_force_ap(recs[user], relevance[user], k, denominators[user])

    evaluable = [user for user in sorted(recs) if relevance[user]]
    if not evaluable:
        with pytest.raises(NoEvaluableUsers):
            map_at_k(recs, relevance, k)
        return
    expected = sum(brute_force_ap(recs[u], relevance[u], k, len(relevance[u])) for u in evaluable) / len(evaluable)
    result = map_at_k(recs, relevance, k)
    assert result.value == expected
    assert result.users_excluded == n_users - len(evaluable)
    assert 0.0 <= result.value <= 1.0


@pytest.mark.parametrize("instance", range(50))
def test_prepending_a_relevant_track_never_lowers_map(instance):
    rng = np.random.default_rng(1000 + instance)
    n_items = int(rng.integers(5, 51))
    recs, relevance, boosted = {}, {}, {}
    for user in range(int(rng.integers(1, 31))):
        length = int(rng.integers(0, min(30, n_items) + 1))
        recs[user] = (rng.permutation(n_items)[:length] + 1).tolist()
        relevance[user] = set((np.flatnonzero(rng.random(n_items) < 0.3) + 1).tolist())
        unused = sorted(relevance[user] - set(recs[user]))
        boosted[user] = ([unused[0]] if unused else []) + recs[user]
    if not any(relevance.values()):
        return
    k = int(rng.integers(1, 31))
    assert map_at_k(boosted, relevance, k).value >= map_at_k(recs, relevance, k).value - 1e-12


# -- composition -------------------------------------------------------------

def test_composition_worked_example():
    hidden = summarize_interactions(make_log([(1, A, 100), (1, A, 100), (1, B, 5)]))
    report = composition_report({1: [A, B, C]}, hidden, 3)
    assert report.events == 2
    assert report.like_percent == 50.0
    assert report.dislike_percent == 50.0
    assert report.streams_percent == 50.0
    assert report.skips_percent == 50.0


def test_composition_respects_k():
    hidden = summarize_interactions(make_log([(1, A, 100), (1, A, 100), (1, B, 5)]))
    report = composition_report({1: [C, A, B]}, hidden, 2)
    assert (report.events, report.like_count, report.dislike_count) == (1, 1, 0)


def test_composition_of_empty_lists():
    hidden = summarize_interactions(make_log([(1, A, 100)]))
    report = composition_report({1: []}, hidden, 10)
    assert report.events == 0
    assert report.like_percent is None
    assert report.streams_percent is None
