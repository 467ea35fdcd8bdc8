import math

import numpy as np
import pytest

from replaygauge.core.errors import InvalidParameter
from replaygauge.schemas.classify import GnbModel
from replaygauge.schemas.models import SGDHyperparameters
from replaygauge.schemas.recommendations import FilterKind, RecommendationList, RecommendedItem, ScoredEntry, ScoredList
from replaygauge.services.classifier_service import classify_scores
from replaygauge.services.factorization_service import predict_rating, train_mf_sgd
from replaygauge.services.postfilter_service import (
    apply_filter,
    del_filter,
    rank_filter,
    score_list,
    swap_filter,
    to_recommendation_list,
)
from replaygauge.services.signals_service import rating_frame

A, B, C, D = 1, 2, 3, 4


def scored(*entries):
    return ScoredList(
        user=1,
        entries=[ScoredEntry(track=t, score=s, dislike=d) for t, s, d in entries],
    )


def random_list(rng, length=None):
    length = int(rng.integers(0, 30)) if length is None else length
    tracks = rng.permutation(1000)[:length] + 1
    return scored(*[
        (int(t), float(rng.integers(1, 6)), bool(rng.random() < 0.3))
        for t in tracks
    ])


def naive_swap(scored_list, alpha):
    entries = scored_list.entries
    consumed, out = set(), []
    for position, entry in enumerate(entries):
        if not entry.dislike:
            if entry.track not in consumed:
                out.append(entry)
            continue
        for later in entries[position + 1:]:
            if later.track not in consumed and not later.dislike and later.score >= alpha:
                consumed.add(later.track)
                out.append(later)
                break
    return out


# -- rank --------------------------------------------------------------------

def test_rank_orders_by_score():
    assert rank_filter(scored((A, 2.1, False), (B, 4.7, False), (C, 3.0, False))).tracks == [B, C, A]


def test_rank_is_stable():
    assert rank_filter(scored((C, 3.0, False), (A, 3.0, True), (B, 3.0, False))).tracks == [C, A, B]


def test_rank_empty():
    assert rank_filter(scored()).entries == []


# -- del ---------------------------------------------------------------------

def test_del_removes_predicted_dislikes():
    assert del_filter(scored((A, 3, False), (B, 3, True), (C, 3, False))).tracks == [A, C]


def test_del_identity_and_all_flagged():
    unflagged = scored((A, 3, False), (B, 1, False))
    assert del_filter(unflagged) == unflagged
    assert del_filter(scored((A, 3, True), (B, 1, True))).entries == []


# -- swap --------------------------------------------------------------------

def test_swap_replaces_with_first_qualifying_later_track():
    result = swap_filter(scored((A, 5, False), (B, 1, True), (C, 2, False), (D, 4, False)), alpha=3)
    assert result.tracks == [A, D, C]


def test_swap_drops_without_replacement():
    result = swap_filter(scored((A, 5, False), (B, 1, True), (C, 1, False)), alpha=3)
    assert result.tracks == [A, C]


def test_swap_identity_without_flags():
    unflagged = scored((A, 1, False), (B, 2, False), (C, 3, False))
    assert swap_filter(unflagged, alpha=2) == unflagged


def test_swap_needs_a_number():
    with pytest.raises(InvalidParameter):
        swap_filter(scored((A, 1, True)), alpha=math.nan)
    with pytest.raises(InvalidParameter):
        apply_filter(scored((A, 1, True)), FilterKind.SWAP)


def test_filter_algebra_on_random_lists():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        original = random_list(rng)
        alpha = float(rng.integers(1, 6))

        assert swap_filter(original, math.inf) == del_filter(original)

        ranked = rank_filter(original)
        assert sorted(ranked.tracks) == sorted(original.tracks)

        deleted = del_filter(original).entries
        assert not any(entry.dislike for entry in deleted)
        assert deleted == [entry for entry in original.entries if not entry.dislike]

        swapped = swap_filter(original, alpha)
        assert swapped.entries == naive_swap(original, alpha)
        assert len(set(swapped.tracks)) == len(swapped.tracks)
        assert not any(entry.dislike for entry in swapped.entries)


def test_rank_and_del_are_idempotent():
    rng = np.random.default_rng(1)
    for _ in range(500):
        original = random_list(rng)
        ranked = rank_filter(original)
        assert rank_filter(ranked) == ranked
        deleted = del_filter(original)
        assert del_filter(deleted) == deleted


def test_apply_filter_dispatch():
    original = scored((A, 1, False), (B, 5, True), (C, 4, False))
    assert apply_filter(original, "none") == original
    assert apply_filter(original, "rank").tracks == [B, C, A]
    assert apply_filter(original, "del").tracks == [A, C]
    assert apply_filter(original, "swap", alpha=4).tracks == [A, C]


# -- scoring -----------------------------------------------------------------

def test_score_list_attaches_estimates_and_flags(toy_table):
    model = train_mf_sgd(rating_frame(toy_table, "f3"), SGDHyperparameters(k=2, epochs=5))
    classifier = GnbModel(mu_like=4.0, var_like=0.5, mu_dislike=2.0, var_dislike=0.5, prior_like=0.5)
    recs = RecommendationList(user=1, items=[RecommendedItem(track=t, score=0.0) for t in (13, 10, 99)])
    result = score_list(model, classifier, recs)

    assert result.tracks == [13, 10, 99]
    scores = [predict_rating(model, 1, track) for track in (13, 10, 99)]
    assert [entry.score for entry in result.entries] == pytest.approx(scores)
    assert [entry.dislike for entry in result.entries] == classify_scores(classifier, scores)[0].tolist()
    assert to_recommendation_list(result).tracks == [13, 10, 99]
