"""
Post-filtering of recommendation lists with estimated ratings and predicted
dislikes:

    rank  reorder by estimated rating (stable)
    del   drop predicted dislikes
    swap  replace each predicted dislike with the first later track that is
          not disliked and scores at least alpha; drop it if none qualifies
"""
from __future__ import annotations

import logging
import math
from typing import Optional, Union

import numpy as np

from replaygauge.core.errors import InvalidParameter
from replaygauge.schemas.classify import GnbModel
from replaygauge.schemas.recommendations import (
    FilterKind,
    RecommendationList,
    ScoredEntry,
    ScoredList,
)
from replaygauge.services.classifier_service import classify_scores
from replaygauge.services.factorization_service import FactorModel, predict_many

logger = logging.getLogger(__name__)


def rank_filter(scored: ScoredList) -> ScoredList:
    entries = sorted(scored.entries, key=lambda entry: -entry.score)
    return ScoredList(user=scored.user, entries=entries)


def del_filter(scored: ScoredList) -> ScoredList:
    return ScoredList(user=scored.user, entries=[e for e in scored.entries if not e.dislike])


def swap_filter(scored: ScoredList, alpha: float) -> ScoredList:
    if math.isnan(alpha):
        raise InvalidParameter("alpha must be a number")
    entries = scored.entries
    # positions that may serve as replacements, in list order
    candidates = [
        position for position, entry in enumerate(entries)
        if not entry.dislike and entry.score >= alpha
    ]
    consumed = set()
    cursor = 0
    out = []
    for position, entry in enumerate(entries):
        if not entry.dislike:
            if position not in consumed:
                out.append(entry)
            continue
        while cursor < len(candidates) and (
            candidates[cursor] <= position or candidates[cursor] in consumed
        ):
            cursor += 1
        if cursor < len(candidates):
            consumed.add(candidates[cursor])
            out.append(entries[candidates[cursor]])
            cursor += 1
    return ScoredList(user=scored.user, entries=out)


def apply_filter(
    scored: ScoredList,
    kind: Union[str, FilterKind],
    alpha: Optional[float] = None,
) -> ScoredList:
    kind = FilterKind(kind)
    if kind is FilterKind.NONE:
        return scored
    if kind is FilterKind.RANK:
        return rank_filter(scored)
    if kind is FilterKind.DEL:
        return del_filter(scored)
    if alpha is None:
        raise InvalidParameter("the swap filter needs an alpha threshold")
    return swap_filter(scored, alpha)


def score_list(
    model: FactorModel,
    classifier: GnbModel,
    recommendations: RecommendationList,
) -> ScoredList:
    """Attach r~(u,i) and the predicted dislike flag to every recommended track."""
    tracks = np.array(recommendations.tracks, dtype=np.int64)
    scores = predict_many(model, np.full(len(tracks), recommendations.user, dtype=np.int64), tracks)
    dislike, _ = classify_scores(classifier, scores)
    return ScoredList(
        user=recommendations.user,
        entries=[
            ScoredEntry(track=int(t), score=float(s), dislike=bool(d))
            for t, s, d in zip(tracks, scores, dislike)
        ],
    )


def to_recommendation_list(scored: ScoredList) -> RecommendationList:
    return RecommendationList(
        user=scored.user,
        items=[{"track": e.track, "score": e.score} for e in scored.entries],
    )
