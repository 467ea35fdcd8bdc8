"""
Evaluation Service

Criterion-specific relevance sets from the hidden partition, average
precision at k, MAP at k and the composition of recommended lists.
"""
from __future__ import annotations

import logging
from typing import AbstractSet, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Union

import numpy as np

from replaygauge.core.errors import InvalidParameter, NoEvaluableUsers, ZeroDenominator
from replaygauge.schemas.evaluation import ApDistribution, CompositionReport, MapResult, RelevanceCriterion
from replaygauge.services.signals_service import SummaryTable

logger = logging.getLogger(__name__)

RelevanceSets = Dict[int, Set[int]]


def criterion_relevance(
    hidden_summary: SummaryTable,
    criterion: Union[str, RelevanceCriterion],
    visible_tracks: Optional[Mapping[int, AbstractSet[int]]] = None,
    users: Optional[Iterable[int]] = None,
) -> RelevanceSets:
    """
    Per user, the hidden tracks satisfying ``criterion``.  Tracks the user
    already has in ``visible_tracks`` are left out.  Every user in ``users``
    gets an entry, possibly empty.
    """
    criterion = RelevanceCriterion(criterion)
    frame = hidden_summary.frame
    if criterion is RelevanceCriterion.EVENTS:
        mask = frame["plays"].to_numpy() > 0
    elif criterion is RelevanceCriterion.STREAMS:
        mask = frame["streams"].to_numpy() >= 1
    elif criterion is RelevanceCriterion.LIKES:
        mask = frame["like"].to_numpy(dtype=bool)
    elif criterion is RelevanceCriterion.SKIPS:
        mask = frame["skips"].to_numpy() >= 1
    else:
        mask = frame["dislike"].to_numpy(dtype=bool)

    relevance: RelevanceSets = {int(user): set() for user in (users or [])}
    for user, track in zip(frame["user"].to_numpy()[mask].tolist(), frame["track"].to_numpy()[mask].tolist()):
        relevance.setdefault(user, set()).add(track)
    if visible_tracks:
        for user, tracks in relevance.items():
            tracks -= visible_tracks.get(user, set())
    return relevance


def average_precision_at_k(
    recs: Sequence[int],
    relevant: AbstractSet[int],
    k: int,
    denominator: int,
) -> float:
    """Sum of precision@m at every relevant position m <= k, over ``denominator``."""
    if denominator < 1:
        raise ZeroDenominator("average precision needs a positive denominator")
    if k < 1:
        raise InvalidParameter(f"k must be >= 1, got {k}")
    hits, total = 0, 0.0
    for m, track in enumerate(recs[:k], start=1):
        if track in relevant:
            hits += 1
            total += hits / m
    return total / denominator


def ap_distribution(values: Sequence[float]) -> ApDistribution:
    array = np.asarray(values, dtype=np.float64)
    q25, median, q75 = np.quantile(array, [0.25, 0.5, 0.75])
    return ApDistribution(mean=float(array.mean()), median=float(median), q25=float(q25), q75=float(q75))


def map_at_k(
    per_user_recs: Mapping[int, Sequence[int]],
    relevance: RelevanceSets,
    k: int,
    denominators: Optional[Mapping[int, int]] = None,
) -> MapResult:
    """
    Mean AP over users with a non-empty relevance set; the others are
    counted as excluded.  ``denominators`` overrides the per-user AP
    denominator (default: the size of the user's relevance set).
    """
    if k < 1:
        raise InvalidParameter(f"k must be >= 1, got {k}")
    values: List[float] = []
    excluded = 0
    for user in sorted(set(per_user_recs) | set(relevance)):
        relevant = relevance.get(user, set())
        if not relevant:
            excluded += 1
            continue
        denominator = denominators.get(user, len(relevant)) if denominators else len(relevant)
        values.append(average_precision_at_k(per_user_recs.get(user, []), relevant, k, denominator))
    if not values:
        raise NoEvaluableUsers(f"no user has a non-empty relevance set at k={k}")
    return MapResult(
        value=sum(values) / len(values),
        users_evaluated=len(values),
        users_excluded=excluded,
        distribution=ap_distribution(values),
    )


def composition_report(
    per_user_recs: Mapping[int, Sequence[int]],
    hidden_summary: SummaryTable,
    k: int,
) -> CompositionReport:
    """
    Over the top-k tracks each user had hidden interactions with: share with a
    stream, with a skip, liked and disliked.  Percentages are None when no
    recommended track was interacted with.
    """
    if k < 1:
        raise InvalidParameter(f"k must be >= 1, got {k}")
    frame = hidden_summary.frame
    flags = dict(zip(
        zip(frame["user"].tolist(), frame["track"].tolist()),
        zip(
            (frame["streams"] >= 1).tolist(),
            (frame["skips"] >= 1).tolist(),
            frame["like"].tolist(),
            frame["dislike"].tolist(),
        ),
    ))
    events = streams = skips = likes = dislikes = 0
    for user in sorted(per_user_recs):
        for track in per_user_recs[user][:k]:
            pair = flags.get((user, track))
            if pair is None:
                continue
            events += 1
            streams += pair[0]
            skips += pair[1]
            likes += pair[2]
            dislikes += pair[3]

    def percent(count: int) -> Optional[float]:
        return 100.0 * count / events if events else None

    return CompositionReport(
        k=k,
        events=events,
        stream_count=streams,
        like_count=likes,
        skip_count=skips,
        dislike_count=dislikes,
        streams_percent=percent(streams),
        like_percent=percent(likes),
        skips_percent=percent(skips),
        dislike_percent=percent(dislikes),
    )
