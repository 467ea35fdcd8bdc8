"""
Dataset Statistics Service

Distribution figures of an event log and its summary table: duration
buckets, replay buckets, stream / skip shares over events, like / dislike
shares over unique pairs, and rating histograms per mapping function.
"""
from __future__ import annotations

import logging
from typing import Iterable, Sequence

import numpy as np

from replaygauge.core.errors import InconsistentInputs
from replaygauge.schemas.signals import (
    DatasetOverview,
    DurationBucket,
    RatingFunction,
    RatingHistogram,
    ReplayBucket,
    ShareFigure,
    StatsReport,
)
from replaygauge.services.eventlog_service import EventLog
from replaygauge.services.signals_service import (
    SKIP_THRESHOLD_SECONDS,
    SummaryTable,
    rating_values,
)

logger = logging.getLogger(__name__)

DURATION_THRESHOLDS = (5, 30, 60, 120)
REPLAY_THRESHOLDS = (2, 5, 10)
RATING_VALUES = (1, 2, 3, 4, 5)


def _share(count: int, total: int) -> float:
    return count / total if total else 0.0


def rating_histogram(table: SummaryTable, function: RatingFunction) -> RatingHistogram:
    ratings = rating_values(table.frame, function)
    counts = {value: int(np.count_nonzero(ratings == value)) for value in RATING_VALUES}
    return RatingHistogram(
        function=function,
        counts=counts,
        shares={value: _share(count, len(table)) for value, count in counts.items()},
    )


def dataset_stats(
    log: EventLog,
    table: SummaryTable,
    functions: Sequence[RatingFunction] = (RatingFunction.F1, RatingFunction.F2, RatingFunction.F3),
) -> StatsReport:
    """
    Statistics report of ``log``.  ``table`` must be the summary of the same
    log; a mismatch in pair or event counts raises ``InconsistentInputs``.
    """
    frame = log.frame
    pair_count = int(frame.groupby(["user", "track"]).ngroups) if len(log) else 0
    if pair_count != len(table):
        raise InconsistentInputs(
            f"summary table has {len(table)} pairs but the log has {pair_count}"
        )
    if int(table.frame["plays"].sum()) != len(log):
        raise InconsistentInputs("summary play counts do not add up to the log's event count")

    events = len(log)
    durations = frame["duration"].to_numpy()
    plays = table.frame["plays"].to_numpy()
    skips = int(np.count_nonzero(durations < SKIP_THRESHOLD_SECONDS))
    likes = int(table.frame["like"].sum())
    dislikes = int(table.frame["dislike"].sum())

    report = StatsReport(
        event_count=events,
        unique_pair_count=pair_count,
        user_count=len(log.users),
        track_count=len(log.tracks),
        mean_duration=float(durations.mean()) if events else None,
        median_duration=float(np.median(durations)) if events else None,
        duration_buckets=[
            DurationBucket(
                threshold_seconds=threshold,
                count=int(np.count_nonzero(durations < threshold)),
                share=_share(int(np.count_nonzero(durations < threshold)), events),
            )
            for threshold in DURATION_THRESHOLDS
        ],
        replay_buckets=[
            ReplayBucket(
                min_plays=threshold,
                count=int(np.count_nonzero(plays >= threshold)),
                share=_share(int(np.count_nonzero(plays >= threshold)), pair_count),
            )
            for threshold in REPLAY_THRESHOLDS
        ],
        stream_share=ShareFigure(count=events - skips, share=_share(events - skips, events), denominator="events"),
        skip_share=ShareFigure(count=skips, share=_share(skips, events), denominator="events"),
        like_share=ShareFigure(count=likes, share=_share(likes, pair_count), denominator="pairs"),
        dislike_share=ShareFigure(count=dislikes, share=_share(dislikes, pair_count), denominator="pairs"),
        rating_histograms=[rating_histogram(table, RatingFunction(f)) for f in functions],
    )
    logger.info(
        "stats: %d events, %d pairs, skip share %.3f",
        events, pair_count, report.skip_share.share,
    )
    return report


def dataset_overview(name: str, log: EventLog) -> DatasetOverview:
    pairs = int(log.frame.groupby(["user", "track"]).ngroups) if len(log) else 0
    return DatasetOverview(
        name=name,
        track_count=len(log.tracks),
        user_count=len(log.users),
        event_count=len(log),
        unique_pair_count=pairs,
    )


def overview_rows(parts: Iterable[tuple]) -> list:
    """``[(name, log), ...]`` -> one ``DatasetOverview`` per named part."""
    return [dataset_overview(name, log) for name, log in parts]
