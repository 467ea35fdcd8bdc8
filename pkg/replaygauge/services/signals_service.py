"""
Signals Service

Reduces raw listening events to per-(user, track) interaction summaries and
derives everything the recommenders consume from them:

* skips (duration < 30 s) and streams (duration >= 30 s);
* implicit like (>= 2 streams, no skip) and dislike (>= 1 skip, no stream);
* the three rating functions f1, f2, f3 mapping counts to 1..5;
* binary / count training matrices for the recommenders.

Scalar helpers operate on one ``InteractionSummary``; the table-level
functions are vectorised over the summary frame and must agree with them.
"""
from __future__ import annotations

import logging
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp

from replaygauge.core.artifacts import require_file, write_frame
from replaygauge.core.errors import ArtifactError, UnknownFunction, UnknownMode
from replaygauge.schemas.signals import (
    InputMode,
    InteractionSummary,
    RatingFunction,
    RatingTriple,
)
from replaygauge.services.eventlog_service import EventLog

logger = logging.getLogger(__name__)

SKIP_THRESHOLD_SECONDS = 30

SUMMARY_COLUMNS = ("user", "track", "plays", "skips", "streams", "like", "dislike")
RATING_COLUMNS = ("user", "track", "rating")


# ---------------------------------------------------------------------------
# Scalar definitions
# ---------------------------------------------------------------------------

def is_skip(duration: int) -> bool:
    return duration < SKIP_THRESHOLD_SECONDS


def derive_like(summary: InteractionSummary) -> bool:
    return summary.stream_count >= 2 and summary.skip_count == 0


def derive_dislike(summary: InteractionSummary) -> bool:
    return summary.skip_count >= 1 and summary.stream_count == 0


def rating_f1(summary: InteractionSummary) -> int:
    """Streams only: 0 -> 1, 1 -> 2, 2 -> 3, 3 -> 4, 4+ -> 5."""
    return min(summary.stream_count, 4) + 1


def rating_f2(summary: InteractionSummary) -> int:
    if summary.like:
        return 5
    if summary.dislike:
        return 1
    return 3


def rating_f3(summary: InteractionSummary) -> int:
    """Streams against skips; first matching branch wins."""
    streams, skips = summary.stream_count, summary.skip_count
    if streams >= 4 and skips < streams:
        return 5
    if streams >= 2 and skips < streams:
        return 4
    if skips < streams:
        return 3
    if streams > 0:
        return 2
    return 1


RATING_FUNCTIONS = {
    RatingFunction.F1: rating_f1,
    RatingFunction.F2: rating_f2,
    RatingFunction.F3: rating_f3,
}


def resolve_rating_function(function_id: Union[str, RatingFunction]) -> RatingFunction:
    try:
        return RatingFunction(function_id)
    except ValueError:
        raise UnknownFunction(f"Unknown rating function: {function_id!r}")


def resolve_input_mode(mode: Union[str, InputMode]) -> InputMode:
    try:
        return InputMode(mode)
    except ValueError:
        raise UnknownMode(f"Unknown training input mode: {mode!r}")


# ---------------------------------------------------------------------------
# Vectorised definitions
# ---------------------------------------------------------------------------

def like_mask(streams: np.ndarray, skips: np.ndarray) -> np.ndarray:
    return (streams >= 2) & (skips == 0)


def dislike_mask(streams: np.ndarray, skips: np.ndarray) -> np.ndarray:
    return (skips >= 1) & (streams == 0)


def rating_values(frame: pd.DataFrame, function_id: Union[str, RatingFunction]) -> np.ndarray:
    """Ratings for every row of a summary frame."""
    function = resolve_rating_function(function_id)
    streams = frame["streams"].to_numpy(dtype=np.int64)
    skips = frame["skips"].to_numpy(dtype=np.int64)

    if function is RatingFunction.F1:
        return np.minimum(streams, 4) + 1
    if function is RatingFunction.F2:
        return np.select(
            [frame["like"].to_numpy(dtype=bool), frame["dislike"].to_numpy(dtype=bool)],
            [5, 1],
            default=3,
        ).astype(np.int64)
    more_streams = skips < streams
    return np.select(
        [(streams >= 4) & more_streams, (streams >= 2) & more_streams, more_streams, streams > 0],
        [5, 4, 3, 2],
        default=1,
    ).astype(np.int64)


# ---------------------------------------------------------------------------
# SummaryTable
# ---------------------------------------------------------------------------

def _empty_summary_frame() -> pd.DataFrame:
    frame = pd.DataFrame({column: np.empty(0, dtype=np.int64) for column in SUMMARY_COLUMNS[:5]})
    frame["like"] = np.empty(0, dtype=bool)
    frame["dislike"] = np.empty(0, dtype=bool)
    return frame


class SummaryTable:
    """
    One row per unique (user, track) pair, sorted by (user, track).

    Frame columns: ``user, track, plays, skips, streams`` (int64) and
    ``like, dislike`` (bool).
    """

    def __init__(self, frame: Optional[pd.DataFrame] = None):
        if frame is None:
            frame = _empty_summary_frame()
        frame = frame.loc[:, list(SUMMARY_COLUMNS)].copy()
        for column in SUMMARY_COLUMNS[:5]:
            frame[column] = frame[column].astype("int64")
        for column in ("like", "dislike"):
            frame[column] = frame[column].astype(bool)
        self._frame = frame.sort_values(["user", "track"], kind="mergesort").reset_index(drop=True)

    @classmethod
    def from_summaries(cls, summaries: Iterable[InteractionSummary]) -> "SummaryTable":
        rows = [
            (s.user, s.track, s.total_plays, s.skip_count, s.stream_count, s.like, s.dislike)
            for s in summaries
        ]
        if not rows:
            return cls()
        return cls(pd.DataFrame(rows, columns=list(SUMMARY_COLUMNS)))

    @property
    def frame(self) -> pd.DataFrame:
        return self._frame

    def __len__(self) -> int:
        return len(self._frame)

    def __iter__(self) -> Iterator[InteractionSummary]:
        for row in self._frame.itertuples(index=False, name=None):
            yield self._summary(row)

    def __repr__(self) -> str:
        return f"SummaryTable(pairs={len(self)})"

    @staticmethod
    def _summary(row: Tuple) -> InteractionSummary:
        user, track, plays, skips, streams, like, dislike = row
        return InteractionSummary(
            user=int(user),
            track=int(track),
            total_plays=int(plays),
            skip_count=int(skips),
            stream_count=int(streams),
            like=bool(like),
            dislike=bool(dislike),
        )

    @cached_property
    def _positions(self) -> Dict[Tuple[int, int], int]:
        keys = zip(self._frame["user"].tolist(), self._frame["track"].tolist())
        return {key: position for position, key in enumerate(keys)}

    def get(self, user: int, track: int) -> Optional[InteractionSummary]:
        position = self._positions.get((int(user), int(track)))
        if position is None:
            return None
        return self._summary(tuple(self._frame.iloc[position]))

    def __contains__(self, pair: Tuple[int, int]) -> bool:
        return (int(pair[0]), int(pair[1])) in self._positions

    @property
    def users(self) -> np.ndarray:
        return np.unique(self._frame["user"].to_numpy())

    @property
    def tracks(self) -> np.ndarray:
        return np.unique(self._frame["track"].to_numpy())

    def for_user(self, user: int) -> "SummaryTable":
        return SummaryTable(self._frame.loc[self._frame["user"] == int(user)])

    def to_csv(self, path: Union[str, Path, None] = None) -> Optional[str]:
        frame = self._frame.astype({"like": "int64", "dislike": "int64"})
        if path is None:
            return frame.to_csv(index=False, lineterminator="\n")
        write_frame(frame, path)
        return None

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "SummaryTable":
        frame = pd.read_csv(require_file(path))
        if list(frame.columns) != list(SUMMARY_COLUMNS):
            raise ArtifactError(f"{path}: expected columns {','.join(SUMMARY_COLUMNS)}")
        return cls(frame)


def summarize_interactions(log: EventLog) -> SummaryTable:
    """Aggregate an event log into one summary per unique (user, track)."""
    if len(log) == 0:
        return SummaryTable()

    frame = log.frame
    skip = frame["duration"].to_numpy() < SKIP_THRESHOLD_SECONDS
    counts = (
        frame.loc[:, ["user", "track"]]
        .assign(skips=skip.astype(np.int64), streams=(~skip).astype(np.int64))
        .groupby(["user", "track"], sort=True)
        .agg(plays=("skips", "size"), skips=("skips", "sum"), streams=("streams", "sum"))
        .reset_index()
    )
    streams = counts["streams"].to_numpy()
    skips = counts["skips"].to_numpy()
    counts["like"] = like_mask(streams, skips)
    counts["dislike"] = dislike_mask(streams, skips)

    table = SummaryTable(counts)
    logger.debug("summarised %d events into %d pairs", len(log), len(table))
    return table


# ---------------------------------------------------------------------------
# Ratings
# ---------------------------------------------------------------------------

def rating_frame(table: SummaryTable, function_id: Union[str, RatingFunction]) -> pd.DataFrame:
    """``user, track, rating`` rows sorted by (user, track)."""
    ratings = rating_values(table.frame, function_id)
    return pd.DataFrame({
        "user": table.frame["user"].to_numpy(),
        "track": table.frame["track"].to_numpy(),
        "rating": ratings,
    })


def map_ratings(table: SummaryTable, function_id: Union[str, RatingFunction]) -> List[RatingTriple]:
    frame = rating_frame(table, function_id)
    return [
        RatingTriple(user=user, track=track, rating=rating)
        for user, track, rating in frame.itertuples(index=False, name=None)
    ]


def write_ratings(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    return write_frame(frame.loc[:, list(RATING_COLUMNS)], path)


def read_ratings(path: Union[str, Path]) -> pd.DataFrame:
    frame = pd.read_csv(require_file(path), dtype="int64")
    if list(frame.columns) != list(RATING_COLUMNS):
        raise ArtifactError(f"{path}: expected columns {','.join(RATING_COLUMNS)}")
    return frame


# ---------------------------------------------------------------------------
# Training input
# ---------------------------------------------------------------------------

class InteractionMatrix:
    """
    Sparse user x track matrix with id <-> position maps.

    Rows and columns follow ascending id order.  Rows may be empty; stored
    values are never zero.
    """

    def __init__(self, user_ids: np.ndarray, track_ids: np.ndarray, matrix: sp.csr_matrix, binary: bool):
        self.user_ids = np.asarray(user_ids, dtype=np.int64)
        self.track_ids = np.asarray(track_ids, dtype=np.int64)
        self.matrix = matrix.tocsr()
        self.matrix.eliminate_zeros()
        self.matrix.sort_indices()
        self.binary = binary
        self.user_pos: Dict[int, int] = {int(user): pos for pos, user in enumerate(self.user_ids)}
        self.track_pos: Dict[int, int] = {int(track): pos for pos, track in enumerate(self.track_ids)}

    @classmethod
    def from_entries(
        cls,
        users: np.ndarray,
        tracks: np.ndarray,
        values: np.ndarray,
        binary: bool,
        user_ids: Optional[np.ndarray] = None,
        track_ids: Optional[np.ndarray] = None,
    ) -> "InteractionMatrix":
        users = np.asarray(users, dtype=np.int64)
        tracks = np.asarray(tracks, dtype=np.int64)
        user_ids = np.unique(users) if user_ids is None else np.unique(user_ids)
        track_ids = np.unique(tracks) if track_ids is None else np.unique(track_ids)
        rows = np.searchsorted(user_ids, users)
        cols = np.searchsorted(track_ids, tracks)
        matrix = sp.csr_matrix(
            (np.asarray(values, dtype=np.float64), (rows, cols)),
            shape=(len(user_ids), len(track_ids)),
        )
        return cls(user_ids, track_ids, matrix, binary)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def user_tracks(self, user: int) -> np.ndarray:
        """Track ids with a stored value for ``user`` (empty if unknown)."""
        position = self.user_pos.get(int(user))
        if position is None:
            return np.empty(0, dtype=np.int64)
        start, end = self.matrix.indptr[position], self.matrix.indptr[position + 1]
        return self.track_ids[self.matrix.indices[start:end]]

    def value(self, user: int, track: int) -> float:
        row, col = self.user_pos.get(int(user)), self.track_pos.get(int(track))
        if row is None or col is None:
            return 0.0
        return float(self.matrix[row, col])

    def __repr__(self) -> str:
        kind = "binary" if self.binary else "counts"
        return f"InteractionMatrix({self.shape[0]}x{self.shape[1]}, nnz={self.nnz}, {kind})"


def build_training_input(table: SummaryTable, mode: Union[str, InputMode]) -> InteractionMatrix:
    """
    Training matrix for one input mode.  Every user and track of the table
    gets a row / column, so users whose pairs are all filtered out keep an
    empty row.

    all_events   1 for every pair
    streams      1 iff the pair has a stream
    likes        1 iff the pair is liked
    play_counts  stream count P(u,i)
    total_counts event count p(u,i)
    """
    mode = resolve_input_mode(mode)
    frame = table.frame
    streams = frame["streams"].to_numpy(dtype=np.int64)

    if mode is InputMode.ALL_EVENTS:
        keep, values, binary = np.ones(len(frame), dtype=bool), np.ones(len(frame)), True
    elif mode is InputMode.STREAMS:
        keep, values, binary = streams >= 1, np.ones(len(frame)), True
    elif mode is InputMode.LIKES:
        keep, values, binary = frame["like"].to_numpy(dtype=bool), np.ones(len(frame)), True
    elif mode is InputMode.PLAY_COUNTS:
        keep, values, binary = streams > 0, streams.astype(np.float64), False
    else:
        plays = frame["plays"].to_numpy(dtype=np.int64)
        keep, values, binary = plays > 0, plays.astype(np.float64), False

    matrix = InteractionMatrix.from_entries(
        frame["user"].to_numpy()[keep],
        frame["track"].to_numpy()[keep],
        values[keep],
        binary=binary,
        user_ids=table.users,
        track_ids=table.tracks,
    )
    logger.debug("training input %s: %r", mode.value, matrix)
    return matrix
