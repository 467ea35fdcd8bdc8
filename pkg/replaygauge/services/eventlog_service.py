"""
Event Log Service

Ingests ``user,track,duration,timestamp`` logs and implements the evaluation
protocol on top of them:

* minimal-activity filtering of users;
* a seeded draw of two user groups, A (training only) and B;
* a per-user split of group B into visible / hidden halves.

All random draws come from generators keyed on ``(seed, user id, stream)``
so adding or removing one user never perturbs the draws of the others.
"""
from __future__ import annotations

import logging
import re
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, Iterator, Optional, TextIO, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from replaygauge.core.artifacts import read_meta, require_file, write_frame, write_meta
from replaygauge.core.errors import (
    ArtifactError,
    EmptyLog,
    InvalidParameter,
    MalformedRow,
    NegativeDuration,
    NegativeTimestamp,
)
from replaygauge.schemas.events import (
    EVENT_COLUMNS,
    EventLogFormat,
    ListeningEvent,
    SplitMeta,
    UserGroup,
)

logger = logging.getLogger(__name__)

SPLIT_STREAM = 0
GROUP_STREAM = 1

_UINT64_MASK = (1 << 64) - 1
_INTEGER_FIELD = r"[+-]?\d+"


def user_rng(seed: int, user: int, stream: int) -> np.random.Generator:
    """Deterministic generator for one user of one random stream."""
    return np.random.default_rng([seed & _UINT64_MASK, user & _UINT64_MASK, stream])


def as_fraction(value: Union[float, int, str, Fraction], name: str) -> Fraction:
    """Exact rational for a fraction parameter; rejects values outside (0, 1)."""
    if isinstance(value, Fraction):
        fraction = value
    elif isinstance(value, float):
        fraction = Fraction(repr(value))
    else:
        fraction = Fraction(value)
    if not 0 < fraction < 1:
        raise InvalidParameter(f"{name} must lie strictly between 0 and 1, got {value}")
    return fraction


# ---------------------------------------------------------------------------
# EventLog container
# ---------------------------------------------------------------------------

class EventLog:
    """
    Immutable multiset of listening events.

    Backed by a pandas frame with int64 columns ``user, track, duration,
    timestamp``; iteration follows row order.  The frame returned by
    ``frame`` must be treated as read-only.
    """

    def __init__(self, frame: Optional[pd.DataFrame] = None):
        if frame is None:
            frame = pd.DataFrame({column: np.empty(0, dtype=np.int64) for column in EVENT_COLUMNS})
        self._frame = frame.loc[:, list(EVENT_COLUMNS)].astype("int64").reset_index(drop=True)

    @classmethod
    def from_arrays(cls, user, track, duration, timestamp) -> "EventLog":
        return cls(pd.DataFrame({
            "user": np.asarray(user, dtype=np.int64),
            "track": np.asarray(track, dtype=np.int64),
            "duration": np.asarray(duration, dtype=np.int64),
            "timestamp": np.asarray(timestamp, dtype=np.int64),
        }))

    @classmethod
    def concat(cls, logs: Iterable["EventLog"]) -> "EventLog":
        frames = [log.frame for log in logs]
        if not frames:
            return cls()
        return cls(pd.concat(frames, ignore_index=True))

    @property
    def frame(self) -> pd.DataFrame:
        return self._frame

    def __len__(self) -> int:
        return len(self._frame)

    def __iter__(self) -> Iterator[ListeningEvent]:
        for user, track, duration, timestamp in self._frame.itertuples(index=False, name=None):
            yield ListeningEvent(user=user, track=track, duration=duration, timestamp=timestamp)

    def __repr__(self) -> str:
        return f"EventLog(events={len(self)}, users={len(self.users)}, tracks={len(self.tracks)})"

    @cached_property
    def user_index(self) -> Dict[int, np.ndarray]:
        """user -> row positions of that user's events, in row order."""
        return {int(user): positions for user, positions in self._frame.groupby("user", sort=True).indices.items()}

    @cached_property
    def track_index(self) -> Dict[int, np.ndarray]:
        return {int(track): positions for track, positions in self._frame.groupby("track", sort=True).indices.items()}

    @property
    def users(self) -> np.ndarray:
        return np.unique(self._frame["user"].to_numpy())

    @property
    def tracks(self) -> np.ndarray:
        return np.unique(self._frame["track"].to_numpy())

    def user_event_counts(self) -> pd.Series:
        return self._frame.groupby("user", sort=True).size()

    def take(self, positions: np.ndarray) -> "EventLog":
        return EventLog(self._frame.iloc[np.asarray(positions, dtype=np.int64)])

    def select(self, mask: np.ndarray) -> "EventLog":
        return EventLog(self._frame.loc[np.asarray(mask, dtype=bool)])

    def restrict_users(self, users: Iterable[int]) -> "EventLog":
        return self.select(self._frame["user"].isin(list(users)).to_numpy())

    def events_for_user(self, user: int) -> "EventLog":
        positions = self.user_index.get(int(user))
        if positions is None:
            return EventLog()
        return self.take(positions)

    def tracks_by_user(self) -> Dict[int, set]:
        return {
            int(user): set(group.tolist())
            for user, group in self._frame.groupby("user", sort=True)["track"]
        }

    def same_events(self, other: "EventLog") -> bool:
        """Multiset equality, ignoring row order."""
        if len(self) != len(other):
            return False
        columns = list(EVENT_COLUMNS)
        mine = self._frame.sort_values(columns, kind="mergesort").to_numpy()
        theirs = other.frame.sort_values(columns, kind="mergesort").to_numpy()
        return bool(np.array_equal(mine, theirs))

    def to_csv(self, path_or_buf: Union[str, Path, TextIO, None] = None) -> Optional[str]:
        if path_or_buf is None or not isinstance(path_or_buf, (str, Path)):
            return self._frame.to_csv(path_or_buf, index=False, lineterminator="\n")
        write_frame(self._frame, path_or_buf)
        return None


class DatasetSplit(BaseModel):
    """Visible / hidden halves of the group-B events."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    visible:          EventLog
    hidden:           EventLog
    seed:             int
    holdout_fraction: float


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def parse_event_log(
    source: Union[str, Path, TextIO],
    fmt: Optional[EventLogFormat] = None,
) -> EventLog:
    """
    Parse an event CSV.  ``source`` is a filesystem path or an open text
    stream.  Errors carry the 1-based line number of the offending row
    (the header is line 1).
    """
    fmt = fmt or EventLogFormat()
    read_kwargs = dict(
        sep=fmt.delimiter,
        dtype=str,
        keep_default_na=False,
        na_filter=False,
        skip_blank_lines=False,
    )
    if isinstance(source, (str, Path)):
        source = require_file(source)
        read_kwargs["encoding"] = "utf-8-sig"

    try:
        raw = pd.read_csv(source, header=None, **read_kwargs)
    except pd.errors.EmptyDataError:
        raise MalformedRow("missing header", line=1)
    except pd.errors.ParserError as exc:
        match = re.search(r"line (\d+)", str(exc))
        raise MalformedRow(
            f"wrong column count: {exc}",
            line=int(match.group(1)) if match else None,
        ) from exc

    header = ["" if pd.isna(cell) else str(cell).strip() for cell in raw.iloc[0]]
    if header != list(fmt.columns):
        raise MalformedRow(
            f"expected header {','.join(fmt.columns)}, found {','.join(header)}",
            line=1,
        )
    raw = raw.iloc[1:].reset_index(drop=True)
    raw.columns = list(EVENT_COLUMNS)

    text = raw.apply(lambda column: column.astype("string").str.strip())
    blank = text.apply(lambda column: column.isna() | (column == "")).all(axis=1).to_numpy()
    lines = np.arange(len(text)) + 2
    text = text.loc[~blank]
    lines = lines[~blank]

    valid = text.apply(lambda column: column.str.fullmatch(_INTEGER_FIELD).fillna(False).astype(bool))
    bad = ~valid.all(axis=1).to_numpy()
    if bad.any():
        first = int(np.flatnonzero(bad)[0])
        fields = [column for column in EVENT_COLUMNS if not valid.iloc[first][column]]
        raise MalformedRow(f"non-integer or missing field(s): {', '.join(fields)}", line=int(lines[first]))

    low, high = int(np.iinfo(np.int64).min), int(np.iinfo(np.int64).max)
    parsed = {column: [int(field) for field in text[column].tolist()] for column in EVENT_COLUMNS}
    for position in range(len(lines)):
        for column in EVENT_COLUMNS:
            number = parsed[column][position]
            if not low <= number <= high:
                raise MalformedRow(f"{column} {number} outside the 64-bit range", line=int(lines[position]))
    values = pd.DataFrame({column: np.array(parsed[column], dtype=np.int64) for column in EVENT_COLUMNS})

    for column, error in (("duration", NegativeDuration), ("timestamp", NegativeTimestamp)):
        negative = (values[column] < 0).to_numpy()
        if negative.any():
            first = int(np.flatnonzero(negative)[0])
            raise error(f"negative {column} {int(values[column].iloc[first])}", line=int(lines[first]))

    log = EventLog(values)
    logger.info("parsed %d events (%d users, %d tracks)", len(log), len(log.users), len(log.tracks))
    return log


# ---------------------------------------------------------------------------
# Filtering and splitting
# ---------------------------------------------------------------------------

def filter_min_activity(log: EventLog, min_events: int) -> EventLog:
    """Keep only users with at least ``min_events`` events."""
    if min_events < 1:
        raise InvalidParameter(f"min_events must be >= 1, got {min_events}")
    if min_events == 1:
        return log
    counts = log.frame.groupby("user")["user"].transform("size").to_numpy()
    kept = log.select(counts >= min_events)
    logger.info(
        "min activity %d: kept %d of %d users",
        min_events, len(kept.users), len(log.users),
    )
    return kept


def split_dataset(
    log: EventLog,
    seed: int,
    holdout_fraction: Union[float, Fraction, str] = 0.5,
) -> DatasetSplit:
    """
    Split every user's events into visible and hidden halves.

    With ``n`` events a user sends ``floor(n * holdout_fraction)`` of them,
    chosen by a shuffle keyed on ``(seed, user)``, to the hidden half.  Users
    with fewer than two events stay wholly visible.
    """
    fraction = as_fraction(holdout_fraction, "holdout_fraction")
    if len(log) == 0:
        raise EmptyLog("cannot split an empty event log")

    hidden_mask = np.zeros(len(log), dtype=bool)
    for user, positions in log.user_index.items():
        n = len(positions)
        if n < 2:
            continue
        n_hidden = (n * fraction.numerator) // fraction.denominator
        if n_hidden == 0:
            continue
        order = user_rng(seed, user, SPLIT_STREAM).permutation(n)
        hidden_mask[positions[order[:n_hidden]]] = True

    split = DatasetSplit(
        visible=log.select(~hidden_mask),
        hidden=log.select(hidden_mask),
        seed=seed,
        holdout_fraction=float(fraction),
    )
    logger.info("split %d events: %d visible, %d hidden", len(log), len(split.visible), len(split.hidden))
    return split


def select_user_groups(
    log: EventLog,
    seed: int,
    group_b_fraction: Union[float, Fraction, str],
) -> Tuple[EventLog, EventLog]:
    """
    Assign users to group A or B.  ``floor(|U| * group_b_fraction)`` users
    with the smallest seeded draws (ties by user id) form group B, at least
    one when there are two or more users.
    """
    fraction = as_fraction(group_b_fraction, "group_b_fraction")
    if len(log) == 0:
        raise EmptyLog("cannot select user groups from an empty event log")

    users = log.users
    n_b = (len(users) * fraction.numerator) // fraction.denominator
    if n_b == 0 and len(users) >= 2:
        n_b = 1

    draws = np.array([user_rng(seed, int(user), GROUP_STREAM).random() for user in users])
    order = np.lexsort((users, draws))
    b_users = users[order[:n_b]]

    in_b = log.frame["user"].isin(b_users).to_numpy()
    group_a, group_b = log.select(~in_b), log.select(in_b)
    logger.info("user groups: %d in A, %d in B", len(users) - n_b, n_b)
    return group_a, group_b


def group_manifest(group_a: EventLog, group_b: EventLog) -> pd.DataFrame:
    manifest = pd.DataFrame({
        "user": np.concatenate([group_a.users, group_b.users]).astype(np.int64),
        "group": [UserGroup.A.value] * len(group_a.users) + [UserGroup.B.value] * len(group_b.users),
    })
    return manifest.sort_values("user", kind="mergesort").reset_index(drop=True)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

SPLIT_FILES = {
    "group_a": "group_a.csv",
    "visible": "visible.csv",
    "hidden": "hidden.csv",
    "manifest": "manifest.csv",
    "meta": "split.meta",
}


def write_split_artifacts(
    directory: Union[str, Path],
    group_a: EventLog,
    split: DatasetSplit,
    meta: SplitMeta,
) -> Dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {name: directory / filename for name, filename in SPLIT_FILES.items()}
    group_a.to_csv(paths["group_a"])
    split.visible.to_csv(paths["visible"])
    split.hidden.to_csv(paths["hidden"])
    group_b_users = EventLog.concat([split.visible, split.hidden])
    write_frame(group_manifest(group_a, group_b_users), paths["manifest"])
    write_meta(paths["meta"], meta.model_dump())
    return paths


def read_split_artifacts(directory: Union[str, Path]) -> Tuple[EventLog, DatasetSplit, SplitMeta]:
    directory = Path(directory)
    raw_meta = read_meta(directory / SPLIT_FILES["meta"])
    try:
        meta = SplitMeta(**{key: value for key, value in raw_meta.items() if value != "None"})
    except ValueError as exc:
        raise ArtifactError(f"Invalid split metadata in {directory}: {exc}") from exc
    group_a = parse_event_log(directory / SPLIT_FILES["group_a"])
    split = DatasetSplit(
        visible=parse_event_log(directory / SPLIT_FILES["visible"]),
        hidden=parse_event_log(directory / SPLIT_FILES["hidden"]),
        seed=meta.seed,
        holdout_fraction=meta.holdout_fraction,
    )
    return group_a, split, meta
