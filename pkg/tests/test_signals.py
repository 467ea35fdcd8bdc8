import numpy as np
import pandas as pd
import pytest

from replaygauge.core.errors import UnknownFunction, UnknownMode
from replaygauge.schemas.signals import InputMode, InteractionSummary, RatingFunction
from replaygauge.services.signals_service import (
    RATING_FUNCTIONS,
    SummaryTable,
    build_training_input,
    derive_dislike,
    derive_like,
    is_skip,
    map_ratings,
    rating_f1,
    rating_f2,
    rating_f3,
    rating_frame,
    read_ratings,
    summarize_interactions,
    write_ratings,
)
from replaygauge.services.eventlog_service import EventLog
from tests.conftest import make_log


def summary(streams=0, skips=0, user=1, track=1):
    return InteractionSummary(
        user=user,
        track=track,
        total_plays=streams + skips,
        skip_count=skips,
        stream_count=streams,
        like=streams >= 2 and skips == 0,
        dislike=skips >= 1 and streams == 0,
    )


def only(table: SummaryTable) -> InteractionSummary:
    rows = list(table)
    assert len(rows) == 1
    return rows[0]


# -- summaries ---------------------------------------------------------------

def test_mixed_pair():
    s = only(summarize_interactions(make_log([(1, 1, 10), (1, 1, 45), (1, 1, 200)])))
    assert (s.total_plays, s.skip_count, s.stream_count, s.like, s.dislike) == (3, 1, 2, False, False)


def test_thirty_seconds_is_a_stream():
    assert not is_skip(30)
    assert is_skip(29)
    s = only(summarize_interactions(make_log([(1, 1, 30)])))
    assert (s.total_plays, s.skip_count, s.stream_count) == (1, 0, 1)


def test_double_skip_is_dislike():
    s = only(summarize_interactions(make_log([(1, 1, 5), (1, 1, 5)])))
    assert (s.total_plays, s.skip_count, s.stream_count, s.dislike) == (2, 2, 0, True)


def test_summaries_sorted_by_user_track(toy_table):
    pairs = [(s.user, s.track) for s in toy_table]
    assert pairs == sorted(pairs)
    assert (1, 11) in toy_table
    assert (2, 11) not in toy_table
    assert toy_table.get(2, 13).like


def test_empty_log_gives_empty_table():
    assert len(summarize_interactions(EventLog())) == 0


def test_summaries_match_per_event_fold():
    rng = np.random.default_rng(0)
    n = 10_000
    users = rng.integers(1, 40, n)
    tracks = rng.integers(1, 60, n)
    durations = rng.integers(0, 400, n)
    skipped = rng.random(n) < 0.4
    durations[skipped] = rng.integers(0, 30, int(skipped.sum()))
    log = EventLog.from_arrays(users, tracks, durations, np.arange(n))

    folded = {}
    for user, track, duration in zip(users.tolist(), tracks.tolist(), durations.tolist()):
        plays, skips, streams = folded.get((user, track), (0, 0, 0))
        skip = duration < 30
        folded[(user, track)] = (plays + 1, skips + skip, streams + (not skip))

    table = summarize_interactions(log)
    assert len(table) == len(folded)
    for s in table:
        plays, skips, streams = folded[(s.user, s.track)]
        assert (s.total_plays, s.skip_count, s.stream_count) == (plays, skips, streams)
        assert s.like == derive_like(s)
        assert s.dislike == derive_dislike(s)
        assert not (s.like and s.dislike)

    for function_id, scalar in RATING_FUNCTIONS.items():
        vector = rating_frame(table, function_id)["rating"].tolist()
        assert vector == [scalar(s) for s in table]


def test_summary_csv_roundtrip(tmp_path, toy_table):
    path = tmp_path / "summary.csv"
    toy_table.to_csv(path)
    assert SummaryTable.from_csv(path).to_csv() == toy_table.to_csv()


# -- like / dislike ----------------------------------------------------------

@pytest.mark.parametrize("streams, skips, expected", [(2, 0, True), (3, 1, False), (1, 0, False)])
def test_derive_like(streams, skips, expected):
    assert derive_like(summary(streams, skips)) is expected


@pytest.mark.parametrize("streams, skips, expected", [(0, 1, True), (1, 3, False), (0, 0, False)])
def test_derive_dislike(streams, skips, expected):
    assert derive_dislike(summary(streams, skips)) is expected


def test_inconsistent_summary_rejected():
    with pytest.raises(ValueError):
        InteractionSummary(user=1, track=1, total_plays=2, skip_count=0, stream_count=1)


# -- rating functions --------------------------------------------------------

@pytest.mark.parametrize("streams, skips, expected", [(4, 0, 5), (7, 0, 5), (3, 0, 4), (2, 0, 3), (1, 0, 2), (0, 9, 1)])
def test_rating_f1(streams, skips, expected):
    assert rating_f1(summary(streams, skips)) == expected


@pytest.mark.parametrize("streams, skips, expected", [(2, 0, 5), (0, 1, 1), (1, 1, 3), (1, 0, 3)])
def test_rating_f2(streams, skips, expected):
    assert rating_f2(summary(streams, skips)) == expected


@pytest.mark.parametrize(
    "streams, skips, expected",
    [(4, 3, 5), (4, 4, 2), (2, 1, 4), (1, 0, 3), (1, 2, 2), (0, 0, 1), (0, 5, 1)],
)
def test_rating_f3(streams, skips, expected):
    assert rating_f3(summary(streams, skips)) == expected


def test_map_ratings(toy_table):
    triples = map_ratings(toy_table, "f2")
    assert len(triples) == len(toy_table)
    assert {t.rating for t in triples} <= {1, 3, 5}
    assert [(t.user, t.track) for t in triples] == sorted((t.user, t.track) for t in triples)


def test_map_ratings_empty_table():
    assert map_ratings(SummaryTable(), RatingFunction.F1) == []


def test_unknown_rating_function(toy_table):
    with pytest.raises(UnknownFunction):
        map_ratings(toy_table, "f9")


def test_ratings_file_roundtrip(tmp_path, toy_table):
    frame = rating_frame(toy_table, "f3")
    path = write_ratings(frame, tmp_path / "f3.csv")
    pd.testing.assert_frame_equal(read_ratings(path), frame.astype("int64"))


# -- training input ----------------------------------------------------------

def test_training_input_modes():
    log = make_log([(1, 1, 5), (1, 1, 5), (1, 2, 100), (1, 2, 100), (1, 3, 100), (1, 3, 100), (1, 3, 100)])
    table = summarize_interactions(log)
    events = build_training_input(table, "all_events")
    streams = build_training_input(table, InputMode.STREAMS)
    likes = build_training_input(table, "likes")
    counts = build_training_input(table, "play_counts")

    assert events.value(1, 1) == 1 and streams.value(1, 1) == 0 and likes.value(1, 1) == 0
    assert events.value(1, 2) == streams.value(1, 2) == likes.value(1, 2) == 1
    assert counts.value(1, 3) == 3
    assert events.binary and not counts.binary
    assert streams.user_tracks(1).tolist() == [2, 3]


def test_training_input_keeps_empty_rows():
    table = summarize_interactions(make_log([(1, 1, 5), (2, 1, 100), (2, 1, 100)]))
    likes = build_training_input(table, "likes")
    assert likes.shape == (2, 1)
    assert likes.user_tracks(1).tolist() == []
    assert likes.user_tracks(2).tolist() == [1]


def test_unknown_mode(toy_table):
    with pytest.raises(UnknownMode):
        build_training_input(toy_table, "skips_only")
