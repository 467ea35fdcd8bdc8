"""
Shared fixtures: toy event logs and small synthetic datasets
"""
from pathlib import Path

import pytest

from replaygauge.schemas.synth import GeneratorConfig
from replaygauge.services.eventlog_service import EventLog
from replaygauge.services.signals_service import SummaryTable, summarize_interactions
from replaygauge.services.synth_service import generate, write_generated

HEADER = "user,track,duration,timestamp\n"


def write_log(path: Path, rows) -> Path:
    """Write ``rows`` (tuples or raw strings) below the standard header."""
    lines = [row if isinstance(row, str) else ",".join(str(v) for v in row) for row in rows]
    path.write_text(HEADER + "".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def make_log(rows) -> EventLog:
    """EventLog from ``(user, track, duration)`` or ``(user, track, duration, timestamp)`` tuples."""
    full = [row if len(row) == 4 else (*row, 1000 + n) for n, row in enumerate(rows)]
    users, tracks, durations, timestamps = zip(*full) if full else ((), (), (), ())
    return EventLog.from_arrays(users, tracks, durations, timestamps)


@pytest.fixture
def toy_log() -> EventLog:
    # user 1: track 10 liked, track 11 disliked, track 12 mixed
    # user 2: track 10 single stream, track 13 liked
    return make_log([
        (1, 10, 200), (1, 10, 210), (1, 11, 5), (1, 11, 12),
        (1, 12, 10), (1, 12, 45), (1, 12, 200),
        (2, 10, 30), (2, 13, 180), (2, 13, 181),
    ])


@pytest.fixture
def toy_table(toy_log) -> SummaryTable:
    return summarize_interactions(toy_log)


SMALL_SYNTH = GeneratorConfig(
    user_count=120,
    track_count=400,
    genre_count=8,
    events_per_user_mean=60.0,
    min_events_per_user=20,
    seed=11,
)


@pytest.fixture(scope="session")
def small_synth():
    return generate(SMALL_SYNTH)


@pytest.fixture(scope="session")
def small_synth_dir(tmp_path_factory, small_synth):
    directory = tmp_path_factory.mktemp("synth")
    log, truth = small_synth
    write_generated(directory, log, truth)
    return directory
