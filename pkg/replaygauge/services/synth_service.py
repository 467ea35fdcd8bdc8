"""
Synthetic Listening Log Generator

Simulates listening logs with a known ground truth so the whole pipeline can
be exercised without proprietary data.

Users and tracks carry non-negative latent genre vectors (Dirichlet draws).
A user draws tracks with weight ``affinity_softening + cosine **
affinity_sharpness``, so listeners of the same genres share most of their
tracks.  The affinity of a track is its rank among the user's listening
mass: the share of draw probability on tracks with a lower cosine, plus half
its own share.  Drawn tracks therefore have affinities uniform on (0, 1), and
each draw yields:

    affinity <  dislike_threshold   a skip (1..29 s) with skip_probability_given_dislike,
                                    otherwise a partial listen (30 s .. track length)
    affinity >= like_threshold      a full listen plus at least one full replay
    otherwise                       a skip with skip_probability_given_neutral,
                                    otherwise a partial listen

With the defaults about a third of all events are skips.
"""
from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from replaygauge.core.artifacts import read_meta, require_file, write_frame, write_meta
from replaygauge.core.errors import InvalidConfig, InvalidParameter
from replaygauge.schemas.synth import GeneratorConfig
from replaygauge.services.eventlog_service import EventLog, user_rng

logger = logging.getLogger(__name__)

LATENT_STREAM = 2
EVENT_STREAM = 3
PROFILE_CACHE_SIZE = 512

EVENTS_FILE = "events.csv"
TRUTH_FILE = "truth.csv"
META_FILE = "generator.meta"
TRUTH_COLUMNS = ("user", "track", "affinity", "liked")


def check_config(config: GeneratorConfig) -> None:
    """Raise ``InvalidConfig`` naming the first out-of-range field."""

    def require(field: str, ok: bool, message: str) -> None:
        if not ok:
            raise InvalidConfig(field, f"{message}, got {getattr(config, field)}")

    for field in ("user_count", "track_count", "genre_count", "min_events_per_user", "max_gap_seconds"):
        require(field, getattr(config, field) >= 1, "must be >= 1")
    require("events_per_user_mean", config.events_per_user_mean > 0, "must be > 0")
    require("events_per_user_sigma", config.events_per_user_sigma >= 0, "must be >= 0")
    require("user_concentration", config.user_concentration > 0, "must be > 0")
    require("track_concentration", config.track_concentration > 0, "must be > 0")
    require("affinity_softening", config.affinity_softening >= 0, "must be >= 0")
    require("affinity_sharpness", config.affinity_sharpness > 0, "must be > 0")
    for field in (
        "dislike_threshold",
        "like_threshold",
        "skip_probability_given_dislike",
        "skip_probability_given_neutral",
    ):
        require(field, 0.0 <= getattr(config, field) <= 1.0, "must lie in [0, 1]")
    require(
        "like_threshold",
        config.like_threshold >= config.dislike_threshold,
        "must not be below dislike_threshold",
    )
    require("replay_rate_given_like", 0.0 <= config.replay_rate_given_like < 1.0, "must lie in [0, 1)")
    require("track_length_std", config.track_length_std > 0, "must be > 0")
    require("track_length_min", config.track_length_min >= 30, "must be >= 30")
    require(
        "track_length_max",
        config.track_length_max >= config.track_length_min,
        "must not be below track_length_min",
    )
    require("start_timestamp", config.start_timestamp >= 0, "must be >= 0")


# ---------------------------------------------------------------------------
# Latent model
# ---------------------------------------------------------------------------

class LatentModel:
    """User / track genre vectors and track lengths derived from the seed."""

    def __init__(self, config: GeneratorConfig):
        rng = np.random.default_rng([config.seed & ((1 << 64) - 1), LATENT_STREAM])
        genres = config.genre_count
        self.config = config
        self.user_vectors = rng.dirichlet(np.full(genres, config.user_concentration), size=config.user_count)
        self.track_vectors = rng.dirichlet(np.full(genres, config.track_concentration), size=config.track_count)
        lengths = rng.normal(config.track_length_mean, config.track_length_std, size=config.track_count)
        self.track_lengths = np.rint(
            np.clip(lengths, config.track_length_min, config.track_length_max)
        ).astype(np.int64)
        norms = np.linalg.norm(self.track_vectors, axis=1)
        self._unit_tracks = self.track_vectors / np.where(norms > 0, norms, 1.0)[:, None]
        self._cache: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}

    def check_user(self, user: int) -> int:
        user = int(user)
        if not 1 <= user <= self.config.user_count:
            raise InvalidParameter(f"user {user} outside 1..{self.config.user_count}")
        return user

    def check_tracks(self, tracks: np.ndarray) -> None:
        outside = (tracks < 1) | (tracks > self.config.track_count)
        if outside.any():
            raise InvalidParameter(
                f"track {int(tracks[outside][0])} outside 1..{self.config.track_count}"
            )

    def user_cosines(self, user: int) -> np.ndarray:
        vector = self.user_vectors[user - 1]
        cosine = self._unit_tracks @ (vector / max(np.linalg.norm(vector), 1e-300))
        return np.clip(cosine, 0.0, 1.0)

    def _profile(self, user: int) -> Tuple[np.ndarray, np.ndarray]:
        cached = self._cache.get(user)
        if cached is not None:
            return cached
        cosine = self.user_cosines(user)
        weights = self.config.affinity_softening + cosine ** self.config.affinity_sharpness
        total = weights.sum()
        if total > 0:
            shares = weights / total
        else:
            shares = np.full(len(weights), 1.0 / len(weights))
        order = np.argsort(cosine, kind="stable")
        ranked = shares[order]
        affinities = np.empty(len(cosine))
        affinities[order] = np.cumsum(ranked) - ranked / 2
        if len(self._cache) >= PROFILE_CACHE_SIZE:
            self._cache.pop(next(iter(self._cache)))
        self._cache[user] = (shares, affinities)
        return shares, affinities

    def listening_shares(self, user: int) -> np.ndarray:
        """Draw probability of every track for user ``user`` (1-based)."""
        return self._profile(user)[0]

    def user_affinities(self, user: int) -> np.ndarray:
        """Affinity of user ``user`` (1-based) for every track, in track order."""
        return self._profile(user)[1]


class GroundTruth:
    """
    Affinities of the generated pairs, plus the latent model so unseen
    pairs can be scored too.
    """

    def __init__(self, pairs: pd.DataFrame, latent: LatentModel):
        self.pairs = pairs.loc[:, list(TRUTH_COLUMNS)].reset_index(drop=True)
        self.latent = latent

    @property
    def config(self) -> GeneratorConfig:
        return self.latent.config

    def affinity(self, user: int, track: int) -> float:
        self.latent.check_tracks(np.array([track], dtype=np.int64))
        return float(self.latent.user_affinities(self.latent.check_user(user))[int(track) - 1])

    def liked(self, user: int, track: int) -> bool:
        return self.affinity(user, track) >= self.config.like_threshold

    def __len__(self) -> int:
        return len(self.pairs)


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def _user_events(config: GeneratorConfig, latent: LatentModel, user: int) -> pd.DataFrame:
    rng = user_rng(config.seed, user, EVENT_STREAM)
    sigma = config.events_per_user_sigma
    target = rng.lognormal(math.log(config.events_per_user_mean) - sigma * sigma / 2, sigma)
    n_events = max(config.min_events_per_user, int(round(target)))

    affinity = latent.user_affinities(user)
    draws = rng.choice(config.track_count, size=n_events, p=latent.listening_shares(user))
    coins = rng.random(n_events)
    skip_lengths = rng.integers(1, 30, size=n_events)
    partial_share = rng.random(n_events)
    replays = rng.geometric(1.0 - config.replay_rate_given_like, size=n_events)

    a = affinity[draws]
    lengths = latent.track_lengths[draws]
    disliked = a < config.dislike_threshold
    liked = a >= config.like_threshold
    neutral = ~disliked & ~liked
    skipped = (disliked & (coins < config.skip_probability_given_dislike)) | (
        neutral & (coins < config.skip_probability_given_neutral)
    )
    partial = 30 + np.floor(partial_share * (lengths - 29)).astype(np.int64)
    first = np.where(liked, lengths, np.where(skipped, skip_lengths, partial))
    per_draw = np.where(liked, 1 + replays, 1)

    used = int(np.searchsorted(np.cumsum(per_draw), n_events)) + 1
    tracks = np.repeat(draws[:used] + 1, per_draw[:used])
    durations = np.repeat(first[:used], per_draw[:used])

    gaps = rng.integers(1, config.max_gap_seconds + 1, size=len(tracks))
    elapsed = np.concatenate([[0], np.cumsum(durations[:-1])])
    timestamps = config.start_timestamp + np.cumsum(gaps) + elapsed
    return pd.DataFrame({
        "user": np.full(len(tracks), user, dtype=np.int64),
        "track": tracks.astype(np.int64),
        "duration": durations.astype(np.int64),
        "timestamp": timestamps.astype(np.int64),
    })


def generate(config: Optional[GeneratorConfig] = None) -> Tuple[EventLog, GroundTruth]:
    """Seeded log of ``user_count`` users (ids 1..n) over tracks 1..track_count."""
    config = config or GeneratorConfig()
    check_config(config)
    latent = LatentModel(config)

    frames = [_user_events(config, latent, user) for user in range(1, config.user_count + 1)]
    log = EventLog(pd.concat(frames, ignore_index=True))

    pairs = log.frame.loc[:, ["user", "track"]].drop_duplicates().sort_values(["user", "track"])
    affinity = np.array([
        latent.user_affinities(user)[track - 1]
        for user, track in zip(pairs["user"].tolist(), pairs["track"].tolist())
    ])
    pairs = pairs.assign(affinity=affinity, liked=(affinity >= config.like_threshold).astype(np.int64))
    truth = GroundTruth(pairs, latent)
    logger.info("generated %d events for %d users (%d pairs)", len(log), config.user_count, len(truth))
    return log, truth


def write_generated(
    directory: Union[str, Path],
    log: EventLog,
    truth: GroundTruth,
) -> Dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "events": directory / EVENTS_FILE,
        "truth": directory / TRUTH_FILE,
        "meta": directory / META_FILE,
    }
    log.to_csv(paths["events"])
    write_frame(truth.pairs, paths["truth"], float_format="%.17g")
    write_meta(paths["meta"], truth.config.model_dump())
    return paths


def load_truth(directory: Union[str, Path]) -> GroundTruth:
    directory = Path(directory)
    config = GeneratorConfig(**read_meta(directory / META_FILE))
    pairs = pd.read_csv(require_file(directory / TRUTH_FILE), float_precision="round_trip")
    return GroundTruth(pairs, LatentModel(config))


def validate_against_truth(
    recs: Mapping[int, Sequence[int]],
    truth: GroundTruth,
    k: int,
) -> Optional[float]:
    """
    Mean true affinity of each user's top-k, averaged over users with a
    non-empty list; None when every list is empty.
    """
    means = []
    for user in sorted(recs):
        top = list(recs[user])[:k]
        if not top:
            continue
        affinities = truth.latent.user_affinities(truth.latent.check_user(user))
        tracks = np.asarray(top, dtype=np.int64)
        truth.latent.check_tracks(tracks)
        means.append(float(np.mean(affinities[tracks - 1])))
    if not means:
        return None
    return sum(means) / len(means)
