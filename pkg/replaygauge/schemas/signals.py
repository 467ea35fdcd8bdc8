"""
Pydantic schemas for interaction summaries, implicit ratings and dataset statistics
"""
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class RatingFunction(str, Enum):
    F1 = "f1"  # streams only
    F2 = "f2"  # implicit like / dislike
    F3 = "f3"  # streams against skips


class InputMode(str, Enum):
    ALL_EVENTS   = "all_events"
    STREAMS      = "streams"
    LIKES        = "likes"
    PLAY_COUNTS  = "play_counts"   # value P(u,i)
    TOTAL_COUNTS = "total_counts"  # value p(u,i)


class InteractionSummary(BaseModel):
    """Aggregated plays of one (user, track) pair."""
    model_config = ConfigDict(frozen=True)

    user:         int
    track:        int
    total_plays:  int = Field(ge=0)
    skip_count:   int = Field(ge=0)
    stream_count: int = Field(ge=0)
    like:         bool = False
    dislike:      bool = False

    @model_validator(mode="after")
    def check_counts(self) -> "InteractionSummary":
        if self.total_plays != self.skip_count + self.stream_count:
            raise ValueError("total_plays must equal skip_count + stream_count")
        if self.like and self.dislike:
            raise ValueError("a pair cannot be both liked and disliked")
        if self.like and not (self.stream_count >= 2 and self.skip_count == 0):
            raise ValueError("like requires at least two streams and no skip")
        if self.dislike and not (self.skip_count >= 1 and self.stream_count == 0):
            raise ValueError("dislike requires a skip and no stream")
        return self


class RatingTriple(BaseModel):
    model_config = ConfigDict(frozen=True)

    user:   int
    track:  int
    rating: int = Field(ge=1, le=5)


# ---------------------------------------------------------------------------
# Statistics report
# ---------------------------------------------------------------------------

class DurationBucket(BaseModel):
    """Events shorter than ``threshold_seconds``."""
    threshold_seconds: int
    count:             int
    share:             float = Field(ge=0.0, le=1.0)


class ReplayBucket(BaseModel):
    """Unique pairs played at least ``min_plays`` times."""
    min_plays: int
    count:     int
    share:     float = Field(ge=0.0, le=1.0)


class ShareFigure(BaseModel):
    count:       int
    share:       float = Field(ge=0.0, le=1.0)
    denominator: str  # "events" or "pairs"


class RatingHistogram(BaseModel):
    function: RatingFunction
    counts:   Dict[int, int]
    shares:   Dict[int, float]


class StatsReport(BaseModel):
    event_count:       int
    unique_pair_count: int
    user_count:        int = 0
    track_count:       int = 0
    mean_duration:     Optional[float] = None
    median_duration:   Optional[float] = None
    duration_buckets:  List[DurationBucket]
    replay_buckets:    List[ReplayBucket]
    stream_share:      ShareFigure
    skip_share:        ShareFigure
    like_share:        ShareFigure
    dislike_share:     ShareFigure
    rating_histograms: List[RatingHistogram] = []


class DatasetOverview(BaseModel):
    """One row of the dataset description table."""
    name:              str
    track_count:       int
    user_count:        int
    event_count:       int
    unique_pair_count: int
