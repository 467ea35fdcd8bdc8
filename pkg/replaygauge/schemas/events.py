"""
Pydantic schemas for listening events and dataset splits
"""
from enum import Enum
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field


EVENT_COLUMNS: Tuple[str, str, str, str] = ("user", "track", "duration", "timestamp")


class ListeningEvent(BaseModel):
    """One play of ``track`` by ``user`` lasting ``duration`` seconds at ``timestamp``."""
    model_config = ConfigDict(frozen=True)

    user:      int
    track:     int
    duration:  int = Field(ge=0)
    timestamp: int = Field(ge=0)


class EventLogFormat(BaseModel):
    """Column layout of an event CSV."""
    columns:   Tuple[str, str, str, str] = EVENT_COLUMNS
    delimiter: str = ","


class UserGroup(str, Enum):
    A = "A"  # training-only users
    B = "B"  # users split into visible / hidden halves


class SplitMeta(BaseModel):
    seed:             int
    holdout_fraction: float
    group_b_fraction: Optional[float] = None
    min_events:       Optional[int] = None
    format_version:   int = 1
