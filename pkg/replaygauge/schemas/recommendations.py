"""
Pydantic schemas for recommendation lists and scored (filterable) lists
"""
from enum import Enum
from typing import List

from pydantic import BaseModel, ConfigDict, field_validator


class FilterKind(str, Enum):
    NONE = "none"
    RANK = "rank"
    DEL  = "del"
    SWAP = "swap"


class RecommendedItem(BaseModel):
    model_config = ConfigDict(frozen=True)

    track: int
    score: float


class RecommendationList(BaseModel):
    """Ordered recommendations R(u) for one user."""
    user:  int
    items: List[RecommendedItem] = []

    @field_validator("items")
    @classmethod
    def no_duplicate_tracks(cls, items: List[RecommendedItem]) -> List[RecommendedItem]:
        if len({item.track for item in items}) != len(items):
            raise ValueError("recommendation list contains duplicate tracks")
        return items

    @property
    def tracks(self) -> List[int]:
        return [item.track for item in self.items]


class ScoredEntry(BaseModel):
    """A recommended track with its estimated rating and predicted-dislike flag."""
    model_config = ConfigDict(frozen=True)

    track:   int
    score:   float
    dislike: bool = False


class ScoredList(BaseModel):
    user:    int
    entries: List[ScoredEntry] = []

    @field_validator("entries")
    @classmethod
    def no_duplicate_tracks(cls, entries: List[ScoredEntry]) -> List[ScoredEntry]:
        if len({entry.track for entry in entries}) != len(entries):
            raise ValueError("scored list contains duplicate tracks")
        return entries

    @property
    def tracks(self) -> List[int]:
        return [entry.track for entry in self.entries]
