"""
Pydantic schemas for MAP@k evaluation, composition reports and experiment grids
"""
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field

from replaygauge.schemas.models import Algorithm
from replaygauge.schemas.recommendations import FilterKind
from replaygauge.schemas.signals import InputMode, RatingFunction


class RelevanceCriterion(str, Enum):
    EVENTS   = "events"
    STREAMS  = "streams"
    LIKES    = "likes"
    SKIPS    = "skips"
    DISLIKES = "dislikes"


class ApDistribution(BaseModel):
    """Spread of per-user average precision behind one MAP value."""
    mean:   float
    median: float
    q25:    float
    q75:    float


class MapResult(BaseModel):
    value:           float = Field(ge=0.0, le=1.0)
    users_evaluated: int
    users_excluded:  int
    distribution:    Optional[ApDistribution] = None


class CompositionReport(BaseModel):
    """
    Breakdown of the top-k recommended tracks a user actually interacted with
    in the hidden data.  ``events`` is the denominator of every percentage;
    streams/skips are non-exclusive shares, like/dislike are exclusive.
    """
    k:               int
    events:          int
    stream_count:    int
    like_count:      int
    skip_count:      int
    dislike_count:   int
    streams_percent: Optional[float] = None
    like_percent:    Optional[float] = None
    skips_percent:   Optional[float] = None
    dislike_percent: Optional[float] = None


class MapCell(BaseModel):
    criterion:       RelevanceCriterion
    k:               int
    map:             float = Field(ge=0.0, le=1.0)
    users_evaluated: int
    users_excluded:  int
    distribution:    Optional[ApDistribution] = None


class EvaluationReport(BaseModel):
    """All measurements of one recommender configuration."""
    algorithm:      Algorithm
    input_mode:     str
    rating_fn:      str = "-"
    filter:         FilterKind = FilterKind.NONE
    cells:          List[MapCell] = []
    compositions:   List[CompositionReport] = []
    truth_affinity: List[Optional[float]] = []  # aligned with compositions' k


class ExperimentGrid(BaseModel):
    algorithms:        List[Algorithm] = [Algorithm.POPULARITY, Algorithm.UB_KNN]
    input_modes:       List[InputMode] = [InputMode.ALL_EVENTS, InputMode.STREAMS, InputMode.LIKES]
    rating_functions:  List[RatingFunction] = [RatingFunction.F1, RatingFunction.F2, RatingFunction.F3]
    filters:           List[FilterKind] = [FilterKind.NONE, FilterKind.DEL, FilterKind.RANK, FilterKind.SWAP]
    criteria:          List[RelevanceCriterion] = list(RelevanceCriterion)
    ranks:             List[int] = [10, 100, 500]
    base_algorithm:    Algorithm = Algorithm.UB_KNN
    base_input_mode:   InputMode = InputMode.ALL_EVENTS
    list_length:       int = 500
    swap_alpha:        Optional[float] = None
    adapted_denominator: bool = True
