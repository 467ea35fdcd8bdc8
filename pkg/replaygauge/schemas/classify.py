"""
Pydantic schemas for the like/dislike Gaussian naive-Bayes classifier
"""
import math
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, field_validator


class Label(str, Enum):
    LIKE    = "like"
    DISLIKE = "dislike"


class ScoreSource(str, Enum):
    ESTIMATED = "estimated"  # model output r~(u,i)
    OBSERVED  = "observed"   # mapped rating r(u,i)


class LabeledScore(BaseModel):
    model_config = ConfigDict(frozen=True)

    score: float
    label: Label

    @field_validator("score")
    @classmethod
    def finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("score must be finite")
        return value


class GnbModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu_like:     float
    var_like:    float = Field(gt=0.0)
    mu_dislike:  float
    var_dislike: float = Field(gt=0.0)
    prior_like:  float = Field(gt=0.0, lt=1.0)

    @property
    def prior_dislike(self) -> float:
        return 1.0 - self.prior_like


class Classification(BaseModel):
    label:             Label
    posterior_like:    float
    posterior_dislike: float


class ClassMetrics(BaseModel):
    precision: float
    recall:    float
    support:   int


class ClassifierMetrics(BaseModel):
    like:    ClassMetrics
    dislike: ClassMetrics
    samples: int
