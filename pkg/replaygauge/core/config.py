"""
Application configuration

``settings`` holds process-wide defaults read from the environment / .env.
``PipelineConfig`` is the per-run configuration of ``main.py pipeline``; it is
loaded from a flat ``section.key=value`` file and command-line overrides.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Annotated, Any, Dict, List, Mapping, Optional, Union

from dotenv import dotenv_values
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from replaygauge.core.errors import ArtifactError
from replaygauge.schemas.classify import ScoreSource
from replaygauge.schemas.evaluation import RelevanceCriterion
from replaygauge.schemas.models import Algorithm
from replaygauge.schemas.recommendations import FilterKind
from replaygauge.schemas.signals import InputMode, RatingFunction


class Settings(BaseSettings):
    # App
    PROJECT_NAME: str = "replaygauge"
    VERSION: str = "1.0.0"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s [%(name)s] %(levelname)s %(message)s"

    # Execution
    DEFAULT_THREADS: int = 1

    # Artifact formats
    FORMAT_VERSION: int = 1
    MODEL_FORMAT_VERSION: int = 1

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="REPLAYGAUGE_",
        case_sensitive=True,
        extra="ignore",
    )


settings = Settings()


# ---------------------------------------------------------------------------
# Pipeline configuration
# ---------------------------------------------------------------------------

def _split_commas(value: Any) -> Any:
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


class ConfigSection(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathsSection(ConfigSection):
    input_log: Optional[Path] = None
    work_dir:  Path = Path("work")
    truth_dir: Optional[Path] = None  # directory holding truth.csv + generator.meta


class SplitSection(ConfigSection):
    seed:             int   = 7
    holdout_fraction: float = Field(0.5, gt=0.0, lt=1.0)
    group_b_fraction: float = Field(0.3, gt=0.0, lt=1.0)
    min_events:       int   = Field(10, ge=1)


class SignalsSection(ConfigSection):
    rating_functions: Annotated[List[RatingFunction], BeforeValidator(_split_commas)] = [
        RatingFunction.F1, RatingFunction.F2, RatingFunction.F3,
    ]


class ModelsSection(ConfigSection):
    algorithms:  Annotated[List[Algorithm], BeforeValidator(_split_commas)] = [
        Algorithm.POPULARITY, Algorithm.UB_KNN,
    ]
    input_modes: Annotated[List[InputMode], BeforeValidator(_split_commas)] = [
        InputMode.ALL_EVENTS, InputMode.STREAMS, InputMode.LIKES,
    ]
    list_length: int = Field(500, ge=1)


class KnnSection(ConfigSection):
    neighborhood_size: int = Field(100, ge=1)


class SgdSection(ConfigSection):
    k:              int   = Field(50, ge=1)
    epochs:         int   = Field(20, ge=0)
    regularization: float = Field(0.05, ge=0.0)
    learning_rate:  float = Field(0.005, gt=0.0)
    seed:           int   = 0


class AlsSection(ConfigSection):
    k:              int   = Field(50, ge=1)
    sweeps:         int   = Field(20, ge=0)
    regularization: float = Field(0.07, gt=0.0)
    alpha:          float = Field(40.0, gt=0.0)
    seed:           int   = 0


class ClassifySection(ConfigSection):
    variance_floor: float = Field(1e-6, gt=0.0)
    score_source:   ScoreSource = ScoreSource.ESTIMATED


class FilterSection(ConfigSection):
    filters: Annotated[List[FilterKind], BeforeValidator(_split_commas)] = [
        FilterKind.NONE, FilterKind.DEL, FilterKind.RANK, FilterKind.SWAP,
    ]
    alpha:           Optional[float] = None  # None -> like mean minus one like std
    base_algorithm:  Algorithm = Algorithm.UB_KNN
    base_input_mode: InputMode = InputMode.ALL_EVENTS


class EvalSection(ConfigSection):
    ranks:    Annotated[List[int], BeforeValidator(_split_commas)] = [10, 100, 500]
    criteria: Annotated[List[RelevanceCriterion], BeforeValidator(_split_commas)] = list(RelevanceCriterion)
    adapted_denominator: bool = True
    json_report:         bool = True

    @field_validator("ranks")
    @classmethod
    def positive_ranks(cls, ranks: List[int]) -> List[int]:
        if not ranks or any(k < 1 for k in ranks):
            raise ValueError("ranks must be a non-empty list of positive integers")
        return sorted(set(ranks))


class RunSection(ConfigSection):
    threads: int = Field(1, ge=1)


class PipelineConfig(BaseSettings):
    paths:    PathsSection    = PathsSection()
    split:    SplitSection    = SplitSection()
    signals:  SignalsSection  = SignalsSection()
    models:   ModelsSection   = ModelsSection()
    knn:      KnnSection      = KnnSection()
    sgd:      SgdSection      = SgdSection()
    als:      AlsSection      = AlsSection()
    classify: ClassifySection = ClassifySection()
    filter:   FilterSection   = FilterSection()
    eval:     EvalSection     = EvalSection()
    run:      RunSection      = RunSection()

    model_config = SettingsConfigDict(
        env_prefix="REPLAYGAUGE_",
        env_nested_delimiter="__",
        extra="forbid",
    )


def nest_keys(flat: Mapping[str, Any]) -> Dict[str, Any]:
    """``{"split.seed": "7"}`` -> ``{"split": {"seed": "7"}}``."""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        parts = key.strip().split(".")
        node = nested
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ArtifactError(f"Config key {key!r} conflicts with a scalar value")
        node[parts[-1]] = value
    return nested


def read_flat_config(path: Union[str, Path]) -> Dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"Config file not found: {path}")
    values = dotenv_values(path)
    return {key: value for key, value in values.items() if value is not None}


def load_pipeline_config(
    path: Union[str, Path, None] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> PipelineConfig:
    """
    Build a ``PipelineConfig``.  Overrides (command-line flags) win over the
    file, which wins over ``REPLAYGAUGE_*`` environment variables.
    """
    flat: Dict[str, Any] = {}
    if path is not None:
        flat.update(read_flat_config(path))
    if overrides:
        flat.update({key: value for key, value in overrides.items() if value is not None})
    return PipelineConfig(**nest_keys(flat))


def config_hash(config: BaseModel) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
