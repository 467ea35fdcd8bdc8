import pytest
from pydantic import ValidationError

from replaygauge.core.config import config_hash, load_pipeline_config, nest_keys, read_flat_config
from replaygauge.core.errors import ArtifactError
from replaygauge.schemas.models import Algorithm
from replaygauge.schemas.recommendations import FilterKind
from replaygauge.schemas.signals import RatingFunction


def test_defaults():
    config = load_pipeline_config()
    assert config.split.holdout_fraction == 0.5
    assert config.eval.ranks == [10, 100, 500]
    assert config.models.algorithms == [Algorithm.POPULARITY, Algorithm.UB_KNN]
    assert config.filter.alpha is None


def test_flat_file_and_overrides(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text(
        "# experiment\n"
        "split.seed=11\n"
        "eval.ranks=100,10\n"
        "signals.rating_functions=f3\n"
        "filter.filters=none,del\n",
        encoding="utf-8",
    )
    config = load_pipeline_config(path, {"split.seed": "12"})
    assert config.split.seed == 12
    assert config.eval.ranks == [10, 100]
    assert config.signals.rating_functions == [RatingFunction.F3]
    assert config.filter.filters == [FilterKind.NONE, FilterKind.DEL]


def test_read_flat_config_accepts_strings(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("run.threads=4\n", encoding="utf-8")
    assert read_flat_config(str(path)) == {"run.threads": "4"}


def test_missing_config_file(tmp_path):
    with pytest.raises(ArtifactError, match="absent.conf"):
        load_pipeline_config(tmp_path / "absent.conf")


@pytest.mark.parametrize("key, value", [
    ("split.holdout_fraction", "1.5"),
    ("eval.ranks", "0,10"),
    ("signals.rating_functions", "f9"),
    ("split.unknown", "1"),
    ("knn.neighborhood_size", "0"),
])
def test_invalid_values(key, value):
    with pytest.raises(ValidationError):
        load_pipeline_config(overrides={key: value})


def test_nest_keys():
    assert nest_keys({"a.b": "1", "a.c": "2", "d": "3"}) == {"a": {"b": "1", "c": "2"}, "d": "3"}


def test_config_hash_tracks_content():
    base = load_pipeline_config()
    assert config_hash(base) == config_hash(load_pipeline_config())
    assert config_hash(base) != config_hash(load_pipeline_config(overrides={"split.seed": "8"}))
