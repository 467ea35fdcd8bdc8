"""
Direction-of-effect checks on the default synthetic dataset.

These train on ~5e5 events and take minutes; run them with ``pytest -m slow``.
"""
import pytest

from replaygauge.schemas.evaluation import ExperimentGrid, RelevanceCriterion
from replaygauge.schemas.models import Algorithm
from replaygauge.schemas.recommendations import FilterKind
from replaygauge.schemas.signals import InputMode, RatingFunction
from replaygauge.schemas.synth import GeneratorConfig
from replaygauge.services.eventlog_service import filter_min_activity, select_user_groups, split_dataset
from replaygauge.services.experiment_service import ModelSettings, run_experiment_matrix
from replaygauge.services.synth_service import generate

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def reports():
    log, truth = generate(GeneratorConfig())
    log = filter_min_activity(log, 10)
    group_a, group_b = select_user_groups(log, seed=7, group_b_fraction=0.3)
    split = split_dataset(group_b, seed=7)
    grid = ExperimentGrid(
        algorithms=[Algorithm.POPULARITY, Algorithm.UB_KNN],
        input_modes=[InputMode.ALL_EVENTS],
        rating_functions=[RatingFunction.F3],
        filters=[FilterKind.NONE, FilterKind.DEL],
        ranks=[10, 100],
        list_length=100,
    )
    return run_experiment_matrix(grid, group_a, split, ModelSettings(threads=4), truth)


def find(reports, algorithm, kind):
    return next(r for r in reports if r.algorithm is algorithm and r.filter is kind)


def map_value(report, criterion, k):
    return next(c.map for c in report.cells if c.criterion is criterion and c.k == k)


def composition(report, k):
    return next(c for c in report.compositions if c.k == k)


def test_knn_beats_popularity(reports):
    knn = map_value(find(reports, Algorithm.UB_KNN, FilterKind.NONE), RelevanceCriterion.EVENTS, 10)
    popularity = map_value(find(reports, Algorithm.POPULARITY, FilterKind.NONE), RelevanceCriterion.EVENTS, 10)
    assert knn >= 2 * popularity


def test_del_lowers_dislike_share(reports):
    before = composition(find(reports, Algorithm.UB_KNN, FilterKind.NONE), 10)
    after = composition(find(reports, Algorithm.UB_KNN, FilterKind.DEL), 10)
    assert after.dislike_percent <= 0.6 * before.dislike_percent
    assert after.like_percent >= 0.9 * before.like_percent


def test_del_collapses_dislike_map(reports):
    before = find(reports, Algorithm.UB_KNN, FilterKind.NONE)
    after = find(reports, Algorithm.UB_KNN, FilterKind.DEL)
    assert map_value(after, RelevanceCriterion.DISLIKES, 100) < 0.5 * map_value(before, RelevanceCriterion.DISLIKES, 100)
    like_before = map_value(before, RelevanceCriterion.LIKES, 10)
    assert map_value(after, RelevanceCriterion.LIKES, 10) == pytest.approx(like_before, rel=0.15)


def test_recommendations_track_ground_truth(reports):
    knn = find(reports, Algorithm.UB_KNN, FilterKind.NONE)
    popularity = find(reports, Algorithm.POPULARITY, FilterKind.NONE)
    assert knn.truth_affinity[0] > popularity.truth_affinity[0]
