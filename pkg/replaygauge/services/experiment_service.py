"""
Experiment Service

Runs the evaluation grid:

* unfiltered cells: every algorithm x training input mode;
* filtered cells: every post-filter x rating function, applied to the lists
  of one base configuration (user KNN on all events by default).

Each cell is measured for every relevance criterion and rank.  Training
always uses group A plus the visible half of group B; group-B users are the
evaluated users and their visible tracks are never recommended nor counted
as relevant.
"""
from __future__ import annotations

import logging
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from replaygauge.core.errors import NoEvaluableUsers
from replaygauge.schemas.classify import GnbModel, ScoreSource
from replaygauge.schemas.evaluation import (
    EvaluationReport,
    ExperimentGrid,
    MapCell,
    RelevanceCriterion,
)
from replaygauge.schemas.models import ALSHyperparameters, Algorithm, SGDHyperparameters
from replaygauge.schemas.recommendations import FilterKind, RecommendationList, ScoredList
from replaygauge.schemas.signals import InputMode, RatingFunction
from replaygauge.services import recommender_service
from replaygauge.services.classifier_service import default_swap_threshold, fit_gnb, labeled_scores
from replaygauge.services.evaluation_service import (
    RelevanceSets,
    composition_report,
    criterion_relevance,
    map_at_k,
)
from replaygauge.services.eventlog_service import DatasetSplit, EventLog
from replaygauge.services.factorization_service import FactorModel, train_als_implicit, train_mf_sgd
from replaygauge.services.postfilter_service import apply_filter, score_list
from replaygauge.services.signals_service import (
    SummaryTable,
    build_training_input,
    rating_frame,
    summarize_interactions,
)
from replaygauge.services.synth_service import GroundTruth, validate_against_truth

logger = logging.getLogger(__name__)


class ModelSettings(BaseModel):
    """Hyperparameters shared by every cell of a run."""
    neighborhood_size: int = recommender_service.DEFAULT_NEIGHBORHOOD_SIZE
    sgd:               SGDHyperparameters = SGDHyperparameters()
    als:               ALSHyperparameters = ALSHyperparameters()
    variance_floor:    float = 1e-6
    score_source:      ScoreSource = ScoreSource.ESTIMATED
    threads:           int = 1


class TrainingData(BaseModel):
    """Summaries of the training log (A + visible B) and of both B halves."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    training: SummaryTable
    visible:  SummaryTable
    hidden:   SummaryTable
    users:    List[int]
    visible_tracks: Dict[int, Set[int]]


class EvaluationContext(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    hidden:       SummaryTable
    users:        List[int]
    relevance:    Dict[RelevanceCriterion, Dict[int, Set[int]]]
    denominators: Optional[Dict[int, int]] = None
    truth:        Optional[GroundTruth] = None


def prepare_training_data(group_a: EventLog, split: DatasetSplit) -> TrainingData:
    visible_tracks = split.visible.tracks_by_user()
    return TrainingData(
        training=summarize_interactions(EventLog.concat([group_a, split.visible])),
        visible=summarize_interactions(split.visible),
        hidden=summarize_interactions(split.hidden),
        users=sorted(visible_tracks),
        visible_tracks=visible_tracks,
    )


def evaluation_context(
    data: TrainingData,
    criteria: Sequence[RelevanceCriterion],
    adapted_denominator: bool = True,
    truth: Optional[GroundTruth] = None,
) -> EvaluationContext:
    """
    Relevance sets per criterion.  Without ``adapted_denominator`` every
    criterion divides by the size of the user's hidden event set.
    """
    relevance = {
        RelevanceCriterion(c): criterion_relevance(data.hidden, c, data.visible_tracks, data.users)
        for c in criteria
    }
    denominators = None
    if not adapted_denominator:
        events = criterion_relevance(data.hidden, RelevanceCriterion.EVENTS, data.visible_tracks, data.users)
        denominators = {user: len(tracks) for user, tracks in events.items() if tracks}
    return EvaluationContext(
        hidden=data.hidden,
        users=data.users,
        relevance=relevance,
        denominators=denominators,
        truth=truth,
    )


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------

def train_recommender(
    algorithm: Union[str, Algorithm],
    table: SummaryTable,
    mode: Union[str, InputMode],
    settings: ModelSettings,
    rating_fn: RatingFunction = RatingFunction.F1,
) -> recommender_service.Model:
    """
    Train one recommender on ``table`` seen through ``mode``.  The SGD model
    learns the ``rating_fn`` ratings of the pairs the mode keeps.
    """
    algorithm = Algorithm(algorithm)
    matrix = build_training_input(table, mode)
    if algorithm is Algorithm.POPULARITY:
        return recommender_service.train_popularity(matrix)
    if algorithm is Algorithm.UB_KNN:
        return recommender_service.train_user_knn(matrix, settings.neighborhood_size)
    if algorithm is Algorithm.ALS:
        return train_als_implicit(matrix, settings.als, threads=settings.threads)

    ratings = rating_frame(table, rating_fn)
    kept = pd.MultiIndex.from_arrays([
        np.repeat(matrix.user_ids, np.diff(matrix.matrix.indptr)),
        matrix.track_ids[matrix.matrix.indices],
    ])
    keys = pd.MultiIndex.from_frame(ratings[["user", "track"]])
    return train_mf_sgd(ratings.loc[keys.isin(kept)], settings.sgd)


def recommend_for(
    model: recommender_service.Model,
    data: TrainingData,
    list_length: int,
    threads: int = 1,
) -> List[RecommendationList]:
    return recommender_service.recommend_many(
        model, data.users, list_length, exclude=data.visible_tracks, threads=threads
    )


def fit_filter_models(
    data: TrainingData,
    rating_fn: Union[str, RatingFunction],
    settings: ModelSettings,
) -> Tuple[FactorModel, GnbModel]:
    """SGD rating estimator on the training table and its like/dislike classifier."""
    rating_fn = RatingFunction(rating_fn)
    sgd = train_mf_sgd(rating_frame(data.training, rating_fn), settings.sgd)
    samples = labeled_scores(data.visible, settings.score_source, model=sgd, rating_fn=rating_fn)
    return sgd, fit_gnb(samples, settings.variance_floor)


def filter_lists(
    lists: Sequence[RecommendationList],
    sgd: FactorModel,
    classifier: GnbModel,
    kind: Union[str, FilterKind],
    alpha: Optional[float] = None,
) -> List[ScoredList]:
    kind = FilterKind(kind)
    if kind is FilterKind.SWAP and alpha is None:
        alpha = default_swap_threshold(classifier)
    return [apply_filter(score_list(sgd, classifier, rec), kind, alpha) for rec in lists]


def evaluate_lists(
    per_user: Mapping[int, Sequence[int]],
    context: EvaluationContext,
    ranks: Sequence[int],
    algorithm: Algorithm,
    input_mode: str,
    rating_fn: str = "-",
    filter_kind: FilterKind = FilterKind.NONE,
) -> EvaluationReport:
    """MAP cells for every criterion x rank plus one composition per rank."""
    per_user = {user: list(per_user.get(user, [])) for user in context.users}
    cells: List[MapCell] = []
    for criterion, relevance in context.relevance.items():
        for k in ranks:
            try:
                result = map_at_k(per_user, relevance, k, context.denominators)
            except NoEvaluableUsers:
                logger.warning("no evaluable users for %s@%d", criterion.value, k)
                cells.append(MapCell(
                    criterion=criterion, k=k, map=0.0,
                    users_evaluated=0, users_excluded=len(context.users),
                ))
                continue
            cells.append(MapCell(
                criterion=criterion,
                k=k,
                map=result.value,
                users_evaluated=result.users_evaluated,
                users_excluded=result.users_excluded,
                distribution=result.distribution,
            ))
    return EvaluationReport(
        algorithm=algorithm,
        input_mode=input_mode,
        rating_fn=rating_fn,
        filter=filter_kind,
        cells=cells,
        compositions=[composition_report(per_user, context.hidden, k) for k in ranks],
        truth_affinity=(
            [validate_against_truth(per_user, context.truth, k) for k in ranks]
            if context.truth is not None else []
        ),
    )


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------

def run_experiment_matrix(
    grid: ExperimentGrid,
    group_a: EventLog,
    split: DatasetSplit,
    settings: Optional[ModelSettings] = None,
    truth: Optional[GroundTruth] = None,
) -> List[EvaluationReport]:
    """Reports in grid order: unfiltered cells first, then filtered cells."""
    settings = settings or ModelSettings()
    data = prepare_training_data(group_a, split)
    context = evaluation_context(data, grid.criteria, grid.adapted_denominator, truth)
    sgd_rating_fn = grid.rating_functions[0] if grid.rating_functions else RatingFunction.F1

    lists: Dict[Tuple[Algorithm, InputMode], List[RecommendationList]] = {}

    def lists_for(algorithm: Algorithm, mode: InputMode) -> List[RecommendationList]:
        if (algorithm, mode) not in lists:
            model = train_recommender(algorithm, data.training, mode, settings, sgd_rating_fn)
            lists[(algorithm, mode)] = recommend_for(model, data, grid.list_length, settings.threads)
        return lists[(algorithm, mode)]

    reports: List[EvaluationReport] = []
    if FilterKind.NONE in grid.filters:
        for algorithm in grid.algorithms:
            for mode in grid.input_modes:
                per_user = recommender_service.lists_by_user(lists_for(algorithm, mode))
                reports.append(evaluate_lists(per_user, context, grid.ranks, algorithm, mode.value))
                logger.info("evaluated %s / %s", algorithm.value, mode.value)

    post_filters = [kind for kind in grid.filters if kind is not FilterKind.NONE]
    if post_filters:
        base = lists_for(grid.base_algorithm, grid.base_input_mode)
        for rating_fn in grid.rating_functions:
            sgd, classifier = fit_filter_models(data, rating_fn, settings)
            for kind in post_filters:
                filtered = filter_lists(base, sgd, classifier, kind, grid.swap_alpha)
                per_user = {scored.user: scored.tracks for scored in filtered}
                reports.append(evaluate_lists(
                    per_user, context, grid.ranks,
                    grid.base_algorithm, grid.base_input_mode.value, rating_fn.value, kind,
                ))
                logger.info("evaluated %s filter with %s", kind.value, rating_fn.value)
    return reports


def count_cells(reports: Sequence[EvaluationReport], filtered: Optional[bool] = None) -> int:
    return sum(
        len(report.cells)
        for report in reports
        if filtered is None or (report.filter is not FilterKind.NONE) == filtered
    )
