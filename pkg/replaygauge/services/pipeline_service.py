"""
Pipeline Service

File-based stages of the experiment, each reading the artifacts of the one
before it from the work directory:

    split        split/       group_a.csv, visible.csv, hidden.csv, manifest.csv, split.meta
    summarize    summaries/   training.csv, visible.csv, hidden.csv;  ratings/<fn>.csv
    train        models/      <algorithm>__<input mode>.model
    recommend    recommendations/<algorithm>__<input mode>.csv
    classify     classifiers/ <fn>.model (SGD estimator), <fn>.gnb
    filter       filtered/    <filter>__<fn>.csv
    evaluate     reports/     map.csv, composition.csv, tables.txt, report.json

A stage is skipped when the bytes of its inputs and its parameters match
the previous run and its outputs still exist.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from replaygauge.core.artifacts import StageCache, require_file, write_meta
from replaygauge.core.config import PipelineConfig, config_hash, settings
from replaygauge.core.errors import InvalidParameter
from replaygauge.schemas.evaluation import EvaluationReport, ExperimentGrid
from replaygauge.schemas.events import SplitMeta
from replaygauge.schemas.models import ALSHyperparameters, Algorithm, SGDHyperparameters
from replaygauge.schemas.recommendations import FilterKind
from replaygauge.schemas.signals import InputMode, RatingFunction
from replaygauge.services import recommender_service
from replaygauge.services.classifier_service import load_gnb, save_gnb
from replaygauge.services.eventlog_service import (
    SPLIT_FILES,
    EventLog,
    filter_min_activity,
    parse_event_log,
    read_split_artifacts,
    select_user_groups,
    split_dataset,
    write_split_artifacts,
)
from replaygauge.services.experiment_service import (
    ModelSettings,
    TrainingData,
    evaluate_lists,
    evaluation_context,
    filter_lists,
    fit_filter_models,
    train_recommender,
)
from replaygauge.services.model_store import load_model, save_model
from replaygauge.services.postfilter_service import to_recommendation_list
from replaygauge.services.report_service import REPORT_FILES, write_reports
from replaygauge.services.signals_service import SummaryTable, rating_frame, summarize_interactions, write_ratings
from replaygauge.services.synth_service import load_truth

logger = logging.getLogger(__name__)

STAGES = ("split", "summarize", "train", "recommend", "classify", "filter", "evaluate")
SUMMARY_FILES = ("training", "visible", "hidden")


def grid_from_config(config: PipelineConfig) -> ExperimentGrid:
    return ExperimentGrid(
        algorithms=config.models.algorithms,
        input_modes=config.models.input_modes,
        rating_functions=config.signals.rating_functions,
        filters=config.filter.filters,
        criteria=config.eval.criteria,
        ranks=config.eval.ranks,
        base_algorithm=config.filter.base_algorithm,
        base_input_mode=config.filter.base_input_mode,
        list_length=config.models.list_length,
        swap_alpha=config.filter.alpha,
        adapted_denominator=config.eval.adapted_denominator,
    )


def settings_from_config(config: PipelineConfig, threads: Optional[int] = None) -> ModelSettings:
    return ModelSettings(
        neighborhood_size=config.knn.neighborhood_size,
        sgd=SGDHyperparameters(**config.sgd.model_dump()),
        als=ALSHyperparameters(**config.als.model_dump()),
        variance_floor=config.classify.variance_floor,
        score_source=config.classify.score_source,
        threads=threads or config.run.threads,
    )


def model_name(algorithm: Algorithm, mode: InputMode) -> str:
    return f"{algorithm.value}__{mode.value}"


class Pipeline:
    """Stage runner over one work directory."""

    def __init__(self, config: PipelineConfig, threads: Optional[int] = None, force: bool = False):
        self.config = config
        self.grid = grid_from_config(config)
        self.settings = settings_from_config(config, threads)
        self.work = Path(config.paths.work_dir)
        self.cache = StageCache(self.work)
        self.force = force
        self.reports: List[EvaluationReport] = []

    # -- layout --------------------------------------------------------------

    def path(self, *parts: str) -> Path:
        return self.work.joinpath(*parts)

    def split_paths(self) -> List[Path]:
        return [self.path("split", name) for name in SPLIT_FILES.values()]

    def summary_paths(self) -> List[Path]:
        return [self.path("summaries", f"{name}.csv") for name in SUMMARY_FILES]

    def configurations(self) -> List[Tuple[Algorithm, InputMode]]:
        """Every (algorithm, input mode) of the grid plus the filter base."""
        pairs = [(a, m) for a in self.grid.algorithms for m in self.grid.input_modes]
        if self.post_filters() and (self.grid.base_algorithm, self.grid.base_input_mode) not in pairs:
            pairs.append((self.grid.base_algorithm, self.grid.base_input_mode))
        return pairs

    def post_filters(self) -> List[FilterKind]:
        return [kind for kind in self.grid.filters if kind is not FilterKind.NONE]

    def model_paths(self) -> List[Path]:
        return [self.path("models", f"{model_name(a, m)}.model") for a, m in self.configurations()]

    def recommendation_paths(self) -> List[Path]:
        return [self.path("recommendations", f"{model_name(a, m)}.csv") for a, m in self.configurations()]

    def classifier_paths(self) -> List[Path]:
        if not self.post_filters():
            return []
        return [
            self.path("classifiers", f"{fn.value}.{suffix}")
            for fn in self.grid.rating_functions
            for suffix in ("model", "gnb")
        ]

    def filtered_paths(self) -> List[Path]:
        return [
            self.path("filtered", f"{kind.value}__{fn.value}.csv")
            for kind in self.post_filters()
            for fn in self.grid.rating_functions
        ]

    def report_paths(self) -> List[Path]:
        names = ["map", "composition", "tables"] + (["json"] if self.config.eval.json_report else [])
        return [self.path("reports", REPORT_FILES[name]) for name in names]

    # -- caching -------------------------------------------------------------

    def _run_stage(
        self,
        stage: str,
        inputs: Sequence[Path],
        params: Dict,
        outputs: Sequence[Path],
        body: Callable[[], None],
    ) -> bool:
        """Run ``body`` unless the stage is fresh; True when it ran."""
        fingerprint = self.cache.fingerprint(inputs, params)
        if not self.force and self.cache.is_fresh(stage, fingerprint, outputs):
            logger.info("[%s] up to date", stage)
            return False
        logger.info("[%s] running", stage)
        body()
        self.cache.record(stage, fingerprint)
        return True

    # -- stages --------------------------------------------------------------

    def split(self) -> bool:
        if self.config.paths.input_log is None:
            raise InvalidParameter("paths.input_log is not set")
        input_log = require_file(self.config.paths.input_log)
        params = self.config.split.model_dump()

        def body() -> None:
            log = filter_min_activity(parse_event_log(input_log), self.config.split.min_events)
            group_a, group_b = select_user_groups(log, self.config.split.seed, self.config.split.group_b_fraction)
            split = split_dataset(group_b, self.config.split.seed, self.config.split.holdout_fraction)
            write_split_artifacts(
                self.path("split"),
                group_a,
                split,
                SplitMeta(format_version=settings.FORMAT_VERSION, **params),
            )

        return self._run_stage("split", [input_log], params, self.split_paths(), body)

    def summarize(self) -> bool:
        params = {"rating_functions": [fn.value for fn in self.grid.rating_functions]}
        ratings = [self.path("ratings", f"{fn.value}.csv") for fn in self.grid.rating_functions]

        def body() -> None:
            group_a, split, _ = read_split_artifacts(self.path("split"))
            tables = {
                "training": summarize_interactions(EventLog.concat([group_a, split.visible])),
                "visible": summarize_interactions(split.visible),
                "hidden": summarize_interactions(split.hidden),
            }
            for name, table in tables.items():
                table.to_csv(self.path("summaries", f"{name}.csv"))
            for fn, path in zip(self.grid.rating_functions, ratings):
                write_ratings(rating_frame(tables["training"], fn), path)

        return self._run_stage("summarize", self.split_paths(), params, self.summary_paths() + ratings, body)

    def training_data(self) -> TrainingData:
        training, visible, hidden = (SummaryTable.from_csv(path) for path in self.summary_paths())
        visible_log = parse_event_log(self.path("split", SPLIT_FILES["visible"]))
        visible_tracks = visible_log.tracks_by_user()
        return TrainingData(
            training=training,
            visible=visible,
            hidden=hidden,
            users=sorted(visible_tracks),
            visible_tracks=visible_tracks,
        )

    def _sgd_rating_fn(self) -> RatingFunction:
        return self.grid.rating_functions[0] if self.grid.rating_functions else RatingFunction.F1

    def train(self) -> bool:
        params = {
            "configurations": [model_name(a, m) for a, m in self.configurations()],
            "models": self.settings.model_dump(mode="json", exclude={"threads"}),
            "sgd_rating_fn": self._sgd_rating_fn().value,
        }

        def body() -> None:
            training = SummaryTable.from_csv(self.path("summaries", "training.csv"))
            for (algorithm, mode), path in zip(self.configurations(), self.model_paths()):
                model = train_recommender(algorithm, training, mode, self.settings, self._sgd_rating_fn())
                save_model(model, path)

        inputs = [self.path("summaries", "training.csv")]
        return self._run_stage("train", inputs, params, self.model_paths(), body)

    def recommend(self) -> bool:
        params = {"list_length": self.grid.list_length}
        inputs = self.model_paths() + [self.path("split", SPLIT_FILES["visible"])]

        def body() -> None:
            visible_log = parse_event_log(self.path("split", SPLIT_FILES["visible"]))
            exclude = visible_log.tracks_by_user()
            for model_path, out in zip(self.model_paths(), self.recommendation_paths()):
                lists = recommender_service.recommend_many(
                    load_model(model_path), sorted(exclude), self.grid.list_length,
                    exclude=exclude, threads=self.settings.threads,
                )
                recommender_service.write_recommendations(lists, out)

        return self._run_stage("recommend", inputs, params, self.recommendation_paths(), body)

    def classify(self) -> bool:
        if not self.post_filters():
            logger.info("[classify] no post-filter selected")
            return False
        params = {
            "rating_functions": [fn.value for fn in self.grid.rating_functions],
            "sgd": self.settings.sgd.model_dump(),
            "variance_floor": self.settings.variance_floor,
            "score_source": self.settings.score_source.value,
        }

        def body() -> None:
            data = self.training_data()
            for fn in self.grid.rating_functions:
                sgd, classifier = fit_filter_models(data, fn, self.settings)
                save_model(sgd, self.path("classifiers", f"{fn.value}.model"))
                save_gnb(classifier, self.path("classifiers", f"{fn.value}.gnb"))

        inputs = self.summary_paths() + [self.path("split", SPLIT_FILES["visible"])]
        return self._run_stage("classify", inputs, params, self.classifier_paths(), body)

    def base_recommendations(self) -> Path:
        name = model_name(self.grid.base_algorithm, self.grid.base_input_mode)
        return self.path("recommendations", f"{name}.csv")

    def filter(self) -> bool:
        if not self.post_filters():
            logger.info("[filter] no post-filter selected")
            return False
        params = {
            "filters": [kind.value for kind in self.post_filters()],
            "alpha": self.grid.swap_alpha,
        }
        inputs = [self.base_recommendations()] + self.classifier_paths()

        def body() -> None:
            base = recommender_service.read_recommendations(self.base_recommendations())
            for fn in self.grid.rating_functions:
                sgd = load_model(self.path("classifiers", f"{fn.value}.model"))
                classifier = load_gnb(self.path("classifiers", f"{fn.value}.gnb"))
                for kind in self.post_filters():
                    filtered = filter_lists(base, sgd, classifier, kind, self.grid.swap_alpha)
                    recommender_service.write_recommendations(
                        [to_recommendation_list(scored) for scored in filtered],
                        self.path("filtered", f"{kind.value}__{fn.value}.csv"),
                    )

        return self._run_stage("filter", inputs, params, self.filtered_paths(), body)

    def evaluate(self) -> bool:
        reports: List[EvaluationReport] = []
        truth_dir = self.config.paths.truth_dir
        params = {
            "criteria": [c.value for c in self.grid.criteria],
            "ranks": self.grid.ranks,
            "adapted_denominator": self.grid.adapted_denominator,
            "json_report": self.config.eval.json_report,
            "configurations": [model_name(a, m) for a, m in self.configurations()],
            "unfiltered": FilterKind.NONE in self.grid.filters,
            "truth_dir": str(truth_dir) if truth_dir else None,
        }
        inputs = self.summary_paths() + self.recommendation_paths() + self.filtered_paths()

        def body() -> None:
            data = self.training_data()
            truth = load_truth(truth_dir) if truth_dir else None
            context = evaluation_context(data, self.grid.criteria, self.grid.adapted_denominator, truth)
            if FilterKind.NONE in self.grid.filters:
                for algorithm in self.grid.algorithms:
                    for mode in self.grid.input_modes:
                        path = self.path("recommendations", f"{model_name(algorithm, mode)}.csv")
                        per_user = recommender_service.lists_by_user(
                            recommender_service.read_recommendations(path)
                        )
                        reports.append(evaluate_lists(per_user, context, self.grid.ranks, algorithm, mode.value))
            for fn in self.grid.rating_functions:
                for kind in self.post_filters():
                    path = self.path("filtered", f"{kind.value}__{fn.value}.csv")
                    per_user = recommender_service.lists_by_user(recommender_service.read_recommendations(path))
                    reports.append(evaluate_lists(
                        per_user, context, self.grid.ranks,
                        self.grid.base_algorithm, self.grid.base_input_mode.value, fn.value, kind,
                    ))
            self.reports = reports
            write_reports(
                self.path("reports"),
                reports,
                json_report=self.config.eval.json_report,
                extra={"config_hash": config_hash(self.config)},
            )

        return self._run_stage("evaluate", inputs, params, self.report_paths(), body)

    def run_meta(self) -> Path:
        return write_meta(self.path("run.meta"), {
            "config_hash": config_hash(self.config),
            "split_seed": self.config.split.seed,
            "sgd_seed": self.config.sgd.seed,
            "als_seed": self.config.als.seed,
            "format_version": settings.FORMAT_VERSION,
            "version": settings.VERSION,
        })

    def run(self, until: str = "evaluate") -> Dict[str, bool]:
        """Run stages in order up to and including ``until``."""
        ran: Dict[str, bool] = {}
        for stage in STAGES[: STAGES.index(until) + 1]:
            ran[stage] = getattr(self, stage)()
        self.run_meta()
        return ran
