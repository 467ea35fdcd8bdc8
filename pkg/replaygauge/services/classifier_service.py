"""
Like / Dislike Classifier Service

One-dimensional Gaussian naive Bayes on estimated ratings.  Each class
(like, dislike) is a normal density over the score with its own prior;
densities are combined in the log domain.
"""
from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from replaygauge.core.artifacts import read_meta, write_meta
from replaygauge.core.errors import ArtifactError, InvalidParameter, MissingClass
from replaygauge.schemas.classify import (
    Classification,
    ClassifierMetrics,
    ClassMetrics,
    GnbModel,
    Label,
    LabeledScore,
    ScoreSource,
)
from replaygauge.schemas.signals import RatingFunction
from replaygauge.services.factorization_service import FactorModel, predict_many
from replaygauge.services.signals_service import SummaryTable, rating_values

logger = logging.getLogger(__name__)

DEFAULT_VARIANCE_FLOOR = 1e-6
GNB_FORMAT_VERSION = 1


def fit_gnb(samples: Sequence[LabeledScore], variance_floor: float = DEFAULT_VARIANCE_FLOOR) -> GnbModel:
    """Class means, floored population variances and class frequencies."""
    scores = np.array([sample.score for sample in samples], dtype=np.float64)
    is_like = np.array([sample.label is Label.LIKE for sample in samples], dtype=bool)
    like, dislike = scores[is_like], scores[~is_like]
    if len(like) == 0 or len(dislike) == 0:
        missing = Label.LIKE if len(like) == 0 else Label.DISLIKE
        raise MissingClass(f"no training samples labelled {missing.value}")

    model = GnbModel(
        mu_like=float(like.mean()),
        var_like=max(float(like.var()), variance_floor),
        mu_dislike=float(dislike.mean()),
        var_dislike=max(float(dislike.var()), variance_floor),
        prior_like=len(like) / len(scores),
    )
    logger.info(
        "fitted classifier on %d samples: like N(%.3f, %.3f), dislike N(%.3f, %.3f)",
        len(scores), model.mu_like, model.var_like, model.mu_dislike, model.var_dislike,
    )
    return model


def _log_joint(model: GnbModel, scores: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    log_like = math.log(model.prior_like) + norm.logpdf(scores, model.mu_like, math.sqrt(model.var_like))
    log_dislike = math.log(model.prior_dislike) + norm.logpdf(
        scores, model.mu_dislike, math.sqrt(model.var_dislike)
    )
    return log_like, log_dislike


def classify_scores(model: GnbModel, scores: Iterable[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorised ``classify``.  Returns ``(dislike, posterior_like)``; a score
    is labelled dislike only when its dislike posterior is strictly larger.
    """
    scores = np.asarray(list(scores) if not isinstance(scores, np.ndarray) else scores, dtype=np.float64)
    log_like, log_dislike = _log_joint(model, scores)
    normaliser = logsumexp(np.vstack([log_like, log_dislike]), axis=0)
    return log_dislike > log_like, np.exp(log_like - normaliser)


def classify(model: GnbModel, score: float) -> Classification:
    if not math.isfinite(score):
        raise InvalidParameter(f"score must be finite, got {score}")
    dislike, posterior_like = classify_scores(model, np.array([score]))
    posterior_like = float(posterior_like[0])
    return Classification(
        label=Label.DISLIKE if dislike[0] else Label.LIKE,
        posterior_like=posterior_like,
        posterior_dislike=1.0 - posterior_like,
    )


def evaluate_classifier(model: GnbModel, held_out: Sequence[LabeledScore]) -> ClassifierMetrics:
    """Per-class precision and recall; 0 where a ratio has no denominator."""
    if not held_out:
        raise InvalidParameter("held-out sample is empty")
    truth_dislike = np.array([sample.label is Label.DISLIKE for sample in held_out])
    predicted_dislike, _ = classify_scores(model, np.array([sample.score for sample in held_out]))

    def metrics(truth: np.ndarray, predicted: np.ndarray) -> ClassMetrics:
        hits = int(np.count_nonzero(truth & predicted))
        n_predicted, n_truth = int(predicted.sum()), int(truth.sum())
        return ClassMetrics(
            precision=hits / n_predicted if n_predicted else 0.0,
            recall=hits / n_truth if n_truth else 0.0,
            support=n_truth,
        )

    return ClassifierMetrics(
        like=metrics(~truth_dislike, ~predicted_dislike),
        dislike=metrics(truth_dislike, predicted_dislike),
        samples=len(held_out),
    )


def default_swap_threshold(model: GnbModel) -> float:
    """Like-class mean minus one like-class standard deviation."""
    return model.mu_like - math.sqrt(model.var_like)


def labeled_scores(
    table: SummaryTable,
    source: Union[str, ScoreSource] = ScoreSource.ESTIMATED,
    model: Optional[FactorModel] = None,
    rating_fn: Union[str, RatingFunction, None] = None,
) -> List[LabeledScore]:
    """
    Training samples from the liked or disliked pairs of ``table``.  The
    score is the model estimate r~(u,i) or, with ``source=observed``, the
    mapped rating r(u,i).
    """
    source = ScoreSource(source)
    frame = table.frame
    labelled = frame.loc[frame["like"] | frame["dislike"]]
    if source is ScoreSource.ESTIMATED:
        if model is None:
            raise InvalidParameter("estimated scores need a trained factor model")
        scores = predict_many(model, labelled["user"].to_numpy(), labelled["track"].to_numpy())
    else:
        if rating_fn is None:
            raise InvalidParameter("observed scores need a rating function")
        scores = rating_values(labelled, rating_fn).astype(np.float64)
    labels = np.where(labelled["like"].to_numpy(), Label.LIKE.value, Label.DISLIKE.value)
    return [LabeledScore(score=float(s), label=label) for s, label in zip(scores, labels)]


def save_gnb(model: GnbModel, path: Union[str, Path]) -> Path:
    return write_meta(path, {**model.model_dump(), "version": GNB_FORMAT_VERSION})


def load_gnb(path: Union[str, Path]) -> GnbModel:
    values = read_meta(path)
    if values.get("version") != str(GNB_FORMAT_VERSION):
        raise ArtifactError(f"{path}: unsupported classifier version {values.get('version')}")
    try:
        return GnbModel(**{key: float(values[key]) for key in GnbModel.model_fields})
    except (KeyError, ValueError) as exc:
        raise ArtifactError(f"{path}: invalid classifier file ({exc})") from exc
