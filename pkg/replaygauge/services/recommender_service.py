"""
Recommender Service

Popularity and user-based KNN (Tanimoto similarity over binary listening
sets), plus one top-N interface shared with the factor models.

Ranking rule everywhere: score descending, then track id ascending.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from functools import cached_property
from pathlib import Path
from typing import AbstractSet, Collection, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from replaygauge.core.artifacts import require_file, write_frame
from replaygauge.core.errors import ArtifactError, InvalidHyperparameter, InvalidParameter, NonBinaryMatrix, UnknownUser
from replaygauge.schemas.models import ModelKind
from replaygauge.schemas.recommendations import RecommendationList, RecommendedItem
from replaygauge.services.factorization_service import FactorModel
from replaygauge.services.signals_service import InteractionMatrix

logger = logging.getLogger(__name__)

DEFAULT_NEIGHBORHOOD_SIZE = 100
SCORE_DECIMALS = 12


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------

class PopularityModel:
    """Tracks ranked by number of distinct listeners."""

    kind = ModelKind.POPULARITY

    def __init__(self, track_ids: np.ndarray, scores: np.ndarray):
        self.track_ids = np.asarray(track_ids, dtype=np.int64)
        self.scores = np.asarray(scores, dtype=np.float64)

    @property
    def ranked_tracks(self) -> List[tuple]:
        return list(zip(self.track_ids.tolist(), self.scores.tolist()))

    def __repr__(self) -> str:
        return f"PopularityModel(tracks={len(self.track_ids)})"


class KnnModel:
    """User-based KNN over a binary interaction matrix."""

    kind = ModelKind.KNN

    def __init__(self, matrix: InteractionMatrix, neighborhood_size: int = DEFAULT_NEIGHBORHOOD_SIZE):
        self.matrix = matrix
        self.neighborhood_size = neighborhood_size

    @cached_property
    def row_sizes(self) -> np.ndarray:
        return np.diff(self.matrix.matrix.indptr).astype(np.float64)

    def __repr__(self) -> str:
        return f"KnnModel({self.matrix!r}, neighborhood_size={self.neighborhood_size})"


Model = Union[PopularityModel, KnnModel, FactorModel]


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def train_popularity(matrix: InteractionMatrix) -> PopularityModel:
    listeners = np.diff(matrix.matrix.tocsc().indptr).astype(np.float64)
    keep = listeners > 0
    tracks, scores = matrix.track_ids[keep], listeners[keep]
    order = np.lexsort((tracks, -scores))
    model = PopularityModel(tracks[order], scores[order])
    logger.info("trained popularity over %d tracks", len(model.track_ids))
    return model


def tanimoto(set_a: AbstractSet, set_b: AbstractSet) -> float:
    """|A & B| / |A | B|; 0 when both sets are empty."""
    union = len(set_a | set_b)
    if union == 0:
        return 0.0
    return len(set_a & set_b) / union


def train_user_knn(matrix: InteractionMatrix, neighborhood_size: int = DEFAULT_NEIGHBORHOOD_SIZE) -> KnnModel:
    if neighborhood_size < 1:
        raise InvalidHyperparameter(f"neighborhood_size must be >= 1, got {neighborhood_size}")
    if not matrix.binary or (matrix.nnz and not np.all(matrix.matrix.data == 1.0)):
        raise NonBinaryMatrix("user KNN needs a binary interaction matrix")
    model = KnnModel(matrix, neighborhood_size)
    logger.info("trained %r", model)
    return model


def user_similarities(model: KnnModel, user: int) -> np.ndarray:
    """Tanimoto similarity of ``user`` to every matrix row (0 for itself)."""
    position = model.matrix.user_pos.get(int(user))
    if position is None:
        raise UnknownUser(user)
    X = model.matrix.matrix
    overlap = np.asarray((X @ X[position].T).todense()).ravel()
    sizes = model.row_sizes
    union = sizes + sizes[position] - overlap
    similarity = np.divide(overlap, union, out=np.zeros_like(overlap), where=union > 0)
    similarity[position] = 0.0
    return similarity


def knn_scores(model: KnnModel, user: int) -> np.ndarray:
    """
    Candidate score per track column: the summed similarity of the
    neighbours who played it.  Neighbours are the ``neighborhood_size`` most
    similar users with positive similarity, ties by ascending user id.
    """
    similarity = user_similarities(model, user)
    candidates = np.flatnonzero(similarity > 0)
    if len(candidates) == 0:
        return np.zeros(model.matrix.shape[1])
    order = np.lexsort((candidates, -similarity[candidates]))
    neighbours = candidates[order[: model.neighborhood_size]]
    return np.asarray(model.matrix.matrix[neighbours].T @ similarity[neighbours]).ravel()


# ---------------------------------------------------------------------------
# Top-N
# ---------------------------------------------------------------------------

def top_n(
    track_ids: np.ndarray,
    scores: np.ndarray,
    n: int,
    exclude: Collection[int] = (),
) -> List[RecommendedItem]:
    """Best ``n`` tracks not in ``exclude`` by (score desc, track asc)."""
    track_ids = np.asarray(track_ids, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    if len(exclude):
        keep = ~np.isin(track_ids, np.fromiter(exclude, dtype=np.int64, count=len(exclude)))
        track_ids, scores = track_ids[keep], scores[keep]
    order = np.lexsort((track_ids, -np.round(scores, SCORE_DECIMALS)))[:n]
    return [RecommendedItem(track=int(t), score=float(s)) for t, s in zip(track_ids[order], scores[order])]


def recommend_knn(model: KnnModel, user: int, n: int, exclude: Collection[int] = ()) -> RecommendationList:
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    scores = knn_scores(model, user)
    played = scores > 0
    items = top_n(model.matrix.track_ids[played], scores[played], n, exclude)
    return RecommendationList(user=int(user), items=items)


def recommend_scores(
    model: Union[PopularityModel, FactorModel],
    user: int,
    n: int,
    exclude: Collection[int] = (),
    strict: bool = False,
) -> RecommendationList:
    """
    Top-N for popularity and factor models.  A user unknown to a factor
    model gets the cold-start score for every track (so ties ordered by id),
    unless ``strict`` is set.
    """
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    if isinstance(model, PopularityModel):
        items = top_n(model.track_ids, model.scores, n, exclude)
        return RecommendationList(user=int(user), items=items)

    scores = model.user_scores(user)
    if scores is None:
        if strict:
            raise UnknownUser(user)
        scores = np.full(len(model.track_ids), model.global_mean)
    return RecommendationList(user=int(user), items=top_n(model.track_ids, scores, n, exclude))


def recommend(
    model: Model,
    user: int,
    n: int,
    exclude: Collection[int] = (),
    strict: bool = False,
) -> RecommendationList:
    if isinstance(model, KnnModel):
        return recommend_knn(model, user, n, exclude)
    return recommend_scores(model, user, n, exclude, strict=strict)


def recommend_many(
    model: Model,
    users: Iterable[int],
    n: int,
    exclude: Optional[Mapping[int, Collection[int]]] = None,
    threads: int = 1,
    strict: bool = False,
) -> List[RecommendationList]:
    """Lists for ``users`` in ascending user order."""
    users = sorted({int(user) for user in users})
    exclude = exclude or {}

    def run(user: int) -> RecommendationList:
        return recommend(model, user, n, exclude.get(user, ()), strict=strict)

    if threads > 1 and len(users) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            lists = list(pool.map(run, users))
    else:
        lists = [run(user) for user in users]
    logger.info("recommended top-%d for %d users with %s", n, len(users), type(model).__name__)
    return lists


def lists_by_user(lists: Sequence[RecommendationList]) -> Dict[int, List[int]]:
    return {rec.user: rec.tracks for rec in lists}


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

LIST_COLUMNS = ("user", "rank", "track", "score")


def recommendations_frame(lists: Sequence[RecommendationList]) -> pd.DataFrame:
    """``user, rank, track, score`` rows; ranks start at 1."""
    rows = [
        (rec.user, rank, item.track, item.score)
        for rec in lists
        for rank, item in enumerate(rec.items, start=1)
    ]
    return pd.DataFrame(rows, columns=list(LIST_COLUMNS))


def write_recommendations(lists: Sequence[RecommendationList], path: Union[str, Path]) -> Path:
    return write_frame(recommendations_frame(lists), path, float_format="%.17g")


def read_recommendations(path: Union[str, Path]) -> List[RecommendationList]:
    frame = pd.read_csv(require_file(path), float_precision="round_trip")
    if list(frame.columns) != list(LIST_COLUMNS):
        raise ArtifactError(f"{path}: expected columns {','.join(LIST_COLUMNS)}")
    frame = frame.sort_values(["user", "rank"], kind="mergesort")
    return [
        RecommendationList(
            user=int(user),
            items=[
                RecommendedItem(track=int(track), score=float(score))
                for track, score in zip(group["track"].tolist(), group["score"].tolist())
            ],
        )
        for user, group in frame.groupby("user", sort=True)
    ]
