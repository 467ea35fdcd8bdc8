"""
Matrix Factorization Service

Two latent-factor models share one ``FactorModel`` container:

* ``train_mf_sgd``: plain matrix factorization of 1..5 ratings around the
  global mean, fitted by stochastic gradient descent;
* ``train_als_implicit``: confidence-weighted factorization of play counts,
  fitted by alternating exact ridge solves.

Both record their training objective after every pass in ``loss_history``.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve

from replaygauge.core.errors import EmptyRatings, InvalidHyperparameter, NegativeCounts
from replaygauge.schemas.models import ALSHyperparameters, ModelKind, SGDHyperparameters
from replaygauge.schemas.signals import RatingTriple
from replaygauge.services.signals_service import InteractionMatrix

logger = logging.getLogger(__name__)

RATING_MIN, RATING_MAX = 1.0, 5.0


class FactorModel:
    """
    Trained user / item factors.  ``global_mean`` is the rating mean for SGD
    models and 0 for ALS models; it is also the cold-start prediction.
    """

    def __init__(
        self,
        kind: ModelKind,
        user_ids: np.ndarray,
        track_ids: np.ndarray,
        user_factors: np.ndarray,
        item_factors: np.ndarray,
        global_mean: float,
        hyperparameters: Union[SGDHyperparameters, ALSHyperparameters],
        loss_history: Optional[List[float]] = None,
    ):
        self.kind = kind
        self.user_ids = np.asarray(user_ids, dtype=np.int64)
        self.track_ids = np.asarray(track_ids, dtype=np.int64)
        self.user_factors = user_factors
        self.item_factors = item_factors
        self.global_mean = float(global_mean)
        self.hyperparameters = hyperparameters
        self.loss_history = list(loss_history or [])
        self.user_pos = {int(user): pos for pos, user in enumerate(self.user_ids)}
        self.track_pos = {int(track): pos for pos, track in enumerate(self.track_ids)}

    @property
    def k(self) -> int:
        return self.user_factors.shape[1]

    def user_scores(self, user: int) -> Optional[np.ndarray]:
        """Predicted score of every track for ``user``; None if unknown."""
        position = self.user_pos.get(int(user))
        if position is None:
            return None
        return self.global_mean + self.item_factors @ self.user_factors[position]

    def __repr__(self) -> str:
        return (
            f"FactorModel({self.kind.value}, users={len(self.user_ids)}, "
            f"tracks={len(self.track_ids)}, k={self.k})"
        )


def predict_rating(model: FactorModel, user: int, track: int, clamp: bool = False) -> float:
    """
    Estimated rating r~(u,i).  Unknown users or tracks get the model's
    global mean.  ``clamp`` limits the value to [1, 5] for reporting.
    """
    u, i = model.user_pos.get(int(user)), model.track_pos.get(int(track))
    if u is None or i is None:
        value = model.global_mean
    else:
        value = model.global_mean + float(model.user_factors[u] @ model.item_factors[i])
    if clamp:
        value = min(max(value, RATING_MIN), RATING_MAX)
    return value


def predict_many(model: FactorModel, users: np.ndarray, tracks: np.ndarray) -> np.ndarray:
    """Vectorised ``predict_rating`` for aligned user / track arrays."""
    out = np.full(len(users), model.global_mean, dtype=np.float64)
    u = np.array([model.user_pos.get(int(x), -1) for x in users], dtype=np.int64)
    i = np.array([model.track_pos.get(int(x), -1) for x in tracks], dtype=np.int64)
    known = (u >= 0) & (i >= 0)
    if known.any():
        out[known] += np.einsum(
            "ij,ij->i", model.user_factors[u[known]], model.item_factors[i[known]]
        )
    return out


# ---------------------------------------------------------------------------
# SGD
# ---------------------------------------------------------------------------

def _ratings_frame(ratings: Union[pd.DataFrame, Iterable[RatingTriple]]) -> pd.DataFrame:
    if isinstance(ratings, pd.DataFrame):
        return ratings.loc[:, ["user", "track", "rating"]]
    rows = [(r.user, r.track, r.rating) for r in ratings]
    return pd.DataFrame(rows, columns=["user", "track", "rating"])


def _check_sgd(hp: SGDHyperparameters) -> None:
    if hp.k < 1:
        raise InvalidHyperparameter(f"k must be >= 1, got {hp.k}")
    if hp.epochs < 0:
        raise InvalidHyperparameter(f"epochs must be >= 0, got {hp.epochs}")
    if not hp.learning_rate > 0:
        raise InvalidHyperparameter(f"learning_rate must be > 0, got {hp.learning_rate}")
    if hp.regularization < 0:
        raise InvalidHyperparameter(f"regularization must be >= 0, got {hp.regularization}")
    if hp.init_scale < 0:
        raise InvalidHyperparameter(f"init_scale must be >= 0, got {hp.init_scale}")


def sgd_objective(
    user_factors: np.ndarray,
    item_factors: np.ndarray,
    global_mean: float,
    users: np.ndarray,
    items: np.ndarray,
    ratings: np.ndarray,
    regularization: float,
) -> float:
    """
    Sum over training ratings of squared error plus
    ``regularization * (|p_u|^2 + |q_i|^2)``; ``users`` / ``items`` are row
    positions into the factor matrices.
    """
    P, Q = user_factors[users], item_factors[items]
    errors = ratings - global_mean - np.einsum("ij,ij->i", P, Q)
    penalty = np.sum(P * P) + np.sum(Q * Q)
    return float(np.sum(errors * errors) + regularization * penalty)


def sgd_gradient(
    user_factors: np.ndarray,
    item_factors: np.ndarray,
    global_mean: float,
    users: np.ndarray,
    items: np.ndarray,
    ratings: np.ndarray,
    regularization: float,
):
    """Gradient of ``sgd_objective`` with respect to both factor matrices."""
    P, Q = user_factors[users], item_factors[items]
    errors = ratings - global_mean - np.einsum("ij,ij->i", P, Q)
    grad_p = np.zeros_like(user_factors)
    grad_q = np.zeros_like(item_factors)
    np.add.at(grad_p, users, -2.0 * errors[:, None] * Q + 2.0 * regularization * P)
    np.add.at(grad_q, items, -2.0 * errors[:, None] * P + 2.0 * regularization * Q)
    return grad_p, grad_q


def train_mf_sgd(
    ratings: Union[pd.DataFrame, Sequence[RatingTriple]],
    hyperparameters: Optional[SGDHyperparameters] = None,
) -> FactorModel:
    """
    Fit r(u,i) ~ mu + p_u . q_i.  Factors start uniform in
    [-init_scale, init_scale] and every epoch visits the ratings in a fresh
    seeded permutation.
    """
    hp = hyperparameters or SGDHyperparameters()
    _check_sgd(hp)
    frame = _ratings_frame(ratings)
    if len(frame) == 0:
        raise EmptyRatings("cannot train a factor model without ratings")

    user_ids = np.unique(frame["user"].to_numpy(dtype=np.int64))
    track_ids = np.unique(frame["track"].to_numpy(dtype=np.int64))
    users = np.searchsorted(user_ids, frame["user"].to_numpy(dtype=np.int64))
    items = np.searchsorted(track_ids, frame["track"].to_numpy(dtype=np.int64))
    values = frame["rating"].to_numpy(dtype=np.float64)
    mu = float(values.mean())

    rng = np.random.default_rng(hp.seed)
    P = rng.uniform(-hp.init_scale, hp.init_scale, size=(len(user_ids), hp.k))
    Q = rng.uniform(-hp.init_scale, hp.init_scale, size=(len(track_ids), hp.k))
    lr, reg = hp.learning_rate, hp.regularization

    history: List[float] = []
    for epoch in range(hp.epochs):
        for j in rng.permutation(len(values)):
            u, i = users[j], items[j]
            pu, qi = P[u], Q[i]
            err = values[j] - mu - pu @ qi
            new_p = pu + lr * (err * qi - reg * pu)
            Q[i] = qi + lr * (err * pu - reg * qi)
            P[u] = new_p
        history.append(sgd_objective(P, Q, mu, users, items, values, reg))
        logger.debug("sgd epoch %d: objective %.6f", epoch + 1, history[-1])

    if not (np.isfinite(P).all() and np.isfinite(Q).all()):
        raise InvalidHyperparameter("SGD diverged; lower the learning rate")
    logger.info(
        "trained mf_sgd on %d ratings (k=%d, epochs=%d)", len(values), hp.k, hp.epochs
    )
    return FactorModel(ModelKind.MF_SGD, user_ids, track_ids, P, Q, mu, hp, history)


# ---------------------------------------------------------------------------
# Implicit ALS
# ---------------------------------------------------------------------------

def _check_als(hp: ALSHyperparameters) -> None:
    if hp.k < 1:
        raise InvalidHyperparameter(f"k must be >= 1, got {hp.k}")
    if hp.sweeps < 0:
        raise InvalidHyperparameter(f"sweeps must be >= 0, got {hp.sweeps}")
    if not hp.regularization > 0:
        raise InvalidHyperparameter(f"regularization must be > 0, got {hp.regularization}")
    if not hp.alpha > 0:
        raise InvalidHyperparameter(f"alpha must be > 0, got {hp.alpha}")


def als_objective(
    counts: sp.csr_matrix,
    user_factors: np.ndarray,
    item_factors: np.ndarray,
    regularization: float,
    alpha: float,
) -> float:
    """
    sum_ui c_ui (p_ui - x_u . y_i)^2 + regularization * (|X|^2 + |Y|^2)
    with p_ui = [count > 0] and c_ui = 1 + alpha * count.
    """
    X, Y = user_factors, item_factors
    total = float(np.sum((X.T @ X) * (Y.T @ Y)))
    coo = counts.tocoo()
    if coo.nnz:
        s = np.einsum("ij,ij->i", X[coo.row], Y[coo.col])
        confidence = 1.0 + alpha * coo.data
        total += float(np.sum(confidence * (1.0 - s) ** 2 - s * s))
    return total + regularization * float(np.sum(X * X) + np.sum(Y * Y))


def _solve_rows(
    counts: sp.csr_matrix,
    fixed: np.ndarray,
    gram: np.ndarray,
    regularization: float,
    alpha: float,
    rows: range,
) -> np.ndarray:
    k = fixed.shape[1]
    ridge = regularization * np.eye(k)
    out = np.empty((len(rows), k))
    for n, row in enumerate(rows):
        start, end = counts.indptr[row], counts.indptr[row + 1]
        cols, values = counts.indices[start:end], counts.data[start:end]
        Yc = fixed[cols]
        confidence = alpha * values
        A = gram + (Yc.T * confidence) @ Yc + ridge
        b = Yc.T @ (1.0 + confidence)
        out[n] = cho_solve(cho_factor(A), b)
    return out


def _als_half_sweep(
    counts: sp.csr_matrix,
    fixed: np.ndarray,
    regularization: float,
    alpha: float,
    pool: Optional[ThreadPoolExecutor],
    threads: int,
) -> np.ndarray:
    gram = fixed.T @ fixed
    n_rows = counts.shape[0]
    if pool is None or n_rows < 2:
        return _solve_rows(counts, fixed, gram, regularization, alpha, range(n_rows))
    bounds = np.linspace(0, n_rows, threads + 1).astype(int)
    chunks = [range(bounds[c], bounds[c + 1]) for c in range(threads)]
    parts = pool.map(
        lambda rows: _solve_rows(counts, fixed, gram, regularization, alpha, rows), chunks
    )
    return np.vstack(list(parts))


def train_als_implicit(
    matrix: InteractionMatrix,
    hyperparameters: Optional[ALSHyperparameters] = None,
    threads: int = 1,
) -> FactorModel:
    """
    Alternate exact ridge solves for user factors (items fixed) and item
    factors (users fixed).  Rows are independent within a half-sweep, so
    ``threads`` > 1 solves them in parallel with identical results.
    """
    hp = hyperparameters or ALSHyperparameters()
    _check_als(hp)
    counts = matrix.matrix.astype(np.float64).tocsr()
    if counts.nnz and (counts.data < 0).any():
        raise NegativeCounts("ALS needs non-negative interaction counts")

    rng = np.random.default_rng(hp.seed)
    X = rng.normal(0.0, hp.init_scale, size=(counts.shape[0], hp.k))
    Y = rng.normal(0.0, hp.init_scale, size=(counts.shape[1], hp.k))
    counts_t = counts.T.tocsr()

    history: List[float] = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for sweep in range(hp.sweeps):
            X = _als_half_sweep(counts, Y, hp.regularization, hp.alpha, pool, threads)
            history.append(als_objective(counts, X, Y, hp.regularization, hp.alpha))
            Y = _als_half_sweep(counts_t, X, hp.regularization, hp.alpha, pool, threads)
            history.append(als_objective(counts, X, Y, hp.regularization, hp.alpha))
            logger.debug("als sweep %d: objective %.6f", sweep + 1, history[-1])
    finally:
        if pool is not None:
            pool.shutdown()

    logger.info(
        "trained als on %s (k=%d, sweeps=%d)", matrix, hp.k, hp.sweeps
    )
    return FactorModel(ModelKind.ALS, matrix.user_ids, matrix.track_ids, X, Y, 0.0, hp, history)
