"""
Pydantic schemas for recommender model families and their hyperparameters
"""
from enum import Enum

from pydantic import BaseModel


class Algorithm(str, Enum):
    POPULARITY = "popularity"
    UB_KNN     = "ub_knn"
    ALS        = "als"
    MF_SGD     = "mf_sgd"


class ModelKind(str, Enum):
    POPULARITY = "popularity"
    KNN        = "knn"
    MF_SGD     = "mf_sgd"
    ALS        = "als"


class SGDHyperparameters(BaseModel):
    # Range checks live in the trainer so they surface as InvalidHyperparameter.
    k:              int   = 50
    epochs:         int   = 20
    regularization: float = 0.05
    learning_rate:  float = 0.005
    init_scale:     float = 0.05
    seed:           int   = 0


class ALSHyperparameters(BaseModel):
    k:              int   = 50
    sweeps:         int   = 20
    regularization: float = 0.07
    alpha:          float = 40.0
    init_scale:     float = 0.01
    seed:           int   = 0
