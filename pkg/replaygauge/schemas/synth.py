"""
Pydantic schema for the synthetic listening-log generator
"""
from pydantic import BaseModel


class GeneratorConfig(BaseModel):
    """
    Parameters of the latent-genre listening simulator.

    Range checks are done by ``synth_service.check_config`` so that they
    surface as ``InvalidConfig`` naming the offending field.
    """
    user_count:  int = 2000
    track_count: int = 5000
    genre_count: int = 20

    # events per user ~ lognormal with this mean, floored at min_events_per_user
    events_per_user_mean:  float = 250.0
    events_per_user_sigma: float = 0.5
    min_events_per_user:   int   = 10

    # Dirichlet concentrations of the latent genre vectors
    user_concentration:  float = 0.3
    track_concentration: float = 0.2

    # track draw weight = affinity_softening + cosine ** affinity_sharpness
    affinity_softening: float = 0.001
    affinity_sharpness: float = 4.0

    # thresholds on the listening-weighted affinity rank
    dislike_threshold: float = 0.42
    like_threshold:    float = 0.8

    skip_probability_given_dislike: float = 0.95
    skip_probability_given_neutral: float = 0.15
    replay_rate_given_like:         float = 0.4

    track_length_mean: float = 210.0
    track_length_std:  float = 30.0
    track_length_min:  int   = 90
    track_length_max:  int   = 420

    start_timestamp:  int = 1472688000
    max_gap_seconds:  int = 900

    seed: int = 7
