import math

import numpy as np
import pytest

from replaygauge.core.errors import ArtifactError, InvalidParameter, MissingClass
from replaygauge.schemas.classify import GnbModel, Label, LabeledScore, ScoreSource
from replaygauge.services.classifier_service import (
    classify,
    classify_scores,
    default_swap_threshold,
    evaluate_classifier,
    fit_gnb,
    labeled_scores,
    load_gnb,
    save_gnb,
)
from replaygauge.schemas.models import SGDHyperparameters
from replaygauge.services.factorization_service import train_mf_sgd
from replaygauge.services.signals_service import rating_frame


def samples(likes, dislikes):
    return [LabeledScore(score=s, label=Label.LIKE) for s in likes] + [
        LabeledScore(score=s, label=Label.DISLIKE) for s in dislikes
    ]


@pytest.fixture
def small_model():
    return fit_gnb(samples([4, 5, 5, 4], [1, 2, 1]))


def test_fit_moments(small_model):
    assert small_model.mu_like == 4.5
    assert small_model.var_like == 0.25
    assert small_model.mu_dislike == pytest.approx(4 / 3)
    assert small_model.var_dislike == pytest.approx(2 / 9)
    assert small_model.prior_like == pytest.approx(4 / 7)


def test_fit_matches_brute_force_moments():
    rng = np.random.default_rng(0)
    likes, dislikes = rng.normal(4, 1, 37).tolist(), rng.normal(2, 1, 19).tolist()
    model = fit_gnb(samples(likes, dislikes))
    mean = sum(likes) / len(likes)
    assert model.mu_like == pytest.approx(mean, rel=1e-15)
    assert model.var_like == pytest.approx(sum((x - mean) ** 2 for x in likes) / len(likes), rel=1e-12)
    assert model.prior_like == 37 / 56


def test_high_score_is_liked(small_model):
    result = classify(small_model, 4.8)
    assert result.label is Label.LIKE
    assert result.posterior_like > 0.99
    assert result.posterior_like + result.posterior_dislike == pytest.approx(1.0)


def test_low_score_is_disliked(small_model):
    assert classify(small_model, 1.2).label is Label.DISLIKE


def test_exact_tie_goes_to_like():
    model = GnbModel(mu_like=4.0, var_like=1.0, mu_dislike=2.0, var_dislike=1.0, prior_like=0.5)
    result = classify(model, 3.0)
    assert result.label is Label.LIKE
    assert result.posterior_like == pytest.approx(0.5)


def test_extreme_scores_do_not_underflow(small_model):
    _, posterior = classify_scores(small_model, [-1e3, 1e3])
    assert np.all(np.isfinite(posterior))
    assert np.all((posterior >= 0) & (posterior <= 1))
    dislike, _ = classify_scores(small_model, [0.0, 10.0])
    assert dislike.tolist() == [True, False]


def mirrored(model):
    return GnbModel(
        mu_like=model.mu_dislike,
        var_like=model.var_dislike,
        mu_dislike=model.mu_like,
        var_dislike=model.var_like,
        prior_like=model.prior_dislike,
    )


def random_model(rng, equal_variance=False):
    mu_dislike = float(rng.uniform(1, 3))
    var_like = float(rng.uniform(0.2, 2))
    return GnbModel(
        mu_like=mu_dislike + float(rng.uniform(0.5, 2)),
        var_like=var_like,
        mu_dislike=mu_dislike,
        var_dislike=var_like if equal_variance else float(rng.uniform(0.2, 2)),
        prior_like=float(rng.uniform(0.2, 0.8)),
    )


def test_posteriors_sum_to_one():
    rng = np.random.default_rng(7)
    scores = np.concatenate([rng.uniform(-10, 15, 200), [-1e3, 0.0, 1e3]])
    for _ in range(50):
        model = random_model(rng)
        _, like = classify_scores(model, scores)
        _, dislike = classify_scores(mirrored(model), scores)
        assert np.all(np.abs(like + dislike - 1.0) <= 1e-12)
        for score in scores[:10]:
            result = classify(model, float(score))
            assert abs(result.posterior_like + result.posterior_dislike - 1.0) <= 1e-12


def test_equal_variances_give_one_threshold():
    rng = np.random.default_rng(8)
    grid = np.linspace(-20, 20, 4001)
    for _ in range(50):
        dislike, _ = classify_scores(random_model(rng, equal_variance=True), grid)
        assert np.count_nonzero(np.diff(dislike.astype(np.int64))) == 1
        assert dislike[0] and not dislike[-1]


def test_labels_survive_affine_rescaling():
    rng = np.random.default_rng(9)
    for _ in range(20):
        likes, dislikes = rng.normal(4, 0.8, 60), rng.normal(2, 1.1, 40)
        scale, shift = float(rng.uniform(0.5, 3)), float(rng.uniform(-5, 5))
        model = fit_gnb(samples(likes.tolist(), dislikes.tolist()))
        moved = fit_gnb(samples((likes * scale + shift).tolist(), (dislikes * scale + shift).tolist()))
        points = rng.uniform(-2, 8, 300)
        original, _ = classify_scores(model, points)
        rescaled, _ = classify_scores(moved, points * scale + shift)
        assert np.array_equal(original, rescaled)


def test_missing_class():
    with pytest.raises(MissingClass):
        fit_gnb(samples([4, 5], []))


def test_variance_floor():
    model = fit_gnb(samples([5, 5], [1, 2]))
    assert model.var_like == 1e-6


def test_non_finite_score(small_model):
    with pytest.raises(InvalidParameter):
        classify(small_model, math.nan)


def test_separable_sample_is_learned():
    rng = np.random.default_rng(42)
    train = samples(rng.normal(4.5, 0.5, 1000), rng.normal(1.5, 0.5, 1000))
    held_out = samples(rng.normal(4.5, 0.5, 1000), rng.normal(1.5, 0.5, 1000))
    metrics = evaluate_classifier(fit_gnb(train), held_out)
    for class_metrics in (metrics.like, metrics.dislike):
        assert class_metrics.precision >= 0.95
        assert class_metrics.recall >= 0.95
    assert metrics.samples == 2000


def test_empty_held_out(small_model):
    with pytest.raises(InvalidParameter):
        evaluate_classifier(small_model, [])


def test_default_swap_threshold(small_model):
    assert default_swap_threshold(small_model) == 4.0


def test_observed_scores(toy_table):
    scored = labeled_scores(toy_table, ScoreSource.OBSERVED, rating_fn="f2")
    assert sorted((s.score, s.label) for s in scored) == [
        (1.0, Label.DISLIKE), (5.0, Label.LIKE), (5.0, Label.LIKE),
    ]


def test_estimated_scores_need_a_model(toy_table):
    with pytest.raises(InvalidParameter):
        labeled_scores(toy_table, ScoreSource.ESTIMATED)
    model = train_mf_sgd(rating_frame(toy_table, "f1"), SGDHyperparameters(k=2, epochs=3))
    assert len(labeled_scores(toy_table, "estimated", model=model)) == 3


def test_gnb_file_roundtrip(tmp_path, small_model):
    path = save_gnb(small_model, tmp_path / "f1.gnb")
    assert load_gnb(path) == small_model


def test_gnb_file_version(tmp_path, small_model):
    path = save_gnb(small_model, tmp_path / "f1.gnb")
    path.write_text(path.read_text().replace("version=1", "version=9"))
    with pytest.raises(ArtifactError):
        load_gnb(path)
