import numpy as np
import pytest

from replaygauge.core.errors import InvalidConfig, InvalidParameter
from replaygauge.schemas.synth import GeneratorConfig
from replaygauge.services.recommender_service import tanimoto
from replaygauge.services.signals_service import summarize_interactions
from replaygauge.services.synth_service import (
    check_config,
    generate,
    load_truth,
    validate_against_truth,
    write_generated,
)
from tests.conftest import SMALL_SYNTH


def test_generation_is_deterministic(small_synth):
    log, truth = small_synth
    again_log, again_truth = generate(SMALL_SYNTH)
    assert again_log.to_csv() == log.to_csv()
    assert again_truth.pairs.equals(truth.pairs)


def test_seed_changes_the_log(small_synth):
    log, _ = small_synth
    other, _ = generate(SMALL_SYNTH.model_copy(update={"seed": 12}))
    assert other.to_csv() != log.to_csv()


def test_ids_and_timestamps(small_synth):
    log, _ = small_synth
    frame = log.frame
    assert log.users.tolist() == list(range(1, SMALL_SYNTH.user_count + 1))
    assert frame["track"].between(1, SMALL_SYNTH.track_count).all()
    assert (frame["timestamp"] >= SMALL_SYNTH.start_timestamp).all()
    assert frame.groupby("user")["timestamp"].apply(lambda t: t.is_monotonic_increasing).all()
    assert (log.user_event_counts() >= SMALL_SYNTH.min_events_per_user).all()


def test_forced_skips():
    config = SMALL_SYNTH.model_copy(update={
        "user_count": 20,
        "dislike_threshold": 1.0,
        "like_threshold": 1.0,
        "skip_probability_given_dislike": 1.0,
    })
    log, _ = generate(config)
    assert (log.frame["duration"] < 30).all()


def test_liked_pairs_satisfy_the_like_rule(small_synth):
    log, truth = small_synth
    table = summarize_interactions(log)
    liked = truth.pairs.loc[truth.pairs["liked"] == 1, ["user", "track"]]
    for user, track in liked.itertuples(index=False, name=None):
        assert table.get(user, track).like


def test_default_skip_share():
    log, _ = generate(GeneratorConfig(user_count=500))
    assert len(log) >= 100_000
    share = float((log.frame["duration"] < 30).mean())
    assert 0.31 <= share <= 0.37


@pytest.mark.parametrize("field, value", [
    ("user_count", 0),
    ("track_count", 0),
    ("replay_rate_given_like", 1.0),
    ("skip_probability_given_dislike", 1.5),
    ("track_length_min", 10),
])
def test_invalid_config_names_the_field(field, value):
    with pytest.raises(InvalidConfig) as exc:
        check_config(GeneratorConfig(**{field: value}))
    assert exc.value.field == field


def test_like_threshold_below_dislike_threshold():
    with pytest.raises(InvalidConfig) as exc:
        generate(GeneratorConfig(dislike_threshold=0.9, like_threshold=0.5))
    assert exc.value.field == "like_threshold"


def test_oracle_lists_beat_random_lists(small_synth):
    _, truth = small_synth
    rng = np.random.default_rng(0)
    oracle, random, ceiling, population = {}, {}, [], []
    for user in range(1, 31):
        affinities = truth.latent.user_affinities(user)
        oracle[user] = (np.argsort(-affinities, kind="stable")[:10] + 1).tolist()
        random[user] = (rng.permutation(SMALL_SYNTH.track_count)[:10] + 1).tolist()
        ceiling.append(np.sort(affinities)[-10:].mean())
        population.append(affinities.mean())
    best = validate_against_truth(oracle, truth, 10)
    baseline = validate_against_truth(random, truth, 10)
    assert best == pytest.approx(np.mean(ceiling))
    assert best > baseline
    assert baseline == pytest.approx(np.mean(population), abs=0.1)
    assert validate_against_truth({1: [], 2: []}, truth, 10) is None


def test_affinities_are_uniform_under_listening(small_synth):
    _, truth = small_synth
    shares = truth.latent.listening_shares(5)
    affinities = truth.latent.user_affinities(5)
    assert shares.sum() == pytest.approx(1.0)
    assert affinities.min() > 0.0 and affinities.max() < 1.0
    assert float(shares @ affinities) == pytest.approx(0.5, abs=1e-9)
    order = np.argsort(truth.latent.user_cosines(5), kind="stable")
    assert np.all(np.diff(affinities[order]) > 0)


@pytest.mark.parametrize("track", [0, SMALL_SYNTH.track_count + 1])
def test_truth_rejects_unknown_tracks(small_synth, track):
    _, truth = small_synth
    with pytest.raises(InvalidParameter):
        validate_against_truth({1: [1, track]}, truth, 10)
    with pytest.raises(InvalidParameter):
        truth.affinity(1, track)


def test_truth_rejects_unknown_users(small_synth):
    _, truth = small_synth
    with pytest.raises(InvalidParameter):
        validate_against_truth({0: [1, 2]}, truth, 10)
    with pytest.raises(InvalidParameter):
        truth.affinity(SMALL_SYNTH.user_count + 1, 1)


def test_listeners_of_a_genre_share_tracks():
    config = GeneratorConfig(user_count=300, seed=3)
    log, truth = generate(config)
    sets = {user: set(group) for user, group in log.frame.groupby("user")["track"]}
    main_genre = truth.latent.user_vectors.argmax(axis=1)
    same, other = [], []
    for user in range(1, 61):
        for peer in range(user + 1, 301):
            similarity = tanimoto(sets[user], sets[peer])
            (same if main_genre[user - 1] == main_genre[peer - 1] else other).append(similarity)
    assert np.mean(same) > 0.08
    assert np.mean(same) > 3 * np.mean(other)


def test_truth_files_roundtrip(tmp_path, small_synth):
    log, truth = small_synth
    paths = write_generated(tmp_path, log, truth)
    assert {path.name for path in paths.values()} == {"events.csv", "truth.csv", "generator.meta"}
    loaded = load_truth(tmp_path)
    assert loaded.config == truth.config
    assert loaded.affinity(3, 17) == truth.affinity(3, 17)
    assert len(loaded) == len(truth)
