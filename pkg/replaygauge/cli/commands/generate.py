"""
generate: write a synthetic listening log with its ground truth
"""
import argparse

from replaygauge.core.errors import InvalidConfig, InvalidParameter
from replaygauge.schemas.synth import GeneratorConfig
from replaygauge.services.synth_service import generate, write_generated

# GeneratorConfig field -> command-line flag
FLAGS = {
    "user_count": "--users",
    "track_count": "--tracks",
    "genre_count": "--genres",
    "events_per_user_mean": "--events-mean",
    "events_per_user_sigma": "--events-sigma",
    "min_events_per_user": "--min-events",
    "dislike_threshold": "--dislike-threshold",
    "like_threshold": "--like-threshold",
    "skip_probability_given_dislike": "--skip-dislike",
    "skip_probability_given_neutral": "--skip-neutral",
    "replay_rate_given_like": "--replay-rate",
    "seed": "--seed",
}


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("generate", parents=[parent], help="generate a synthetic listening log")
    defaults = GeneratorConfig()
    for field, flag in FLAGS.items():
        kind = type(getattr(defaults, field))
        parser.add_argument(flag, dest=field, type=kind, default=None, help=f"default {getattr(defaults, field)}")
    parser.add_argument("--out", required=True, help="output directory for events.csv, truth.csv, generator.meta")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    values = {field: getattr(args, field) for field in FLAGS if getattr(args, field) is not None}
    config = GeneratorConfig(**values)
    try:
        log, truth = generate(config)
    except InvalidConfig as exc:
        flag = FLAGS.get(exc.field, exc.field)
        raise InvalidParameter(f"{flag}: {str(exc).split(': ', 1)[-1]}") from exc
    paths = write_generated(args.out, log, truth)
    print(f"[generate] {len(log)} events, {len(log.users)} users -> {paths['events'].parent}")
    return 0
