"""
recommend: write top-N lists for every evaluated user
"""
import argparse

from replaygauge.cli.common import add_stage_arguments, pipeline_config
from replaygauge.services.pipeline_service import Pipeline


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("recommend", parents=[parent], help="write top-N lists for every evaluated user")
    add_stage_arguments(parser)
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    pipeline = Pipeline(pipeline_config(args), force=args.force)
    ran = pipeline.recommend()
    print(f"[recommend] {'done' if ran else 'up to date'} ({pipeline.work})")
    return 0
