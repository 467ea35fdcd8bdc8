"""
pipeline: run every stage from split to evaluate
"""
import argparse

from replaygauge.cli.common import add_stage_arguments, pipeline_config
from replaygauge.services.pipeline_service import STAGES, Pipeline


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("pipeline", parents=[parent], help="run the whole experiment")
    add_stage_arguments(parser)
    parser.add_argument("--until", choices=STAGES, default="evaluate", help="last stage to run")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    pipeline = Pipeline(pipeline_config(args), force=args.force)
    ran = pipeline.run(args.until)
    for stage, did_run in ran.items():
        print(f"[{stage}] {'done' if did_run else 'up to date'}")
    print(f"[pipeline] artifacts in {pipeline.work}")
    return 0
