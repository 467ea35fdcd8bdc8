"""
filter: apply the RANK / DEL / SWAP post-filters
"""
import argparse

from replaygauge.cli.common import add_stage_arguments, pipeline_config
from replaygauge.services.pipeline_service import Pipeline


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("filter", parents=[parent], help="apply the RANK / DEL / SWAP post-filters")
    add_stage_arguments(parser)
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    pipeline = Pipeline(pipeline_config(args), force=args.force)
    ran = pipeline.filter()
    print(f"[filter] {'done' if ran else 'up to date'} ({pipeline.work})")
    return 0
