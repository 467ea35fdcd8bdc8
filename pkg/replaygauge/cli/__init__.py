"""
Command-line interface

Every subcommand lives in ``replaygauge.cli.commands`` and registers itself
on the shared parser.
"""
import argparse
import sys
from typing import List, Optional

from pydantic import ValidationError

from replaygauge.cli.commands import (
    classify,
    evaluate,
    filter,
    generate,
    pipeline,
    recommend,
    split,
    stats,
    summarize,
    train,
)
from replaygauge.cli.common import common_parser, describe_validation_error
from replaygauge.core.config import settings
from replaygauge.core.errors import ReplayGaugeError
from replaygauge.core.logging import configure_logging

COMMANDS = (generate, stats, split, summarize, train, recommend, classify, filter, evaluate, pipeline)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.PROJECT_NAME,
        description="Replay-aware evaluation of music recommenders on listening logs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    parent = common_parser()
    for command in COMMANDS:
        command.register(subparsers, parent)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args) or 0
    except ValidationError as exc:
        print(f"[{args.command}] invalid configuration: {describe_validation_error(exc)}", file=sys.stderr)
        return 2
    except ReplayGaugeError as exc:
        print(f"[{args.command}] error: {exc}", file=sys.stderr)
        return 1
