"""
Flags and helpers shared by the subcommands
"""
import argparse
from typing import Dict, List, Optional

from pydantic import ValidationError

from replaygauge.core.config import PipelineConfig, load_pipeline_config
from replaygauge.core.errors import InvalidParameter


def common_parser() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", type=str, default=None, help="flat section.key=value config file")
    parent.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config key, e.g. --set split.seed=11 (repeatable)",
    )
    parent.add_argument("--threads", type=int, default=None, help="worker threads for parallel stages")
    parent.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    return parent


def add_stage_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", default=None, help="event log CSV (paths.input_log)")
    parser.add_argument("--work", default=None, help="work directory (paths.work_dir)")
    parser.add_argument("--truth", default=None, help="generator output directory (paths.truth_dir)")
    parser.add_argument("--force", action="store_true", help="re-run even if the stage is up to date")


def parse_overrides(pairs: List[str]) -> Dict[str, str]:
    overrides = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise InvalidParameter(f"--set expects KEY=VALUE, got {pair!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    overrides = parse_overrides(args.overrides)
    for flag, key in (("input", "paths.input_log"), ("work", "paths.work_dir"), ("truth", "paths.truth_dir")):
        value: Optional[str] = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if args.threads is not None:
        overrides["run.threads"] = str(args.threads)
    return load_pipeline_config(args.config, overrides)


def describe_validation_error(exc: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in error['loc'])}: {error['msg']}" for error in exc.errors()
    )
