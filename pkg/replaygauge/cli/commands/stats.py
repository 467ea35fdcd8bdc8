"""
stats: distribution statistics of an event log
"""
import argparse

from replaygauge.services.eventlog_service import parse_event_log
from replaygauge.services.report_service import render_stats, write_stats
from replaygauge.services.signals_service import resolve_rating_function, summarize_interactions
from replaygauge.services.stats_service import dataset_overview, dataset_stats


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("stats", parents=[parent], help="print dataset statistics")
    parser.add_argument("log", help="event log CSV")
    parser.add_argument("--ratings", default="", help="comma-separated rating functions to histogram, e.g. f1,f3")
    parser.add_argument("--csv", default=None, help="also write the tables as CSV into this directory")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    functions = [resolve_rating_function(name.strip()) for name in args.ratings.split(",") if name.strip()]
    log = parse_event_log(args.log)
    report = dataset_stats(log, summarize_interactions(log), functions)
    print(render_stats(report, [dataset_overview("log", log)]))
    if args.csv:
        write_stats(args.csv, report)
    return 0
