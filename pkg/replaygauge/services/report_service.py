"""
Report rendering: CSV tables, aligned plain-text tables and JSON for
experiment reports and dataset statistics.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd

from replaygauge.core.artifacts import write_frame
from replaygauge.schemas.evaluation import EvaluationReport
from replaygauge.schemas.recommendations import FilterKind
from replaygauge.schemas.signals import DatasetOverview, StatsReport

logger = logging.getLogger(__name__)

MAP_COLUMNS = (
    "criterion", "k", "algorithm", "input_mode", "rating_fn", "filter",
    "map", "users_evaluated", "users_excluded",
)
COMPOSITION_COLUMNS = (
    "algorithm", "input_mode", "rating_fn", "filter", "k", "events",
    "streams_percent", "like_percent", "skips_percent", "dislike_percent",
    "like_count", "dislike_count",
)
REPORT_FILES = {
    "map": "map.csv",
    "composition": "composition.csv",
    "tables": "tables.txt",
    "json": "report.json",
}


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------

def map_frame(reports: Sequence[EvaluationReport]) -> pd.DataFrame:
    rows = [
        (
            cell.criterion.value, cell.k, report.algorithm.value, report.input_mode,
            report.rating_fn, report.filter.value, cell.map,
            cell.users_evaluated, cell.users_excluded,
        )
        for report in reports
        for cell in report.cells
    ]
    return pd.DataFrame(rows, columns=list(MAP_COLUMNS))


def composition_frame(reports: Sequence[EvaluationReport]) -> pd.DataFrame:
    rows = [
        (
            report.algorithm.value, report.input_mode, report.rating_fn, report.filter.value,
            comp.k, comp.events, comp.streams_percent, comp.like_percent,
            comp.skips_percent, comp.dislike_percent, comp.like_count, comp.dislike_count,
        )
        for report in reports
        for comp in report.compositions
    ]
    return pd.DataFrame(rows, columns=list(COMPOSITION_COLUMNS))


def _pivot(frame: pd.DataFrame, index: List[str]) -> pd.DataFrame:
    frame = frame.assign(column=frame["criterion"] + "@" + frame["k"].astype(str))
    order = list(dict.fromkeys(frame["column"]))
    table = frame.pivot_table(index=index, columns="column", values="map", sort=False)
    return table.loc[:, order]


def baseline_table(reports: Sequence[EvaluationReport]) -> pd.DataFrame:
    """Unfiltered MAP per algorithm and training input."""
    frame = map_frame([r for r in reports if r.filter is FilterKind.NONE])
    if frame.empty:
        return frame
    return _pivot(frame, ["algorithm", "input_mode"])


def filtered_table(reports: Sequence[EvaluationReport]) -> pd.DataFrame:
    """MAP per post-filter and rating function."""
    frame = map_frame([r for r in reports if r.filter is not FilterKind.NONE])
    if frame.empty:
        return frame
    return _pivot(frame, ["filter", "rating_fn"])


def _text_block(title: str, frame: pd.DataFrame, float_format: str = "{:.4f}") -> str:
    if frame.empty:
        return f"{title}\n(none)\n"
    body = frame.to_string(float_format=float_format.format, na_rep="-")
    return f"{title}\n{'=' * len(title)}\n{body}\n"


def render_tables(reports: Sequence[EvaluationReport]) -> str:
    composition = composition_frame(reports)
    blocks = [
        _text_block("MAP without filtering", baseline_table(reports)),
        _text_block("MAP after post-filtering", filtered_table(reports)),
        _text_block(
            "Composition of recommended tracks with hidden interactions "
            "(streams/skips non-exclusive, like/dislike exclusive, % of events)",
            composition.set_index(["algorithm", "input_mode", "rating_fn", "filter", "k"]),
            "{:.1f}",
        ),
    ]
    truth = [
        (r.algorithm.value, r.input_mode, r.rating_fn, r.filter.value, k, value)
        for r in reports
        for k, value in zip([c.k for c in r.compositions], r.truth_affinity)
    ]
    if truth:
        frame = pd.DataFrame(
            truth, columns=["algorithm", "input_mode", "rating_fn", "filter", "k", "mean_affinity"]
        ).set_index(["algorithm", "input_mode", "rating_fn", "filter", "k"])
        blocks.append(_text_block("Mean ground-truth affinity of top-k", frame))
    return "\n".join(blocks)


def render_json(reports: Sequence[EvaluationReport], extra: Optional[Dict] = None) -> str:
    document = {
        **(extra or {}),
        "reports": [report.model_dump(mode="json") for report in reports],
    }
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def write_reports(
    directory: Union[str, Path],
    reports: Sequence[EvaluationReport],
    json_report: bool = True,
    extra: Optional[Dict] = None,
) -> Dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "map": write_frame(map_frame(reports), directory / REPORT_FILES["map"], float_format="%.6f"),
        "composition": write_frame(
            composition_frame(reports), directory / REPORT_FILES["composition"], float_format="%.4f"
        ),
    }
    paths["tables"] = directory / REPORT_FILES["tables"]
    paths["tables"].write_text(render_tables(reports), encoding="utf-8")
    if json_report:
        paths["json"] = directory / REPORT_FILES["json"]
        paths["json"].write_text(render_json(reports, extra), encoding="utf-8")
    logger.info("wrote %d reports to %s", len(reports), directory)
    return paths


# ---------------------------------------------------------------------------
# Dataset statistics
# ---------------------------------------------------------------------------

def stats_frames(report: StatsReport) -> Dict[str, pd.DataFrame]:
    frames = {
        "durations": pd.DataFrame([
            {"duration": f"< {b.threshold_seconds}s", "events": b.count, "share": b.share}
            for b in report.duration_buckets
        ]),
        "replays": pd.DataFrame([
            {"plays": f">= {b.min_plays}", "pairs": b.count, "share": b.share}
            for b in report.replay_buckets
        ]),
        "signals": pd.DataFrame([
            {"signal": name, "count": figure.count, "share": figure.share, "of": figure.denominator}
            for name, figure in (
                ("streams", report.stream_share),
                ("skips", report.skip_share),
                ("likes", report.like_share),
                ("dislikes", report.dislike_share),
            )
        ]),
    }
    if report.rating_histograms:
        frames["ratings"] = pd.DataFrame([
            {"function": h.function.value, "rating": value, "pairs": h.counts[value], "share": h.shares[value]}
            for h in report.rating_histograms
            for value in sorted(h.counts)
        ])
    return frames


def render_stats(report: StatsReport, overview: Sequence[DatasetOverview] = ()) -> str:
    lines = [
        f"events={report.event_count}",
        f"unique_pairs={report.unique_pair_count}",
        f"users={report.user_count}",
        f"tracks={report.track_count}",
        f"mean_duration={'-' if report.mean_duration is None else f'{report.mean_duration:.1f}'}",
        f"median_duration={'-' if report.median_duration is None else f'{report.median_duration:.1f}'}",
        "",
    ]
    if overview:
        frame = pd.DataFrame([o.model_dump() for o in overview]).set_index("name")
        lines.append(_text_block("Dataset", frame))
    for title, frame in stats_frames(report).items():
        index = ["function", "rating"] if title == "ratings" else [frame.columns[0]]
        lines.append(_text_block(title.capitalize(), frame.set_index(index)))
    return "\n".join(lines)


def write_stats(directory: Union[str, Path], report: StatsReport) -> Dict[str, Path]:
    directory = Path(directory)
    return {
        name: write_frame(frame, directory / f"stats_{name}.csv", float_format="%.6f")
        for name, frame in stats_frames(report).items()
    }
