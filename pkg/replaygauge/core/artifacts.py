"""
Artifact helpers: key=value sidecar files, deterministic CSV writes and the
content-hash stage cache used by the pipeline.
"""
from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Sequence, Union

import pandas as pd
from dotenv import dotenv_values

from replaygauge.core.errors import ArtifactError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def format_meta_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(format_meta_value(item) for item in value)
    if hasattr(value, "value"):  # Enum
        return str(value.value)
    return str(value)


def render_meta(values: Mapping[str, Any]) -> str:
    return "".join(f"{key}={format_meta_value(value)}\n" for key, value in values.items())


def write_meta(path: PathLike, values: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_meta(values), encoding="utf-8")
    return path


def read_meta(path: PathLike) -> Dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"Metadata file not found: {path}")
    return {key: value for key, value in dotenv_values(path).items() if value is not None}


def write_frame(frame: pd.DataFrame, path: PathLike, **kwargs: Any) -> Path:
    """Write a CSV with LF line endings and no index, so reruns are byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", **kwargs)
    return path


def require_file(path: PathLike) -> Path:
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"Input file not found: {path}")
    return path


def file_digest(paths: Iterable[PathLike]) -> str:
    digest = hashlib.sha256()
    for path in paths:
        path = Path(path)
        digest.update(path.name.encode("utf-8"))
        with path.open("rb") as handle:
            for chunk in iter(lambda: handle.read(1 << 20), b""):
                digest.update(chunk)
    return digest.hexdigest()


class StageCache:
    """
    Remembers, per pipeline stage, the fingerprint of the inputs it was last
    run on.  A stage is skipped when its fingerprint matches and all of its
    outputs still exist.
    """

    def __init__(self, work_dir: PathLike):
        self.cache_dir = Path(work_dir) / ".cache"

    def fingerprint(self, inputs: Sequence[PathLike], params: Optional[Mapping[str, Any]] = None) -> str:
        digest = hashlib.sha256()
        digest.update(file_digest(inputs).encode("ascii"))
        digest.update(json.dumps(params or {}, sort_keys=True, default=str).encode("utf-8"))
        return digest.hexdigest()

    def _meta_path(self, stage: str) -> Path:
        return self.cache_dir / f"{stage}.meta"

    def is_fresh(self, stage: str, fingerprint: str, outputs: Sequence[PathLike]) -> bool:
        meta_path = self._meta_path(stage)
        if not meta_path.is_file():
            return False
        if read_meta(meta_path).get("fingerprint") != fingerprint:
            return False
        return all(Path(output).exists() for output in outputs)

    def record(self, stage: str, fingerprint: str) -> None:
        write_meta(self._meta_path(stage), {"stage": stage, "fingerprint": fingerprint})
        logger.debug("cached stage %s (%s)", stage, fingerprint[:12])
