"""
Model persistence.

A model file is a key=value header followed by ``[section]`` blocks of CSV:

    format=replaygauge-model
    kind=mf_sgd
    version=1
    k=50
    ...
    [users]
    id,f1,...,fk
    [items]
    id,f1,...,fk

Floats are written with 17 significant digits and read back with pandas'
round-trip parser, so factor matrices reload bit-identically.
"""
from __future__ import annotations

import io
import logging
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
import pandas as pd
from dotenv import dotenv_values

from replaygauge.core.artifacts import format_meta_value, require_file
from replaygauge.core.config import settings
from replaygauge.core.errors import ArtifactError
from replaygauge.schemas.models import ALSHyperparameters, ModelKind, SGDHyperparameters
from replaygauge.services.factorization_service import FactorModel
from replaygauge.services.recommender_service import KnnModel, Model, PopularityModel
from replaygauge.services.signals_service import InteractionMatrix

logger = logging.getLogger(__name__)

FORMAT_TAG = "replaygauge-model"
FLOAT_FORMAT = "%.17g"


def _csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, lineterminator="\n", float_format=FLOAT_FORMAT)


def _factor_frame(ids: np.ndarray, factors: np.ndarray) -> pd.DataFrame:
    frame = pd.DataFrame(factors, columns=[f"f{j + 1}" for j in range(factors.shape[1])])
    frame.insert(0, "id", ids)
    return frame


def render_model(model: Model) -> str:
    header: Dict[str, object] = {
        "format": FORMAT_TAG,
        "kind": model.kind.value,
        "version": settings.MODEL_FORMAT_VERSION,
    }
    sections: Dict[str, pd.DataFrame] = {}

    if isinstance(model, PopularityModel):
        sections["tracks"] = pd.DataFrame({"track": model.track_ids, "score": model.scores})
    elif isinstance(model, KnnModel):
        header["neighborhood_size"] = model.neighborhood_size
        coo = model.matrix.matrix.tocoo()
        sections["users"] = pd.DataFrame({"user": model.matrix.user_ids})
        sections["tracks"] = pd.DataFrame({"track": model.matrix.track_ids})
        sections["entries"] = pd.DataFrame({
            "user": model.matrix.user_ids[coo.row],
            "track": model.matrix.track_ids[coo.col],
            "value": coo.data,
        })
    else:
        header.update(model.hyperparameters.model_dump())
        header["global_mean"] = model.global_mean
        header["loss_history"] = model.loss_history
        sections["users"] = _factor_frame(model.user_ids, model.user_factors)
        sections["items"] = _factor_frame(model.track_ids, model.item_factors)

    text = "".join(f"{key}={format_meta_value(value)}\n" for key, value in header.items())
    for name, frame in sections.items():
        text += f"[{name}]\n{_csv(frame)}"
    return text


def save_model(model: Model, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_model(model), encoding="utf-8")
    logger.debug("saved %r to %s", model, path)
    return path


def _split_sections(text: str) -> Tuple[Dict[str, str], Dict[str, str]]:
    header_lines, sections, current = [], {}, None
    for line in text.splitlines(keepends=True):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1]
            sections[current] = ""
        elif current is None:
            header_lines.append(line)
        else:
            sections[current] += line
    header = {
        key: value
        for key, value in dotenv_values(stream=io.StringIO("".join(header_lines))).items()
        if value is not None
    }
    return header, sections


def _read_section(sections: Dict[str, str], name: str, path: Path) -> pd.DataFrame:
    if name not in sections:
        raise ArtifactError(f"{path}: missing [{name}] section")
    return pd.read_csv(io.StringIO(sections[name]), float_precision="round_trip")


def load_model(path: Union[str, Path]) -> Model:
    path = require_file(path)
    header, sections = _split_sections(path.read_text(encoding="utf-8"))
    if header.get("format") != FORMAT_TAG:
        raise ArtifactError(f"{path}: not a {FORMAT_TAG} file")
    if header.get("version") != str(settings.MODEL_FORMAT_VERSION):
        raise ArtifactError(f"{path}: unsupported model version {header.get('version')}")
    try:
        kind = ModelKind(header.get("kind"))
    except ValueError:
        raise ArtifactError(f"{path}: unknown model kind {header.get('kind')!r}")

    if kind is ModelKind.POPULARITY:
        tracks = _read_section(sections, "tracks", path)
        return PopularityModel(tracks["track"].to_numpy(), tracks["score"].to_numpy())

    if kind is ModelKind.KNN:
        users = _read_section(sections, "users", path)["user"].to_numpy(dtype=np.int64)
        tracks = _read_section(sections, "tracks", path)["track"].to_numpy(dtype=np.int64)
        entries = _read_section(sections, "entries", path)
        matrix = InteractionMatrix.from_entries(
            entries["user"].to_numpy(dtype=np.int64),
            entries["track"].to_numpy(dtype=np.int64),
            entries["value"].to_numpy(dtype=np.float64),
            binary=True,
            user_ids=users,
            track_ids=tracks,
        )
        return KnnModel(matrix, int(header["neighborhood_size"]))

    users = _read_section(sections, "users", path)
    items = _read_section(sections, "items", path)
    hp_class = SGDHyperparameters if kind is ModelKind.MF_SGD else ALSHyperparameters
    hyperparameters = hp_class(**{key: header[key] for key in hp_class.model_fields if key in header})
    history = header.get("loss_history", "")
    return FactorModel(
        kind,
        users["id"].to_numpy(dtype=np.int64),
        items["id"].to_numpy(dtype=np.int64),
        users.drop(columns="id").to_numpy(dtype=np.float64),
        items.drop(columns="id").to_numpy(dtype=np.float64),
        float(header["global_mean"]),
        hyperparameters,
        [float(value) for value in history.split(",") if value],
    )
