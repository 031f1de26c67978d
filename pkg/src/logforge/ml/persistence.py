"""Model artifacts persisted as <name>.model.json with a schema version."""

from __future__ import annotations

import json
from pathlib import Path

from .logreg import LogRegModel
from .pca import PcaModel
from .table import MLError

SCHEMA_VERSION = 1


def model_path(model_dir: str | Path, name: str) -> Path:
    name = name if name.endswith(".model.json") else f"{name}.model.json"
    return Path(model_dir) / name


def save_model(model, model_dir: str | Path, name: str, extra: dict | None = None) -> Path:
    if isinstance(model, PcaModel):
        kind = "pca"
    elif isinstance(model, LogRegModel):
        kind = "logreg"
    else:
        raise MLError(f"cannot persist {type(model).__name__}")
    payload = {"schema_version": SCHEMA_VERSION, "type": kind, "model": model.to_dict()}
    if extra:
        payload.update(extra)
    path = model_path(model_dir, name)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload))
    return path


def load_model(model_dir: str | Path, name: str):
    path = model_path(model_dir, name)
    try:
        payload = json.loads(path.read_text())
    except OSError as exc:
        raise MLError(f"no model named {name!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MLError(f"model file {path} is corrupt: {exc}") from exc
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise MLError(f"unsupported model schema in {path}")
    if payload["type"] == "pca":
        return PcaModel.from_dict(payload["model"])
    if payload["type"] == "logreg":
        return LogRegModel.from_dict(payload["model"])
    raise MLError(f"unknown model type {payload['type']!r}")
