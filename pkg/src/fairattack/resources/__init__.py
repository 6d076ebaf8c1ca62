"""Bundled dataset schemas and JSON Schemas for output files."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from fairattack.dataset import FeatureSchema

DATASETS = ("adult", "bank", "compas", "employment")


def dataset_schema_path(name: str) -> Path:
    if name not in DATASETS:
        raise KeyError(f"unknown dataset {name!r}; choose from {', '.join(DATASETS)}")
    return Path(str(resources.files(__package__) / "datasets" / f"{name}.json"))


def dataset_schema(name: str) -> FeatureSchema:
    return FeatureSchema.from_json(json.loads(dataset_schema_path(name).read_text(encoding="utf-8")))


def json_schema(name: str) -> dict:
    path = resources.files(__package__) / "jsonschema" / f"{name}.json"
    return json.loads(path.read_text(encoding="utf-8"))
