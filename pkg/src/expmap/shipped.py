"""Example models bundled with the package."""
from __future__ import annotations

import json
from importlib import resources

from .model import MapModel


def shipped_model_names() -> list[str]:
    files = resources.files("expmap").joinpath("data")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def load_shipped(name: str) -> MapModel:
    path = resources.files("expmap").joinpath("data", f"{name}.json")
    if not path.is_file():
        raise FileNotFoundError(f"no shipped model {name!r}; available: {', '.join(shipped_model_names())}")
    return MapModel.from_json(json.loads(path.read_text()))


def shipped_models() -> dict[str, MapModel]:
    return {n: load_shipped(n) for n in shipped_model_names()}
