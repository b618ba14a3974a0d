"""Bundled data files: error catalog, reaction matrices, family model, scenarios."""

from __future__ import annotations

import json
from importlib import resources


def load_json(name: str):
    ref = resources.files(__package__).joinpath(name)
    with ref.open("r", encoding="utf-8") as fh:
        return json.load(fh)


def data_path(name: str) -> str:
    return str(resources.files(__package__).joinpath(name))


def list_scenarios() -> list[str]:
    ref = resources.files(__package__).joinpath("scenarios")
    names = [p.name[: -len(".json")] for p in ref.iterdir() if p.name.endswith(".json")]
    return sorted(names)
