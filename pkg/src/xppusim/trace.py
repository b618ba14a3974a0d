"""Trace serialization and comparison.

A trace file is one JSON object per line with stable key order: a meta line
first, then one snapshot per tick. The behavioral projection keeps only the
strategy-independent fields (tick, machine state, mode, plant, digital
outputs and the active error set), so traces from different error-handling
strategies can be compared for equivalent behavior.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable


def snapshot_line(snapshot: dict) -> str:
    return json.dumps(snapshot, separators=(",", ":"))


def meta_line(scenario: str, strategy: str) -> str:
    return json.dumps(
        {"meta": {"scenario": scenario, "strategy": strategy, "format": "v1"}},
        separators=(",", ":"),
    )


def write_trace(path: str | Path, scenario: str, strategy: str, snapshots: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(meta_line(scenario, strategy) + "\n")
        for snapshot in snapshots:
            fh.write(snapshot_line(snapshot) + "\n")


def read_trace(path: str | Path) -> tuple[dict, list[dict]]:
    with open(path, encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or "meta" not in lines[0]:
        raise ValueError(f"not a trace file (missing meta line): {path}")
    return lines[0]["meta"], lines[1:]


def active_error_set(snapshot: dict) -> list[tuple[int, str, str]]:
    return sorted(
        (e["number"], e["severity"], e["origin"])
        for e in snapshot["errors"]
        if e["state"] == "Active"
    )


def behavioral_projection(snapshot: dict) -> dict:
    return {
        "tick": snapshot["tick"],
        "machineState": snapshot["machineState"],
        "mode": snapshot["mode"],
        "plant": snapshot["plant"],
        "digitalOutputs": snapshot["io"]["digitalOutputs"],
        "errorSet": [list(e) for e in active_error_set(snapshot)],
    }


def _first_divergence(a, b, path: str) -> tuple[str, object, object] | None:
    if isinstance(a, dict) and isinstance(b, dict):
        for key in sorted(set(a) | set(b)):
            if key not in a:
                return f"{path}/{key}", None, b[key]
            if key not in b:
                return f"{path}/{key}", a[key], None
            hit = _first_divergence(a[key], b[key], f"{path}/{key}")
            if hit:
                return hit
        return None
    if isinstance(a, list) and isinstance(b, list):
        for i, (x, y) in enumerate(zip(a, b)):
            hit = _first_divergence(x, y, f"{path}[{i}]")
            if hit:
                return hit
        if len(a) != len(b):
            return f"{path}/length", len(a), len(b)
        return None
    if a != b:
        return path, a, b
    return None


@dataclass
class TraceDiff:
    first_divergent_tick: int | None = None
    field_path: str | None = None
    value_a: object = None
    value_b: object = None
    errors_only_a: list = field(default_factory=list)
    errors_only_b: list = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return self.first_divergent_tick is None

    def describe(self) -> str:
        if self.empty:
            return "traces identical under the chosen projection"
        lines = [
            f"first divergence at tick {self.first_divergent_tick}: {self.field_path}",
            f"  a: {self.value_a!r}",
            f"  b: {self.value_b!r}",
        ]
        if self.errors_only_a:
            lines.append(f"  errors only in a: {self.errors_only_a}")
        if self.errors_only_b:
            lines.append(f"  errors only in b: {self.errors_only_b}")
        return "\n".join(lines)


def compare_snapshots(
    snaps_a: list[dict], snaps_b: list[dict], projection: str = "behavioral"
) -> TraceDiff:
    if projection not in ("behavioral", "full"):
        raise ValueError(f"unknown projection: {projection}")
    project = behavioral_projection if projection == "behavioral" else (lambda s: s)
    set_a = set()
    set_b = set()
    for snapshot in snaps_a:
        set_a.update(active_error_set(snapshot))
    for snapshot in snaps_b:
        set_b.update(active_error_set(snapshot))
    diff = TraceDiff(
        errors_only_a=sorted(set_a - set_b),
        errors_only_b=sorted(set_b - set_a),
    )
    for a, b in zip(snaps_a, snaps_b):
        hit = _first_divergence(project(a), project(b), "")
        if hit:
            diff.first_divergent_tick = a["tick"]
            diff.field_path, diff.value_a, diff.value_b = hit
            return diff
    if len(snaps_a) != len(snaps_b):
        shorter = min(len(snaps_a), len(snaps_b))
        diff.first_divergent_tick = shorter
        diff.field_path = "/traceLength"
        diff.value_a = len(snaps_a)
        diff.value_b = len(snaps_b)
        return diff
    if diff.errors_only_a or diff.errors_only_b:
        diff.first_divergent_tick = 0
        diff.field_path = "/errorSet"
    return diff


def compare_trace_files(path_a: str | Path, path_b: str | Path, projection: str) -> TraceDiff:
    meta_a, snaps_a = read_trace(path_a)
    meta_b, snaps_b = read_trace(path_b)
    if meta_a["scenario"] != meta_b["scenario"]:
        raise ValueError(
            f"refusing to compare traces from different scenarios: "
            f"{meta_a['scenario']!r} vs {meta_b['scenario']!r}"
        )
    return compare_snapshots(snaps_a, snaps_b, projection)
