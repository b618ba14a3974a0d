"""Scripted scenarios: a command/fault schedule plus assertions over the trace.

A schedule entry at tick t is enqueued after the snapshot for tick t is
emitted, mimicking an operator who reacts to what the panel just displayed;
the command therefore takes effect in scan t+1.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import data
from .plant import COLOR_TO_RAMP, Color, Material, PlantConfig
from .runtime import Command, CommandKind, CommandSource, Runtime, build_runtime


class ScenarioValidationError(Exception):
    pass


@dataclass
class Scenario:
    name: str
    description: str
    plant_config: PlantConfig
    run_ticks: int
    schedule: list[tuple[int, Command]]
    assertions: list[dict] = field(default_factory=list)

    def validate(self) -> None:
        ticks = [t for t, _ in self.schedule]
        if ticks != sorted(ticks):
            raise ScenarioValidationError("schedule must be sorted by tick")
        if any(t < 0 or t >= self.run_ticks for t in ticks):
            raise ScenarioValidationError("schedule ticks must lie in [0, runTicks)")
        # probe fault targets and module paths against a scratch build
        probe = build_runtime(self.plant_config, "procedural")
        for tick, command in self.schedule:
            if command.kind == CommandKind.INJECT_FAULT:
                ok, reason = probe.plant.inject_fault(command.fault)
                if not ok and "overlapping" not in (reason or ""):
                    raise ScenarioValidationError(f"tick {tick}: {reason}")
            elif command.kind in (CommandKind.MANUAL_OUTPUT, CommandKind.JOG):
                if command.path not in probe.registry:
                    raise ScenarioValidationError(
                        f"tick {tick}: unknown module path {command.path}"
                    )


def load_scenario(name_or_path: str) -> Scenario:
    """Load a bundled scenario by name or any scenario file by path."""
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        if name_or_path not in data.list_scenarios():
            raise ScenarioValidationError(
                f"unknown scenario: {name_or_path} (bundled: {', '.join(data.list_scenarios())})"
            )
        doc = data.load_json(f"scenarios/{name_or_path}.json")
    return scenario_from_json(doc)


def scenario_from_json(doc: dict) -> Scenario:
    try:
        config = PlantConfig.from_json(doc.get("plant", {}))
        schedule = [
            (int(entry["tick"]), Command.from_json(entry["command"], CommandSource.SCENARIO))
            for entry in doc.get("schedule", [])
        ]
        scenario = Scenario(
            name=doc["name"],
            description=doc.get("description", ""),
            plant_config=config,
            run_ticks=int(doc["runTicks"]),
            schedule=schedule,
            assertions=doc.get("assertions", []),
        )
    except (KeyError, ValueError) as exc:
        raise ScenarioValidationError(f"invalid scenario document: {exc}") from exc
    scenario.validate()
    return scenario


@dataclass
class AssertionResult:
    assertion: dict
    passed: bool
    detail: str

    def describe(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {json.dumps(self.assertion, separators=(',', ':'))} — {self.detail}"


@dataclass
class ScenarioResult:
    scenario: Scenario
    strategy: str
    snapshots: list[dict]
    assertion_results: list[AssertionResult]
    runtime: Runtime

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.assertion_results)


def run_scenario(
    scenario: Scenario,
    strategy: str,
    runtime_kwargs: dict | None = None,
    pace_s: float = 0.0,
) -> ScenarioResult:
    """Execute the scenario headless and evaluate its assertions."""
    runtime = build_runtime(scenario.plant_config, strategy, **(runtime_kwargs or {}))
    by_tick: dict[int, list[Command]] = {}
    for tick, command in scenario.schedule:
        by_tick.setdefault(tick, []).append(command)
    snapshots: list[dict] = []
    for tick in range(scenario.run_ticks):
        snapshots.append(runtime.scan())
        for command in by_tick.get(tick, ()):
            runtime.enqueue_command(command)
        if pace_s > 0:
            time.sleep(pace_s)
    results = [
        evaluate_assertion(assertion, snapshots) for assertion in scenario.assertions
    ]
    return ScenarioResult(scenario, strategy, snapshots, results, runtime)


# -- assertion evaluation -------------------------------------------------------


def _result(assertion: dict, passed: bool, detail: str) -> AssertionResult:
    return AssertionResult(assertion, passed, detail)


def _wp(snapshot: dict, wp_id: int) -> dict | None:
    for wp in snapshot["plant"]["workPieces"]:
        if wp["id"] == wp_id:
            return wp
    return None


def _location_matches(location: dict, spec: dict) -> bool:
    if location["kind"] != spec.get("locationKind"):
        return False
    if "rampIndex" in spec and location.get("index") != spec["rampIndex"]:
        return False
    return True


def evaluate_assertion(assertion: dict, snaps: list[dict]) -> AssertionResult:
    kind = assertion["kind"]
    if not snaps:
        if kind in ("noErrors", "machineStateNever"):
            return _result(assertion, True, "vacuously true on empty trace")
        return _result(assertion, "tick" not in assertion, "empty trace")

    if kind == "machineState":
        snap = snaps[assertion["tick"]]
        ok = snap["machineState"] == assertion["equals"]
        return _result(assertion, ok, f"state at {assertion['tick']} = {snap['machineState']}")

    if kind == "machineStateAlways":
        lo = assertion.get("fromTick", 0)
        hi = assertion.get("toTick", len(snaps) - 1)
        bad = [s["tick"] for s in snaps[lo : hi + 1] if s["machineState"] != assertion["equals"]]
        return _result(assertion, not bad, f"off-state ticks: {bad[:5]}" if bad else "held")

    if kind == "machineStateNever":
        hits = [s["tick"] for s in snaps if s["machineState"] == assertion["equals"]]
        return _result(assertion, not hits, f"seen at {hits[:5]}" if hits else "never seen")

    if kind == "machineStateReached":
        by = assertion.get("byTick", len(snaps) - 1)
        for s in snaps[: by + 1]:
            if s["machineState"] == assertion["equals"]:
                return _result(assertion, True, f"reached at tick {s['tick']}")
        return _result(assertion, False, f"not reached by tick {by}")

    if kind == "mode":
        snap = snaps[assertion["tick"]]
        ok = snap["mode"] == assertion["equals"]
        return _result(assertion, ok, f"mode at {assertion['tick']} = {snap['mode']}")

    if kind == "modeReached":
        by = assertion.get("byTick", len(snaps) - 1)
        for s in snaps[: by + 1]:
            if s["mode"] == assertion["equals"]:
                return _result(assertion, True, f"mode reached at tick {s['tick']}")
        return _result(assertion, False, f"mode not reached by tick {by}")

    if kind == "errorPresent":
        by = assertion.get("byTick", len(snaps) - 1)
        for s in snaps[: by + 1]:
            for e in s["errors"]:
                if e["number"] != assertion["number"]:
                    continue
                if "severity" in assertion and e["severity"] != assertion["severity"]:
                    continue
                if "origin" in assertion and e["origin"] != assertion["origin"]:
                    continue
                return _result(assertion, True, f"first seen at tick {s['tick']}")
        return _result(assertion, False, f"error {assertion['number']} not seen by tick {by}")

    if kind == "errorAbsent":
        hits = [
            s["tick"] for s in snaps for e in s["errors"] if e["number"] == assertion["number"]
        ]
        return _result(assertion, not hits, f"seen at {hits[:3]}" if hits else "never raised")

    if kind == "noErrors":
        hits = [(s["tick"], e["number"]) for s in snaps for e in s["errors"]]
        return _result(assertion, not hits, f"errors: {hits[:3]}" if hits else "clean run")

    if kind == "wpLocation":
        snap = snaps[assertion.get("tick", len(snaps) - 1)]
        wp = _wp(snap, assertion["wp"])
        if wp is None:
            return _result(assertion, False, f"work piece {assertion['wp']} unknown")
        ok = _location_matches(wp["location"], assertion)
        return _result(assertion, ok, f"location = {wp['location']}")

    if kind == "allSorted":
        snap = snaps[-1]
        problems = []
        visited_stamp: dict[int, bool] = {}
        for s in snaps:
            for wp in s["plant"]["workPieces"]:
                if wp["location"]["kind"] == "Stamp":
                    visited_stamp[wp["id"]] = True
        for wp in snap["plant"]["workPieces"]:
            expected = COLOR_TO_RAMP[Color(wp["color"])]
            loc = wp["location"]
            if loc["kind"] != "Ramp" or loc["index"] != expected:
                problems.append(f"wp{wp['id']}@{loc}")
            if Material(wp["material"]) == Material.METAL:
                if not wp["stamped"] or not visited_stamp.get(wp["id"]):
                    problems.append(f"wp{wp['id']} missed the stamp")
        return _result(assertion, not problems, "; ".join(problems) or "all sorted")

    if kind == "moduleStatus":
        snap = snaps[assertion.get("tick", len(snaps) - 1)]
        entry = snap["moduleStatus"].get(assertion["path"])
        if entry is None:
            return _result(assertion, False, f"unknown module {assertion['path']}")
        value = entry.get(assertion["field"])
        ok = value == assertion["equals"]
        return _result(assertion, ok, f"{assertion['field']} = {value}")

    if kind == "safeOutputsWithin":
        first = None
        for s in snaps:
            if any(e["number"] == assertion["number"] for e in s["errors"]):
                first = s["tick"]
                break
        if first is None:
            return _result(assertion, False, f"error {assertion['number']} never raised")
        window = snaps[first : first + assertion.get("ticks", 1) + 1]
        for s in window:
            if not any(s["io"]["digitalOutputs"].values()):
                return _result(assertion, True, f"outputs safe at tick {s['tick']}")
        return _result(assertion, False, f"outputs still energized after tick {first}")

    if kind == "standstillAtEnd":
        ticks = assertion.get("ticks", 10)
        tail = snaps[-ticks:]
        moving = [
            s["tick"]
            for prev, s in zip(tail, tail[1:])
            if prev["plant"]["cranePosition"] != s["plant"]["cranePosition"]
            or prev["plant"]["beltPosition"] != s["plant"]["beltPosition"]
            or prev["plant"]["cylinders"] != s["plant"]["cylinders"]
        ]
        return _result(assertion, not moving, f"motion at {moving[:3]}" if moving else "standstill")

    return _result(assertion, False, f"unknown assertion kind: {kind}")
