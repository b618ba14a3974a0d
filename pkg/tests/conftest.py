from __future__ import annotations

import pytest

from xppusim.packml import MachineState, StateCommand
from xppusim.runtime import Command, CommandKind, CommandSource, build_runtime
from xppusim.scenario import load_scenario, run_scenario


def state_command(name: str) -> Command:
    return Command(
        CommandKind.STATE_COMMAND,
        state_command=StateCommand(name),
        source=CommandSource.SCENARIO,
    )


def started_runtime(strategy: str = "procedural", config=None, **kwargs):
    """Runtime brought to EXECUTE via Reset/Start."""
    rt = build_runtime(config, strategy, **kwargs)
    rt.enqueue_command(state_command("Reset"))
    rt.scan()
    rt.scan()
    rt.enqueue_command(state_command("Start"))
    rt.scan()
    rt.scan()
    assert rt.machine.state == MachineState.EXECUTE
    return rt


@pytest.fixture(scope="session")
def scenario_runs():
    """Session cache of plain scenario executions keyed by (name, strategy)."""
    cache: dict[tuple[str, str], object] = {}

    def get(name: str, strategy: str):
        key = (name, strategy)
        if key not in cache:
            cache[key] = run_scenario(load_scenario(name), strategy)
        return cache[key]

    return get
