import random

from hypothesis import given, settings
from hypothesis import strategies as st

from xppusim.packml import (
    ACTING_TERMINAL,
    MODE_CHANGE_STATES,
    MachineState,
    ModeManager,
    OperatingMode,
    StateCommand,
    StateMachine,
)


def test_initial_state_is_stopped():
    assert StateMachine().state == MachineState.STOPPED


def test_execute_abort_enters_aborting():
    machine = StateMachine()
    machine.state = MachineState.EXECUTE
    accepted, reason = machine.command(StateCommand.ABORT, 0)
    assert accepted and reason is None
    assert machine.state == MachineState.ABORTING


def test_aborted_start_rejected_until_clear():
    machine = StateMachine()
    machine.state = MachineState.ABORTED
    accepted, reason = machine.command(StateCommand.START, 0)
    assert not accepted
    assert "no transition" in reason
    accepted, _ = machine.command(StateCommand.CLEAR, 0)
    assert accepted and machine.state == MachineState.CLEARING


def test_abort_reachable_from_everything_but_aborting_aborted_clearing():
    for state in MachineState:
        machine = StateMachine()
        machine.state = state
        accepted, _ = machine.command(StateCommand.ABORT, 0)
        expected = state not in (
            MachineState.ABORTING,
            MachineState.ABORTED,
            MachineState.CLEARING,
        )
        assert accepted == expected, state


def test_acting_states_complete_when_done():
    machine = StateMachine()
    machine.state = MachineState.ABORTING
    machine.tick_acting(1, done=False)
    assert machine.state == MachineState.ABORTING
    machine.tick_acting(2, done=True)
    assert machine.state == MachineState.ABORTED


def test_starting_holds_until_ready():
    machine = StateMachine()
    machine.state = MachineState.STARTING
    machine.tick_acting(0, done=False)
    assert machine.state == MachineState.STARTING
    machine.tick_acting(1, done=True)
    assert machine.state == MachineState.EXECUTE


def test_completing_terminates_in_complete():
    machine = StateMachine()
    machine.state = MachineState.COMPLETING
    machine.tick_acting(0, done=True)
    assert machine.state == MachineState.COMPLETE


def test_acting_terminal_covers_every_acting_state():
    acting = {s for s in MachineState if s.value.endswith("ING")}
    assert acting == set(ACTING_TERMINAL)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(list(StateCommand)), max_size=60), st.randoms())
def test_random_command_sequences_never_panic(commands, rng):
    """Every (state, command) pair either transitions or rejects with a reason."""
    machine = StateMachine()
    tick = 0
    for command in commands:
        accepted, reason = machine.command(command, tick)
        assert accepted or reason
        # occasionally let acting states finish
        if rng.random() < 0.5:
            machine.tick_acting(tick, done=True)
        tick += 1
        assert machine.state in MachineState


def test_mode_change_only_in_permitted_states():
    manager = ModeManager()
    manager.request(OperatingMode.MANUAL)
    result = manager.evaluate(
        0, MachineState.EXECUTE, interlocks=lambda: None, recovery_gate=lambda: (True, None)
    )
    assert result == (False, "mode change not permitted in EXECUTE")
    assert manager.current == OperatingMode.AUTOMATIC

    manager.request(OperatingMode.MANUAL)
    result = manager.evaluate(
        1, MachineState.IDLE, interlocks=lambda: None, recovery_gate=lambda: (True, None)
    )
    assert result == (True, None)
    assert manager.current == OperatingMode.MANUAL


def test_automatic_blocked_by_interlocks():
    manager = ModeManager()
    manager.current = OperatingMode.MANUAL
    manager.request(OperatingMode.AUTOMATIC)
    result = manager.evaluate(
        0, MachineState.IDLE, interlocks=lambda: "open error", recovery_gate=lambda: (True, None)
    )
    assert result == (False, "open error")
    assert manager.current == OperatingMode.MANUAL


def test_automatic_blocked_by_recovery_gate():
    manager = ModeManager()
    manager.current = OperatingMode.JOG
    manager.request(OperatingMode.AUTOMATIC)
    result = manager.evaluate(
        0,
        MachineState.STOPPED,
        interlocks=lambda: None,
        recovery_gate=lambda: (False, "manual or jog mode not visited since reaction"),
    )
    assert result == (False, "manual or jog mode not visited since reaction")


def test_manual_and_jog_skip_interlocks():
    manager = ModeManager()
    called = []
    manager.request(OperatingMode.JOG)
    result = manager.evaluate(
        0,
        MachineState.ABORTED,
        interlocks=lambda: called.append("x") or "blocked",
        recovery_gate=lambda: (False, "no"),
    )
    assert result == (True, None)
    assert not called


def test_permitted_mode_change_states():
    assert MODE_CHANGE_STATES == {
        MachineState.STOPPED,
        MachineState.ABORTED,
        MachineState.IDLE,
        MachineState.HELD,
    }


def test_fuzzed_machine_stays_consistent_seeded():
    rng = random.Random(20240811)
    machine = StateMachine()
    for tick in range(2000):
        command = rng.choice(list(StateCommand))
        accepted, reason = machine.command(command, tick)
        assert accepted or reason
        machine.tick_acting(tick, done=rng.random() < 0.7)
