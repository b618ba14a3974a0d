"""Machine state machine and operating-mode manager.

The machine follows the packaging-machinery state model: stable states are
connected through acting (…ING) states that complete automatically once all
equipment modules report their part done. Abort provides an immediate
standstill from any state; Stop a controlled shut-down at the end of the
running process cycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable


class MachineState(str, Enum):
    STOPPED = "STOPPED"
    RESETTING = "RESETTING"
    IDLE = "IDLE"
    STARTING = "STARTING"
    EXECUTE = "EXECUTE"
    COMPLETING = "COMPLETING"
    COMPLETE = "COMPLETE"
    HOLDING = "HOLDING"
    HELD = "HELD"
    UNHOLDING = "UNHOLDING"
    SUSPENDING = "SUSPENDING"
    SUSPENDED = "SUSPENDED"
    UNSUSPENDING = "UNSUSPENDING"
    STOPPING = "STOPPING"
    ABORTING = "ABORTING"
    ABORTED = "ABORTED"
    CLEARING = "CLEARING"


class StateCommand(str, Enum):
    START = "Start"
    STOP = "Stop"
    ABORT = "Abort"
    CLEAR = "Clear"
    RESET = "Reset"
    HOLD = "Hold"
    UNHOLD = "Unhold"
    SUSPEND = "Suspend"
    UNSUSPEND = "Unsuspend"
    COMPLETE = "Complete"


class OperatingMode(str, Enum):
    AUTOMATIC = "Automatic"
    MANUAL = "Manual"
    JOG = "Jog"


# States from which Abort is NOT available (already aborting or clearing).
_NO_ABORT = frozenset(
    {MachineState.ABORTING, MachineState.ABORTED, MachineState.CLEARING}
)

_STOPPABLE = frozenset(
    {
        MachineState.RESETTING,
        MachineState.IDLE,
        MachineState.STARTING,
        MachineState.EXECUTE,
        MachineState.COMPLETING,
        MachineState.COMPLETE,
        MachineState.HOLDING,
        MachineState.HELD,
        MachineState.UNHOLDING,
        MachineState.SUSPENDING,
        MachineState.SUSPENDED,
        MachineState.UNSUSPENDING,
    }
)

_EDGES: dict[tuple[MachineState, StateCommand], MachineState] = {
    (MachineState.STOPPED, StateCommand.RESET): MachineState.RESETTING,
    (MachineState.COMPLETE, StateCommand.RESET): MachineState.RESETTING,
    (MachineState.IDLE, StateCommand.START): MachineState.STARTING,
    (MachineState.EXECUTE, StateCommand.COMPLETE): MachineState.COMPLETING,
    (MachineState.EXECUTE, StateCommand.HOLD): MachineState.HOLDING,
    (MachineState.HELD, StateCommand.UNHOLD): MachineState.UNHOLDING,
    (MachineState.EXECUTE, StateCommand.SUSPEND): MachineState.SUSPENDING,
    (MachineState.SUSPENDED, StateCommand.UNSUSPEND): MachineState.UNSUSPENDING,
    (MachineState.ABORTED, StateCommand.CLEAR): MachineState.CLEARING,
}
for _state in _STOPPABLE:
    _EDGES[(_state, StateCommand.STOP)] = MachineState.STOPPING
for _state in MachineState:
    if _state not in _NO_ABORT:
        _EDGES[(_state, StateCommand.ABORT)] = MachineState.ABORTING

ACTING_TERMINAL: dict[MachineState, MachineState] = {
    MachineState.RESETTING: MachineState.IDLE,
    MachineState.STARTING: MachineState.EXECUTE,
    MachineState.COMPLETING: MachineState.COMPLETE,
    MachineState.HOLDING: MachineState.HELD,
    MachineState.UNHOLDING: MachineState.EXECUTE,
    MachineState.SUSPENDING: MachineState.SUSPENDED,
    MachineState.UNSUSPENDING: MachineState.EXECUTE,
    MachineState.STOPPING: MachineState.STOPPED,
    MachineState.ABORTING: MachineState.ABORTED,
    MachineState.CLEARING: MachineState.STOPPED,
}

# Process logic runs (or finishes) in these states.
PROCESS_STATES = frozenset(
    {MachineState.EXECUTE, MachineState.STOPPING, MachineState.COMPLETING}
)
FROZEN_STATES = frozenset(
    {
        MachineState.HOLDING,
        MachineState.HELD,
        MachineState.SUSPENDING,
        MachineState.SUSPENDED,
    }
)
SAFE_OUTPUT_STATES = frozenset(
    {MachineState.ABORTING, MachineState.ABORTED, MachineState.CLEARING}
)


@dataclass
class TransitionEvent:
    tick: int
    from_state: MachineState
    to_state: MachineState
    trigger: str


class StateMachine:
    """Machine state holder with an explicit, exhaustively defined edge set."""

    def __init__(self) -> None:
        self.state = MachineState.STOPPED
        self.history: list[TransitionEvent] = []

    def allowed(self, cmd: StateCommand) -> bool:
        return (self.state, cmd) in _EDGES

    def command(self, cmd: StateCommand, tick: int, trigger: str = "command") -> tuple[bool, str | None]:
        """Take the edge for cmd if defined; otherwise reject with a reason."""
        target = _EDGES.get((self.state, cmd))
        if target is None:
            return False, f"no transition for {cmd.value} in {self.state.value}"
        self._enter(target, tick, trigger)
        return True, None

    def tick_acting(self, tick: int, done: bool) -> MachineState:
        """Advance an acting state to its terminal state once modules are done."""
        terminal = ACTING_TERMINAL.get(self.state)
        if terminal is not None and done:
            self._enter(terminal, tick, "acting-complete")
        return self.state

    def _enter(self, state: MachineState, tick: int, trigger: str) -> None:
        self.history.append(TransitionEvent(tick, self.state, state, trigger))
        self.state = state


# Mode changes are only permitted while the machine is in one of these states.
MODE_CHANGE_STATES = frozenset(
    {
        MachineState.STOPPED,
        MachineState.ABORTED,
        MachineState.IDLE,
        MachineState.HELD,
    }
)


@dataclass
class ModeManager:
    """Operating-mode switch with an interlock gate for automatic mode.

    Switching to Automatic additionally requires correctly parameterized
    interlocks, concretized as: no unacknowledged errors, every axis inside
    its configured limits, and no fault injections active.
    """

    current: OperatingMode = OperatingMode.AUTOMATIC
    pending: OperatingMode | None = None
    mode_history: list[tuple[int, OperatingMode]] = field(default_factory=list)

    def request(self, mode: OperatingMode) -> None:
        self.pending = mode

    def evaluate(
        self,
        tick: int,
        machine_state: MachineState,
        interlocks: Callable[[], str | None],
        recovery_gate: Callable[[], tuple[bool, str | None]],
    ) -> tuple[bool, str | None] | None:
        """Apply the pending request at the scan boundary; None if no request."""
        if self.pending is None:
            return None
        mode = self.pending
        self.pending = None
        if mode == self.current:
            return True, None
        if machine_state not in MODE_CHANGE_STATES:
            return False, f"mode change not permitted in {machine_state.value}"
        if mode == OperatingMode.AUTOMATIC:
            blocking = interlocks()
            if blocking is not None:
                return False, blocking
            allowed, reason = recovery_gate()
            if not allowed:
                return False, reason
        self.current = mode
        self.mode_history.append((tick, mode))
        return True, None
