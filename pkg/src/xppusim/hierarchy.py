"""Module hierarchy primitives: paths, levels, statuses and the module base class."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterator

if TYPE_CHECKING:
    from .errors.contract import ErrorEvent, ErrorPort


class BuildError(Exception):
    """Raised when a runtime cannot be assembled from its configuration."""


class ModuleLevel(str, Enum):
    UNIT = "Unit"
    EQUIPMENT_MODULE = "EquipmentModule"
    CONTROL_MODULE = "ControlModule"


@dataclass(frozen=True, order=True)
class ModulePath:
    """Hierarchical module address, e.g. xPPU/Crane/Lift."""

    segments: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("module path must not be empty")
        for seg in self.segments:
            if not seg or "/" in seg or "." in seg:
                raise ValueError(f"invalid path segment: {seg!r}")

    @classmethod
    def parse(cls, text: str) -> "ModulePath":
        return cls(tuple(text.split("/")))

    def child(self, name: str) -> "ModulePath":
        return ModulePath(self.segments + (name,))

    @property
    def parent(self) -> "ModulePath | None":
        if len(self.segments) == 1:
            return None
        return ModulePath(self.segments[:-1])

    @property
    def unit(self) -> str:
        return self.segments[0]

    def is_ancestor_of(self, other: "ModulePath") -> bool:
        n = len(self.segments)
        return len(other.segments) > n and other.segments[:n] == self.segments

    def __str__(self) -> str:
        return "/".join(self.segments)


@dataclass
class ModuleStatus:
    """Per-module health/motion summary published in every snapshot."""

    has_error: bool = False
    last_error_number: int | None = None
    motion_active: bool = False

    def as_dict(self) -> dict:
        return {
            "hasError": self.has_error,
            "lastErrorNumber": self.last_error_number,
            "motionActive": self.motion_active,
        }


def io_key(path: "ModulePath | str", signal: str) -> str:
    """IO image key for a signal owned by a module, e.g. 'xPPU/Crane/Lift.DO_Extend'."""
    return f"{path}.{signal}"


class Module:
    """Base class for every node of the control hierarchy.

    Control modules drive actuators and diagnose component-level errors.
    Equipment modules add sequence logic and module-specific diagnoses.
    The single Unit at the root coordinates the overall process.
    """

    level: ModuleLevel = ModuleLevel.CONTROL_MODULE

    def __init__(self, path: ModulePath):
        self.path = path
        self.children: list[Module] = []
        self.status = ModuleStatus()
        # Late-bound reporting channel; installed by the active error strategy.
        self.error_port: "ErrorPort | None" = None
        # Application-specific reaction codes this module acts on (codes 32..63).
        self.app_reactions: dict[int, str] = {}
        # Latches set by the reaction machinery.
        self.stop_latched = False
        self.hold_frozen = False
        # Error number currently latching this module faulted, if any.
        self.fault_number: int | None = None

    # -- structure ---------------------------------------------------------

    def add_child(self, module: "Module") -> "Module":
        self.children.append(module)
        return module

    def walk(self) -> Iterator["Module"]:
        """Depth-first pre-order over this module and its subtree."""
        yield self
        for child in self.children:
            yield from child.walk()

    # -- scan hooks (overridden by concrete modules) -------------------------

    def scan(self, ctx) -> None:
        """Evaluate one scan of module logic. Called in hierarchy pre-order."""

    def diagnose(self, ctx) -> "list[ErrorEvent]":
        """Identify deviations; events are handed to the active error strategy."""
        return []

    def safe_state(self, ctx) -> None:
        """Drop all outputs and cancel motion; used for immediate standstill.

        Non-leaf modules propagate to their subtree; control modules override.
        """
        for child in self.children:
            child.safe_state(ctx)

    def command_home(self, ctx) -> None:
        """Drive the module toward its home position (machine reset)."""
        for child in self.children:
            child.command_home(ctx)

    def is_home(self, ctx) -> bool:
        return all(child.is_home(ctx) for child in self.children)

    def is_idle_for_stop(self, ctx) -> bool:
        """True when the module has finished its current cycle (controlled stop)."""
        return all(child.is_idle_for_stop(ctx) for child in self.children)

    def reset_process(self) -> None:
        """Forget sequence progress and reaction latches (machine reset)."""
        self.stop_latched = False
        self.hold_frozen = False

    def clear_fault_latch(self) -> None:
        self.fault_number = None

    # -- introspection -------------------------------------------------------

    def manifest(self) -> dict:
        """Signals and actions this module variant exposes."""
        return {"signals": [], "actions": []}

    def signal_names(self) -> list[str]:
        return list(self.manifest()["signals"])

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"<{type(self).__name__} {self.path}>"


@dataclass
class IoImage:
    """Process image: inputs latched from the plant, outputs written by modules."""

    digital_inputs: dict[str, bool] = field(default_factory=dict)
    digital_outputs: dict[str, bool] = field(default_factory=dict)
    analog_values: dict[str, float] = field(default_factory=dict)

    def register_input(self, key: str, initial: bool = False) -> None:
        self.digital_inputs[key] = initial

    def register_output(self, key: str, initial: bool = False) -> None:
        self.digital_outputs[key] = initial

    def register_analog(self, key: str, initial: float = 0.0) -> None:
        self.analog_values[key] = initial

    def latch_inputs(self, digital: dict[str, bool], analog: dict[str, float]) -> None:
        for key, value in digital.items():
            self.digital_inputs[key] = value
        for key, value in analog.items():
            self.analog_values[key] = value

    def sort_keys(self) -> None:
        """Freeze a stable, sorted key order for reproducible trace output."""
        self.digital_inputs = dict(sorted(self.digital_inputs.items()))
        self.digital_outputs = dict(sorted(self.digital_outputs.items()))
        self.analog_values = dict(sorted(self.analog_values.items()))

    def observe(self) -> dict:
        return {
            "digitalInputs": dict(self.digital_inputs),
            "digitalOutputs": dict(self.digital_outputs),
            "analogValues": dict(self.analog_values),
        }
