"""Reusable control modules: pneumatic cylinders, a configurable servo axis
and a vacuum gripper.

Each module embeds the extra-functional hooks expected by the runtime:
status exposure, mode-aware behavior (automatic sequence vs. operator
writes), and per-scan error identification. Reporting the identified errors
is delegated to the active error strategy; a module never handles an error
beyond latching itself faulted.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from . import signals as S
from .errors.contract import ErrorEvent, Severity
from .hierarchy import Module, ModuleLevel, ModulePath, io_key

# Component error numbers (1000-range: standard components)
ERR_AXIS_DRAG = 1001
ERR_AXIS_JAM = 1002
ERR_CYLINDER_TIMEOUT = 1003


class CylinderKind(str, Enum):
    MONOSTABLE = "Monostable"
    BISTABLE = "Bistable"


class CylinderStatus(str, Enum):
    IDLE = "Idle"
    EXTENDING = "Extending"
    RETRACTING = "Retracting"
    EXTENDED = "Extended"
    RETRACTED = "Retracted"
    FAULTED = "Faulted"


class CylinderModule(Module):
    """Mono- or bistable pneumatic cylinder.

    A monostable cylinder has a single valve and retracts by spring when
    DO_Extend drops, so it exposes neither DO_Retract nor a retract action.
    """

    level = ModuleLevel.CONTROL_MODULE

    def __init__(
        self,
        path: ModulePath,
        kind: CylinderKind,
        travel_ticks: int = 8,
        timeout_ticks: int | None = None,
    ):
        super().__init__(path)
        if travel_ticks <= 0:
            raise ValueError("travelTicks must be positive")
        self.kind = kind
        self.travel_ticks = travel_ticks
        # Generous default so nominal strokes never false-trigger.
        self.timeout_ticks = timeout_ticks if timeout_ticks is not None else 3 * travel_ticks
        self.cyl_status = CylinderStatus.RETRACTED
        self._do_extend = False
        self._do_retract = False
        self._target: str | None = None  # "extended" | "retracted"
        self._stroke_ticks = 0
        self.manual_overrides: dict[str, bool] = {}

    # -- commands ------------------------------------------------------------

    def act_extend(self) -> bool:
        if self.cyl_status == CylinderStatus.FAULTED:
            return False
        self._do_extend = True
        self._do_retract = False
        if self._target != "extended":
            self._target = "extended"
            self._stroke_ticks = 0
        return True

    def act_retract(self) -> bool:
        """Retract via the second valve; absent on the monostable variant."""
        if self.kind == CylinderKind.MONOSTABLE:
            return False
        if self.cyl_status == CylinderStatus.FAULTED:
            return False
        self._do_extend = False
        self._do_retract = True
        if self._target != "retracted":
            self._target = "retracted"
            self._stroke_ticks = 0
        return True

    def release(self) -> bool:
        """Drop the extend valve; the monostable way of retracting."""
        self._do_extend = False
        self._do_retract = False
        if self.kind == CylinderKind.MONOSTABLE and self._target != "retracted":
            self._target = "retracted"
            self._stroke_ticks = 0
        return True

    # -- scan ----------------------------------------------------------------

    def scan(self, ctx) -> None:
        if ctx.manual_for(self.path):
            self._apply_manual()
        di_ext = ctx.io.digital_inputs[io_key(self.path, S.DI_EXTENDED)]
        di_ret = ctx.io.digital_inputs[io_key(self.path, S.DI_RETRACTED)]

        if self.fault_number is None:
            if di_ext and self._target in (None, "extended"):
                self.cyl_status = CylinderStatus.EXTENDED
                self._target = None
            elif di_ret and self._target in (None, "retracted"):
                self.cyl_status = CylinderStatus.RETRACTED
                self._target = None
            elif self._target == "extended":
                self.cyl_status = CylinderStatus.EXTENDING
                self._stroke_ticks += 1
            elif self._target == "retracted":
                self.cyl_status = CylinderStatus.RETRACTING
                self._stroke_ticks += 1
            else:
                self.cyl_status = CylinderStatus.IDLE

        ctx.io.digital_outputs[io_key(self.path, S.DO_EXTEND)] = self._do_extend
        if self.kind == CylinderKind.BISTABLE:
            ctx.io.digital_outputs[io_key(self.path, S.DO_RETRACT)] = self._do_retract

    def _apply_manual(self) -> None:
        if S.DO_EXTEND in self.manual_overrides:
            value = self.manual_overrides[S.DO_EXTEND]
            if value:
                self.act_extend()
            else:
                self.release()
        if self.kind == CylinderKind.BISTABLE and S.DO_RETRACT in self.manual_overrides:
            if self.manual_overrides[S.DO_RETRACT]:
                self.act_retract()

    def diagnose(self, ctx) -> list[ErrorEvent]:
        if self.fault_number is not None:
            return []  # latched until acknowledged
        if (
            self.cyl_status in (CylinderStatus.EXTENDING, CylinderStatus.RETRACTING)
            and self._stroke_ticks >= self.timeout_ticks
        ):
            self.fault_number = ERR_CYLINDER_TIMEOUT
            side = "extended" if self._target == "extended" else "retracted"
            # fail-safe: de-energize the valves of a faulted cylinder
            self.safe_state(ctx)
            self.cyl_status = CylinderStatus.FAULTED
            return [
                ErrorEvent(
                    number=ERR_CYLINDER_TIMEOUT,
                    message="Cylinder end position not reached in time",
                    severity=Severity.MALFUNCTION,
                    origin=self.path,
                    cause=f"end position '{side}' not reached within {self.timeout_ticks} ticks",
                    tick=ctx.tick,
                )
            ]
        return []

    # -- reaction / recovery ---------------------------------------------------

    def safe_state(self, ctx) -> None:
        self._do_extend = False
        self._do_retract = False
        self._target = None
        self._stroke_ticks = 0
        ctx.io.digital_outputs[io_key(self.path, S.DO_EXTEND)] = False
        if self.kind == CylinderKind.BISTABLE:
            ctx.io.digital_outputs[io_key(self.path, S.DO_RETRACT)] = False

    def command_home(self, ctx) -> None:
        if self.kind == CylinderKind.BISTABLE:
            self.act_retract()
        else:
            self.release()

    def is_home(self, ctx) -> bool:
        return ctx.io.digital_inputs[io_key(self.path, S.DI_RETRACTED)]

    def is_idle_for_stop(self, ctx) -> bool:
        return self.cyl_status not in (CylinderStatus.EXTENDING, CylinderStatus.RETRACTING)

    def reset_process(self) -> None:
        super().reset_process()
        self.manual_overrides.clear()

    def clear_fault_latch(self) -> None:
        super().clear_fault_latch()
        if self.cyl_status == CylinderStatus.FAULTED:
            self.cyl_status = CylinderStatus.IDLE
            self._target = None
            self._stroke_ticks = 0

    @property
    def moving(self) -> bool:
        return self.cyl_status in (CylinderStatus.EXTENDING, CylinderStatus.RETRACTING)

    def manifest(self) -> dict:
        signals = [S.DO_EXTEND]
        actions = ["ACT_Extend"]
        if self.kind == CylinderKind.BISTABLE:
            signals.append(S.DO_RETRACT)
            actions.append("ACT_Retract")
        signals += [S.DI_EXTENDED, S.DI_RETRACTED, "Status"]
        return {"signals": signals, "actions": actions}


class AxisMotion(str, Enum):
    ROTARY = "Rotary"
    LINEAR = "Linear"


class AxisFeedback(str, Enum):
    POTENTIOMETER = "Potentiometer"
    INCREMENTAL_ENCODER = "IncrementalEncoder"
    ABSOLUTE_ENCODER = "AbsoluteEncoder"


class AxisState(str, Enum):
    IDLE = "Idle"
    MOVING = "Moving"
    JOGGING = "Jogging"
    FAULTED = "Faulted"


@dataclass(frozen=True)
class AxisConfig:
    """Axis variability resolved by configuration.

    Feedback hardware is hidden above the axis: consumers only ever see a
    reference and an actual position, whatever device produces them.
    Units are degrees for rotary and millimeters for linear motion.
    """

    motion: AxisMotion
    limited: bool
    negative_limit: float = 0.0
    positive_limit: float = 0.0
    feedback: AxisFeedback = AxisFeedback.ABSOLUTE_ENCODER
    max_speed: float = 1.0
    drag_tolerance_units: float = 12.0
    drag_tolerance_ticks: int = 5

    def __post_init__(self) -> None:
        if self.limited and not self.negative_limit < self.positive_limit:
            raise ValueError("limited axis requires NegativeLimit < PositiveLimit")
        if self.max_speed <= 0:
            raise ValueError("maxSpeed must be positive")
        if self.drag_tolerance_ticks <= 0:
            raise ValueError("dragToleranceTicks must be positive")

    def clamp(self, value: float) -> float:
        if not self.limited:
            return value
        return min(max(value, self.negative_limit), self.positive_limit)

    def as_dict(self) -> dict:
        d = {
            "motion": self.motion.value,
            "limited": self.limited,
            "feedback": self.feedback.value,
            "maxSpeed": self.max_speed,
        }
        if self.limited:
            d["negativeLimit"] = self.negative_limit
            d["positiveLimit"] = self.positive_limit
        return d


class AxisModule(Module):
    """Servo axis exposing reference/actual positions.

    The reference ramps toward the commanded target at the configured speed;
    the plant-side drive tracks the reference. Drag (sustained deviation) and
    motor jam (actual frozen while the reference moves) are diagnosed here.
    """

    level = ModuleLevel.CONTROL_MODULE

    def __init__(self, path: ModulePath, config: AxisConfig):
        super().__init__(path)
        self.config = config
        self.reference_position = config.clamp(0.0)
        self.commanded_target: float | None = None
        self.axis_state = AxisState.IDLE
        self.endless_direction = 0
        self._jog_pulse = 0
        self._drag_count = 0
        self._jam_count = 0
        self._last_actual: float | None = None
        self._last_reference = self.reference_position

    # -- commands ------------------------------------------------------------

    def move_to(self, target: float, ctx=None) -> bool:
        if self.axis_state == AxisState.FAULTED:
            return False
        clamped = self.config.clamp(target)
        if clamped != target and ctx is not None:
            ctx.audit("clamped", f"{self.path}: move_to({target}) clamped to {clamped}")
        if self.commanded_target != clamped:
            self.commanded_target = clamped
        self.endless_direction = 0
        return True

    def jog(self, direction: int) -> bool:
        if self.axis_state == AxisState.FAULTED:
            return False
        self._jog_pulse = 1 if direction >= 0 else -1
        return True

    def run_endless(self, direction: int) -> bool:
        """Endless motion mode, e.g. for a conveyor; unavailable on limited axes."""
        if self.axis_state == AxisState.FAULTED:
            return False
        if self.config.limited:
            return False
        self.endless_direction = 1 if direction >= 0 else -1
        self.commanded_target = None
        return True

    def stop_endless(self) -> None:
        self.endless_direction = 0

    def cancel_motion(self) -> None:
        self.commanded_target = None
        self.endless_direction = 0
        self._jog_pulse = 0

    # -- scan ----------------------------------------------------------------

    def scan(self, ctx) -> None:
        if getattr(ctx, "frozen", False) and not self._jog_pulse:
            # held/suspended: ramping pauses, targets and run commands persist
            ctx.io.analog_values[io_key(self.path, S.AO_REFERENCE)] = self.reference_position
            return
        speed = self.config.max_speed
        if self._jog_pulse:
            self.reference_position = self.config.clamp(
                self.reference_position + self._jog_pulse * speed
            )
            self._jog_pulse = 0
            self.axis_state = AxisState.JOGGING
        elif self.endless_direction:
            self.reference_position += self.endless_direction * speed
            self.axis_state = AxisState.MOVING
        elif self.commanded_target is not None:
            delta = self.commanded_target - self.reference_position
            if abs(delta) <= speed:
                self.reference_position = self.commanded_target
                self.commanded_target = None
                self.axis_state = AxisState.IDLE
            else:
                self.reference_position += speed if delta > 0 else -speed
                self.axis_state = AxisState.MOVING
        elif self.axis_state != AxisState.FAULTED:
            self.axis_state = AxisState.IDLE
        self.reference_position = self.config.clamp(self.reference_position)
        ctx.io.analog_values[io_key(self.path, S.AO_REFERENCE)] = self.reference_position

    def diagnose(self, ctx) -> list[ErrorEvent]:
        actual = ctx.io.analog_values[io_key(self.path, S.AI_ACTUAL)]
        reference_moving = self.reference_position != self._last_reference
        actual_unchanged = self._last_actual is not None and actual == self._last_actual

        if reference_moving and actual_unchanged:
            self._jam_count += 1
        else:
            self._jam_count = 0
        if abs(self.reference_position - actual) > self.config.drag_tolerance_units:
            self._drag_count += 1
        else:
            self._drag_count = 0

        self._last_actual = actual
        self._last_reference = self.reference_position

        if self.fault_number is not None:
            return []
        if self._jam_count >= self.config.drag_tolerance_ticks:
            self.fault_number = ERR_AXIS_JAM
            self.axis_state = AxisState.FAULTED
            self.cancel_motion()
            return [
                ErrorEvent(
                    number=ERR_AXIS_JAM,
                    message="Axis motor jammed",
                    severity=Severity.MALFUNCTION,
                    origin=self.path,
                    cause=f"actual position frozen for {self.config.drag_tolerance_ticks} ticks while reference moves",
                    tick=ctx.tick,
                )
            ]
        if self._drag_count >= self.config.drag_tolerance_ticks:
            self.fault_number = ERR_AXIS_DRAG
            self.axis_state = AxisState.FAULTED
            self.cancel_motion()
            return [
                ErrorEvent(
                    number=ERR_AXIS_DRAG,
                    message="Axis drag deviation exceeds tolerance",
                    severity=Severity.MALFUNCTION,
                    origin=self.path,
                    cause=(
                        f"|reference-actual| > {self.config.drag_tolerance_units} "
                        f"for {self.config.drag_tolerance_ticks} ticks"
                    ),
                    tick=ctx.tick,
                )
            ]
        return []

    # -- reaction / recovery ---------------------------------------------------

    def safe_state(self, ctx) -> None:
        self.cancel_motion()
        ctx.io.analog_values[io_key(self.path, S.AO_REFERENCE)] = self.reference_position

    def command_home(self, ctx) -> None:
        if self.config.limited:
            self.move_to(self.config.clamp(0.0))
        else:
            self.stop_endless()

    def is_home(self, ctx) -> bool:
        if not self.config.limited:
            return self.endless_direction == 0
        actual = ctx.io.analog_values[io_key(self.path, S.AI_ACTUAL)]
        home = self.config.clamp(0.0)
        return abs(actual - home) <= 0.5 and self.commanded_target is None

    def is_idle_for_stop(self, ctx) -> bool:
        return self.commanded_target is None and self.endless_direction == 0

    def clear_fault_latch(self) -> None:
        super().clear_fault_latch()
        if self.axis_state == AxisState.FAULTED:
            self.axis_state = AxisState.IDLE
        self._drag_count = 0
        self._jam_count = 0

    @property
    def moving(self) -> bool:
        return self.commanded_target is not None or self.endless_direction != 0

    def manifest(self) -> dict:
        return {
            "signals": [S.AO_REFERENCE, S.AI_ACTUAL, "Status"],
            "actions": ["ACT_MoveTo", "ACT_Jog"] + ([] if self.config.limited else ["ACT_RunEndless"]),
        }


class GripperModule(Module):
    """Vacuum gripper with a product-presence sensor."""

    level = ModuleLevel.CONTROL_MODULE

    def __init__(self, path: ModulePath):
        super().__init__(path)
        self._do_grip = False
        self.manual_overrides: dict[str, bool] = {}

    def grip(self) -> bool:
        self._do_grip = True
        return True

    def release(self) -> bool:
        self._do_grip = False
        return True

    def scan(self, ctx) -> None:
        if ctx.manual_for(self.path) and S.DO_GRIP in self.manual_overrides:
            self._do_grip = self.manual_overrides[S.DO_GRIP]
        ctx.io.digital_outputs[io_key(self.path, S.DO_GRIP)] = self._do_grip

    def safe_state(self, ctx) -> None:
        self._do_grip = False
        ctx.io.digital_outputs[io_key(self.path, S.DO_GRIP)] = False

    def is_idle_for_stop(self, ctx) -> bool:
        return True

    def reset_process(self) -> None:
        super().reset_process()
        self._do_grip = False
        self.manual_overrides.clear()

    @property
    def gripping(self) -> bool:
        return self._do_grip

    def manifest(self) -> dict:
        return {"signals": [S.DO_GRIP, S.DI_PRODUCT, "Status"], "actions": ["ACT_Grip", "ACT_Release"]}
