"""Equipment-module sequence logic for the pick-and-place cell.

The automatic sequences below are pure process logic: they read latched
inputs, command their control modules and coordinate through a small unit
board. Deviations are detected in the diagnose hooks and handed to the
active error strategy; the sequences themselves contain no error-handling
branches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import signals as S
from .actuators import AxisModule, CylinderModule, GripperModule
from .errors.contract import ErrorEvent, Severity
from .hierarchy import Module, ModuleLevel, ModulePath, io_key
from .plant import PlantConfig

# Module-specific application error numbers (2000-range)
ERR_BELT_WP_MISSING = 2001
ERR_GRIPPER_NO_PRODUCT = 2002


@dataclass
class ProcessBoard:
    """Unit-scope coordination flags shared between equipment modules."""

    stamp_done: bool = False
    crane_clear_of_stamp: bool = True
    belt_handoffs: list[int] = field(default_factory=list)
    sorting_busy: bool = False
    complete_requested: bool = False

    def reset(self) -> None:
        self.stamp_done = False
        self.crane_clear_of_stamp = True
        self.belt_handoffs.clear()
        self.sorting_busy = False
        self.complete_requested = False


class EquipmentModule(Module):
    level = ModuleLevel.EQUIPMENT_MODULE


class StackEM(EquipmentModule):
    """Pushes the next work piece out of the magazine to the pickup point."""

    def __init__(self, path: ModulePath, pusher: CylinderModule):
        super().__init__(path)
        self.pusher = self.add_child(pusher)
        self.step = "WAIT"

    def scan(self, ctx) -> None:
        if not ctx.sequences_enabled:
            return
        di = ctx.io.digital_inputs
        if self.step == "WAIT":
            if (
                ctx.may_start_cycle
                and not self.stop_latched
                and not di[io_key(self.path, S.DI_STACK_EMPTY)]
                and not di[io_key(self.path, S.DI_PICKUP_OCCUPIED)]
            ):
                self.pusher.act_extend()
                self.step = "EXTEND"
        elif self.step == "EXTEND":
            self.pusher.act_extend()
            if di[io_key(self.pusher.path, S.DI_EXTENDED)]:
                self.pusher.act_retract()
                self.step = "RETRACT"
        elif self.step == "RETRACT":
            self.pusher.act_retract()
            if di[io_key(self.pusher.path, S.DI_RETRACTED)]:
                self.step = "WAIT"

    def is_idle_for_stop(self, ctx) -> bool:
        # A faulted pusher cannot finish its stroke; the work piece rests in
        # the magazine and the controlled stop may complete.
        done = self.step == "WAIT" or self.pusher.fault_number is not None
        return done and super().is_idle_for_stop(ctx)

    def reset_process(self) -> None:
        super().reset_process()
        self.step = "WAIT"


class CraneEM(EquipmentModule):
    """Transports work pieces: stack pickup, stamp detour for metal, belt drop."""

    def __init__(
        self,
        path: ModulePath,
        base: AxisModule,
        lift: CylinderModule,
        gripper: GripperModule,
        config: PlantConfig,
    ):
        super().__init__(path)
        self.base = self.add_child(base)
        self.lift = self.add_child(lift)
        self.gripper = self.add_child(gripper)
        self.stations = dict(config.station_angles)
        self.grip_dwell = config.grip_dwell_ticks
        self.step = "WAIT"
        self.src: str | None = None
        self.dst: str | None = None
        self.held_metal = False
        self.held_stamped = False
        self._dwell = 0

    def _at(self, ctx, station: str) -> bool:
        actual = ctx.io.analog_values[io_key(self.base.path, S.AI_ACTUAL)]
        return abs(actual - self.stations[station]) <= 0.5

    def scan(self, ctx) -> None:
        ctx.board.crane_clear_of_stamp = not (
            self.step in ("LOWER_PLACE", "RELEASE", "RAISE_DONE") and self.dst == "stamp"
        ) and not (self.step in ("LOWER_PICK", "GRIP", "RAISE_PICK") and self.src == "stamp")
        if not ctx.sequences_enabled:
            return
        di = ctx.io.digital_inputs
        if self.step == "WAIT":
            if ctx.may_start_cycle and not self.stop_latched:
                if ctx.board.stamp_done and di[io_key(f"{ctx.unit_path}/Stamp", S.DI_STAMP_OCCUPIED)]:
                    self.src = "stamp"
                    self.step = "ROT_SRC"
                elif di[io_key(f"{ctx.unit_path}/Stack", S.DI_PICKUP_OCCUPIED)]:
                    self.src = "stack"
                    self.step = "ROT_SRC"
        elif self.step == "ROT_SRC":
            self.base.move_to(self.stations[self.src], ctx)
            if self._at(ctx, self.src):
                if self.src == "stack":
                    self.held_metal = di[io_key(f"{ctx.unit_path}/Stack", S.DI_PICKUP_METAL)]
                    self.held_stamped = False
                else:
                    self.held_metal = True
                    self.held_stamped = True
                    ctx.board.stamp_done = False
                self.step = "LOWER_PICK"
        elif self.step == "LOWER_PICK":
            self.lift.act_extend()
            if di[io_key(self.lift.path, S.DI_EXTENDED)]:
                self.step = "GRIP"
                self._dwell = 0
        elif self.step == "GRIP":
            self.gripper.grip()
            self._dwell += 1
            if self._dwell >= self.grip_dwell and di[io_key(self.gripper.path, S.DI_PRODUCT)]:
                self.step = "RAISE_PICK"
        elif self.step == "RAISE_PICK":
            self.lift.release()
            if di[io_key(self.lift.path, S.DI_RETRACTED)]:
                self.dst = "stamp" if self.held_metal and not self.held_stamped else "belt"
                self.step = "ROT_DST"
        elif self.step == "ROT_DST":
            self.base.move_to(self.stations[self.dst], ctx)
            if self._at(ctx, self.dst):
                stamp_free = not di[io_key(f"{ctx.unit_path}/Stamp", S.DI_STAMP_OCCUPIED)]
                if self.dst != "stamp" or stamp_free:
                    self.step = "LOWER_PLACE"
        elif self.step == "LOWER_PLACE":
            self.lift.act_extend()
            if di[io_key(self.lift.path, S.DI_EXTENDED)]:
                self.step = "RELEASE"
                self._dwell = 0
        elif self.step == "RELEASE":
            self.gripper.release()
            self._dwell += 1
            if self._dwell >= self.grip_dwell and not di[io_key(self.gripper.path, S.DI_PRODUCT)]:
                if self.dst == "belt":
                    ctx.board.belt_handoffs.append(ctx.tick)
                self.step = "RAISE_DONE"
        elif self.step == "RAISE_DONE":
            self.lift.release()
            if di[io_key(self.lift.path, S.DI_RETRACTED)]:
                self.step = "WAIT"
                self.src = None
                self.dst = None

    def diagnose(self, ctx) -> list[ErrorEvent]:
        if not ctx.sequences_enabled or self.fault_number is not None:
            return []
        di = ctx.io.digital_inputs
        if (
            self.step == "GRIP"
            and self._dwell > self.grip_dwell + 2
            and not di[io_key(self.gripper.path, S.DI_PRODUCT)]
        ):
            self.fault_number = ERR_GRIPPER_NO_PRODUCT
            return [
                ErrorEvent(
                    number=ERR_GRIPPER_NO_PRODUCT,
                    message="Gripper product sensor not triggered after grip",
                    severity=Severity.ERROR,
                    origin=self.path,
                    cause="product sensor stayed off after grip action",
                    tick=ctx.tick,
                )
            ]
        return []

    def is_idle_for_stop(self, ctx) -> bool:
        holding = ctx.io.digital_inputs[io_key(self.gripper.path, S.DI_PRODUCT)]
        return self.step == "WAIT" and not holding and super().is_idle_for_stop(ctx)

    def reset_process(self) -> None:
        super().reset_process()
        self.step = "WAIT"
        self.src = None
        self.dst = None
        self.held_metal = False
        self.held_stamped = False
        self._dwell = 0


class StampEM(EquipmentModule):
    """Presses metal work pieces delivered by the crane."""

    def __init__(self, path: ModulePath, press: CylinderModule, config: PlantConfig):
        super().__init__(path)
        self.press = self.add_child(press)
        self.hold_ticks = config.press_hold_ticks
        self.step = "WAIT"
        self._hold = 0

    def scan(self, ctx) -> None:
        if not ctx.sequences_enabled:
            return
        di = ctx.io.digital_inputs
        occupied = di[io_key(self.path, S.DI_STAMP_OCCUPIED)]
        if not occupied:
            ctx.board.stamp_done = False
        if self.step == "WAIT":
            if (
                ctx.may_start_cycle
                and not self.stop_latched
                and occupied
                and not ctx.board.stamp_done
                and ctx.board.crane_clear_of_stamp
            ):
                self.press.act_extend()
                self.step = "PRESS"
        elif self.step == "PRESS":
            self.press.act_extend()
            if di[io_key(self.press.path, S.DI_EXTENDED)]:
                self.step = "HOLD"
                self._hold = 0
        elif self.step == "HOLD":
            self._hold += 1
            if self._hold >= self.hold_ticks:
                self.press.act_retract()
                self.step = "RETRACT"
        elif self.step == "RETRACT":
            self.press.act_retract()
            if di[io_key(self.press.path, S.DI_RETRACTED)]:
                ctx.board.stamp_done = True
                self.step = "WAIT"

    def is_idle_for_stop(self, ctx) -> bool:
        done = self.step == "WAIT" or self.press.fault_number is not None
        return done and super().is_idle_for_stop(ctx)

    def reset_process(self) -> None:
        super().reset_process()
        self.step = "WAIT"
        self._hold = 0


@dataclass
class _TrackedWp:
    registered_odometer: float
    separator: int


class SortingEM(EquipmentModule):
    """Runs the belt and diverts registered work pieces into their ramps."""

    def __init__(
        self,
        path: ModulePath,
        belt: AxisModule,
        separators: list[CylinderModule],
        config: PlantConfig,
    ):
        super().__init__(path)
        self.belt = self.add_child(belt)
        self.separators = [self.add_child(sep) for sep in separators]
        self.sensor_position = config.belt_sensor_position
        self.separator_positions = list(config.separator_positions)
        # Registration must happen within transit time plus a tolerance.
        self.registration_window = int(config.belt_length / config.belt_axis.max_speed) + 10
        # Command the separator early enough for a full stroke plus one scan.
        self.divert_lead = (config.travel_ticks + 2) * config.belt_axis.max_speed
        self._prev_sensor = False
        self.tracked: list[_TrackedWp] = []
        self._missing_events: list[int] = []

    def _busy(self) -> bool:
        return bool(self.tracked)

    def scan(self, ctx) -> None:
        if not ctx.sequences_enabled:
            return
        di = ctx.io.digital_inputs
        ai = ctx.io.analog_values
        odometer = ai[io_key(self.belt.path, S.AI_ACTUAL)]

        # registration at the entry sensor (rising edge)
        sensor = di[io_key(self.path, S.DI_BELT_SENSOR)]
        if sensor and not self._prev_sensor:
            code = ai[io_key(self.path, S.AI_COLOR_CODE)]
            if ctx.board.belt_handoffs:
                ctx.board.belt_handoffs.pop(0)
            if code != S.COLOR_CODE_NONE:
                self.tracked.append(_TrackedWp(odometer, int(code) - 1))
        self._prev_sensor = sensor

        # watchdog: a handed-over piece must register within the window
        overdue = [t for t in ctx.board.belt_handoffs if ctx.tick - t > self.registration_window]
        for t in overdue:
            ctx.board.belt_handoffs.remove(t)
            self._missing_events.append(ctx.tick)

        # belt drive
        busy = self._busy() or bool(ctx.board.belt_handoffs)
        if ctx.may_start_cycle and not self.stop_latched:
            self.belt.run_endless(1)
        elif busy:
            self.belt.run_endless(1)
        else:
            self.belt.stop_endless()

        # diversion: serve the frontmost tracked piece
        target = self.tracked[0].separator if self.tracked else None
        if target is not None:
            front = self.tracked[0]
            position = self.sensor_position + (odometer - front.registered_odometer)
            if position >= self.separator_positions[target] - self.divert_lead:
                self.separators[target].act_extend()
            if di[io_key(self.path, f"{S.DI_RAMP_SENSOR}{target}")]:
                self.tracked.pop(0)
                target = None
        for k, sep in enumerate(self.separators):
            if k != target:
                sep.release()

        ctx.board.sorting_busy = self._busy() or bool(ctx.board.belt_handoffs)

    def diagnose(self, ctx) -> list[ErrorEvent]:
        events = []
        for _tick in self._missing_events:
            events.append(
                ErrorEvent(
                    number=ERR_BELT_WP_MISSING,
                    message="Work piece expected but not registered on belt",
                    severity=Severity.WARNING,
                    origin=self.path,
                    cause=f"no registration within {self.registration_window} ticks of handover",
                    tick=ctx.tick,
                )
            )
        self._missing_events.clear()
        return events

    def is_idle_for_stop(self, ctx) -> bool:
        return (
            not self._busy()
            and self.belt.endless_direction == 0
            and super().is_idle_for_stop(ctx)
        )

    def reset_process(self) -> None:
        super().reset_process()
        self.tracked.clear()
        self._missing_events.clear()
        self._prev_sensor = False


class UnitModule(Module):
    """Root of the hierarchy; detects process completion."""

    level = ModuleLevel.UNIT

    def __init__(self, path: ModulePath):
        super().__init__(path)

    def scan(self, ctx) -> None:
        if not ctx.may_start_cycle:
            return
        di = ctx.io.digital_inputs
        unit = ctx.unit_path
        crane = next((m for m in self.children if m.path.segments[-1] == "Crane"), None)
        all_done = (
            di.get(io_key(f"{unit}/Stack", S.DI_STACK_EMPTY), True)
            and not di.get(io_key(f"{unit}/Stack", S.DI_PICKUP_OCCUPIED), False)
            and not di.get(io_key(f"{unit}/Crane/Gripper", S.DI_PRODUCT), False)
            and not di.get(io_key(f"{unit}/Stamp", S.DI_STAMP_OCCUPIED), False)
            and not ctx.board.sorting_busy
            and getattr(crane, "step", "WAIT") == "WAIT"
        )
        if all_done:
            ctx.board.complete_requested = True

    def manifest(self) -> dict:
        return {"signals": [S.DI_ESTOP], "actions": []}
