"""Discrete-time simulation of the pick-and-place cell.

Stations: a stack magazine with a pusher cylinder, a rotary crane with a
lift cylinder and vacuum gripper, a stamp with a press cylinder, and a
sorting conveyor with three separator cylinders pushing work pieces into
ramps. The plant advances one tick per scan (phase 7), reading the output
image written by the control modules and producing the sensor values latched
at the start of the next scan.

Fault injection perturbs the physics only; error identification stays on the
controller side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import signals as S
from .actuators import AxisConfig, AxisFeedback, AxisMotion, CylinderKind
from .hierarchy import io_key


class Material(str, Enum):
    METAL = "Metal"
    PLASTIC = "Plastic"


class Color(str, Enum):
    BLACK = "Black"
    WHITE = "White"
    METALLIC = "Metallic"


COLOR_TO_RAMP = {Color.WHITE: 0, Color.BLACK: 1, Color.METALLIC: 2}
COLOR_TO_CODE = {
    Color.WHITE: S.COLOR_CODE_WHITE,
    Color.BLACK: S.COLOR_CODE_BLACK,
    Color.METALLIC: S.COLOR_CODE_METALLIC,
}


@dataclass(frozen=True)
class Location:
    kind: str  # Stack | CraneGripper | Stamp | Belt | Ramp | Dropped
    position: float | None = None  # Belt only
    index: int | None = None  # Ramp only

    @staticmethod
    def stack() -> "Location":
        return Location("Stack")

    @staticmethod
    def gripper() -> "Location":
        return Location("CraneGripper")

    @staticmethod
    def stamp() -> "Location":
        return Location("Stamp")

    @staticmethod
    def belt(position: float) -> "Location":
        return Location("Belt", position=position)

    @staticmethod
    def ramp(index: int) -> "Location":
        return Location("Ramp", index=index)

    @staticmethod
    def dropped() -> "Location":
        return Location("Dropped")

    def as_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == "Belt":
            d["position"] = self.position
        if self.kind == "Ramp":
            d["index"] = self.index
        return d


@dataclass
class WorkPiece:
    id: int
    material: Material
    color: Color
    location: Location
    stamped: bool = False

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "material": self.material.value,
            "color": self.color.value,
            "stamped": self.stamped,
            "location": self.location.as_dict(),
        }


class FaultKind(str, Enum):
    JAMMED_WORKPIECE = "JammedWorkPiece"
    WP_LOST_FROM_BELT = "WpLostFromBelt"
    GRIPPER_SENSOR_FAIL = "GripperSensorFail"
    MOTOR_JAM = "MotorJam"
    DRAG_DISTURBANCE = "DragDisturbance"


@dataclass(frozen=True)
class FaultSpec:
    """A physical misbehavior active over a tick window."""

    id: int
    kind: FaultKind
    path: str | None = None  # cylinder or axis path
    wp_id: int | None = None  # WpLostFromBelt
    magnitude: float = 0.0  # DragDisturbance
    active_from: int = 0
    active_until: int | None = None

    def active(self, tick: int) -> bool:
        if tick < self.active_from:
            return False
        return self.active_until is None or tick < self.active_until

    def target_key(self) -> str:
        if self.kind == FaultKind.GRIPPER_SENSOR_FAIL:
            return "gripper-sensor"
        if self.kind == FaultKind.WP_LOST_FROM_BELT:
            return f"wp:{self.wp_id}"
        return f"path:{self.path}"

    def overlaps(self, other: "FaultSpec") -> bool:
        if self.target_key() != other.target_key():
            return False
        a_end = self.active_until
        b_end = other.active_until
        if a_end is not None and a_end <= other.active_from:
            return False
        if b_end is not None and b_end <= self.active_from:
            return False
        return True

    @classmethod
    def from_json(cls, doc: dict) -> "FaultSpec":
        return cls(
            id=int(doc["id"]),
            kind=FaultKind(doc["kind"]),
            path=doc.get("path"),
            wp_id=doc.get("wpId"),
            magnitude=float(doc.get("magnitude", 0.0)),
            active_from=int(doc.get("activeFrom", 0)),
            active_until=doc.get("activeUntil"),
        )

    def as_dict(self) -> dict:
        d: dict = {"id": self.id, "kind": self.kind.value, "activeFrom": self.active_from}
        if self.path is not None:
            d["path"] = self.path
        if self.wp_id is not None:
            d["wpId"] = self.wp_id
        if self.kind == FaultKind.DRAG_DISTURBANCE:
            d["magnitude"] = self.magnitude
        if self.active_until is not None:
            d["activeUntil"] = self.active_until
        return d


@dataclass(frozen=True)
class WorkPieceSpec:
    material: Material
    color: Color


DEFAULT_RECIPE = (
    WorkPieceSpec(Material.PLASTIC, Color.WHITE),
    WorkPieceSpec(Material.PLASTIC, Color.BLACK),
    WorkPieceSpec(Material.METAL, Color.METALLIC),
    WorkPieceSpec(Material.PLASTIC, Color.WHITE),
    WorkPieceSpec(Material.PLASTIC, Color.BLACK),
    WorkPieceSpec(Material.METAL, Color.METALLIC),
)

DEFAULT_EMS = ("Stack", "Crane", "Stamp", "SortingConveyor")


def default_crane_axis() -> AxisConfig:
    return AxisConfig(
        motion=AxisMotion.ROTARY,
        limited=True,
        negative_limit=0.0,
        positive_limit=360.0,
        feedback=AxisFeedback.POTENTIOMETER,
        max_speed=5.0,
        drag_tolerance_units=12.0,
        drag_tolerance_ticks=5,
    )


def default_belt_axis() -> AxisConfig:
    return AxisConfig(
        motion=AxisMotion.LINEAR,
        limited=False,
        feedback=AxisFeedback.INCREMENTAL_ENCODER,
        max_speed=2.0,
        drag_tolerance_units=12.0,
        drag_tolerance_ticks=5,
    )


@dataclass(frozen=True)
class PlantConfig:
    """Fixed layout and kinematic constants of the simulated cell."""

    unit_name: str = "xPPU"
    equipment_modules: tuple[str, ...] = DEFAULT_EMS
    stack_capacity: int = 8
    recipe: tuple[WorkPieceSpec, ...] = DEFAULT_RECIPE
    belt_length: float = 100.0
    separator_positions: tuple[float, ...] = (40.0, 64.0, 88.0)
    belt_sensor_position: float = 10.0
    station_angles: dict = field(
        default_factory=lambda: {"stack": 0.0, "stamp": 90.0, "belt": 180.0}
    )
    travel_ticks: int = 8
    press_hold_ticks: int = 12
    grip_dwell_ticks: int = 2
    crane_axis: AxisConfig = field(default_factory=default_crane_axis)
    belt_axis: AxisConfig = field(default_factory=default_belt_axis)
    cylinder_kinds: dict = field(
        default_factory=lambda: {
            "stack_pusher": CylinderKind.BISTABLE,
            "crane_lift": CylinderKind.MONOSTABLE,
            "stamp_press": CylinderKind.BISTABLE,
            "separator": CylinderKind.MONOSTABLE,
        }
    )

    def __post_init__(self) -> None:
        if len(self.recipe) > self.stack_capacity:
            raise ValueError("recipe exceeds stack capacity")
        positions = list(self.separator_positions)
        if positions != sorted(positions) or len(set(positions)) != len(positions):
            raise ValueError("separator positions must be strictly increasing")
        if positions and positions[-1] >= self.belt_length:
            raise ValueError("separator positions must lie before the belt end")

    @classmethod
    def from_json(cls, doc: dict) -> "PlantConfig":
        kwargs: dict = {}
        if "recipe" in doc:
            kwargs["recipe"] = tuple(
                WorkPieceSpec(Material(item["material"]), Color(item["color"]))
                for item in doc["recipe"]
            )
        for src, dst in [
            ("stackCapacity", "stack_capacity"),
            ("beltLength", "belt_length"),
            ("pressHoldTicks", "press_hold_ticks"),
            ("travelTicks", "travel_ticks"),
            ("gripDwellTicks", "grip_dwell_ticks"),
        ]:
            if src in doc:
                kwargs[dst] = doc[src]
        if "separatorPositions" in doc:
            kwargs["separator_positions"] = tuple(float(p) for p in doc["separatorPositions"])
        if "equipmentModules" in doc:
            kwargs["equipment_modules"] = tuple(doc["equipmentModules"])
        if "cylinderKinds" in doc:
            kinds = {}
            for slot, name in doc["cylinderKinds"].items():
                try:
                    kinds[slot] = CylinderKind(name)
                except ValueError:
                    raise ValueError(f"unknown actuator kind: {name!r}") from None
            base = cls().cylinder_kinds | kinds
            kwargs["cylinder_kinds"] = base
        return cls(**kwargs)


class PlantError(Exception):
    pass


class Plant:
    """Owns all physical truth; stepped once per scan after outputs are written."""

    def __init__(self, config: PlantConfig):
        self.config = config
        unit = config.unit_name
        self.unit_path = unit
        self.paths = {
            "pusher": f"{unit}/Stack/Pusher",
            "crane_base": f"{unit}/Crane/Base",
            "lift": f"{unit}/Crane/Lift",
            "gripper": f"{unit}/Crane/Gripper",
            "press": f"{unit}/Stamp/Press",
            "belt": f"{unit}/SortingConveyor/Belt",
        }
        self.separator_paths = [
            f"{unit}/SortingConveyor/Separator{i}"
            for i in range(len(config.separator_positions))
        ]
        self.estop_pressed = False
        self.work_pieces: dict[int, WorkPiece] = {}
        self.stack: list[int] = []
        for i, spec in enumerate(config.recipe):
            wp = WorkPiece(i + 1, spec.material, spec.color, Location.stack())
            self.work_pieces[wp.id] = wp
            self.stack.append(wp.id)
        self.pickup: int | None = None
        self.holding: int | None = None
        self.stamp_slot: int | None = None
        self._press_hold = 0
        self.belt_wps: dict[int, float] = {}
        self.ramps: list[list[int]] = [[] for _ in config.separator_positions]
        self._ramp_pulse = [False] * len(config.separator_positions)
        # cylinder extents in travel ticks
        travel = config.travel_ticks
        self.travel = travel
        self.cylinders: dict[str, int] = {self.paths["pusher"]: 0, self.paths["lift"]: 0,
                                          self.paths["press"]: 0}
        for p in self.separator_paths:
            self.cylinders[p] = 0
        self.crane_actual = 0.0
        self.belt_actual = 0.0
        self._pusher_delivered = False
        self.faults: dict[int, FaultSpec] = {}
        self._sensors_digital: dict[str, bool] = {}
        self._sensors_analog: dict[str, float] = {}
        self._rebuild_sensors()

    # -- operator / scenario hooks --------------------------------------------

    def set_estop(self, pressed: bool) -> None:
        # Hard-wired safety input: visible at the very next input latch.
        self.estop_pressed = pressed
        self._sensors_digital[io_key(self.unit_path, S.DI_ESTOP)] = pressed

    def inject_fault(self, spec: FaultSpec) -> tuple[bool, str | None]:
        if spec.kind in (FaultKind.JAMMED_WORKPIECE,):
            if spec.path not in self.cylinders:
                return False, f"unknown cylinder path: {spec.path}"
        if spec.kind in (FaultKind.MOTOR_JAM, FaultKind.DRAG_DISTURBANCE):
            if spec.path not in (self.paths["crane_base"], self.paths["belt"]):
                return False, f"unknown axis path: {spec.path}"
        if spec.kind == FaultKind.WP_LOST_FROM_BELT and spec.wp_id not in self.work_pieces:
            return False, f"unknown work piece: {spec.wp_id}"
        if spec.id in self.faults:
            return False, f"fault id {spec.id} already used"
        for other in self.faults.values():
            if spec.overlaps(other):
                return False, f"overlapping fault on {spec.target_key()}"
        self.faults[spec.id] = spec
        return True, None

    def clear_fault(self, fault_id: int) -> tuple[bool, str | None]:
        if fault_id not in self.faults:
            return False, f"no such fault: {fault_id}"
        del self.faults[fault_id]
        return True, None

    def _fault_active(self, tick: int, kind: FaultKind, *, path: str | None = None,
                      wp_id: int | None = None) -> FaultSpec | None:
        for spec in self.faults.values():
            if spec.kind != kind or not spec.active(tick):
                continue
            if path is not None and spec.path != path:
                continue
            if wp_id is not None and spec.wp_id != wp_id:
                continue
            return spec
        return None

    # -- physics ---------------------------------------------------------------

    def step(self, outputs: dict[str, bool], analog: dict[str, float], tick: int) -> None:
        self._ramp_pulse = [False] * len(self._ramp_pulse)
        self._step_cylinders(outputs, tick)
        self._step_axes(analog, tick)
        self._step_gripper(outputs, tick)
        self._step_stamp()
        self._step_belt(tick)
        self._rebuild_sensors()

    def _cyl_direction(self, path: str, kind: CylinderKind, outputs: dict[str, bool]) -> int:
        do_extend = outputs.get(io_key(path, S.DO_EXTEND), False)
        if kind == CylinderKind.MONOSTABLE:
            return 1 if do_extend else -1
        do_retract = outputs.get(io_key(path, S.DO_RETRACT), False)
        if do_extend and not do_retract:
            return 1
        if do_retract and not do_extend:
            return -1
        return 0

    def _step_cylinders(self, outputs: dict[str, bool], tick: int) -> None:
        kinds = {
            self.paths["pusher"]: self.config.cylinder_kinds["stack_pusher"],
            self.paths["lift"]: self.config.cylinder_kinds["crane_lift"],
            self.paths["press"]: self.config.cylinder_kinds["stamp_press"],
        }
        for p in self.separator_paths:
            kinds[p] = self.config.cylinder_kinds["separator"]
        for path, extent in self.cylinders.items():
            if self._fault_active(tick, FaultKind.JAMMED_WORKPIECE, path=path):
                continue
            direction = self._cyl_direction(path, kinds[path], outputs)
            self.cylinders[path] = min(max(extent + direction, 0), self.travel)
        # A full pusher stroke delivers the next work piece to the pickup point.
        pusher = self.cylinders[self.paths["pusher"]]
        if pusher == self.travel and not self._pusher_delivered:
            self._pusher_delivered = True
            if self.stack and self.pickup is None:
                wp_id = self.stack.pop(0)
                self.pickup = wp_id
                # still at the stack station, but now in front of the magazine
                self.work_pieces[wp_id].location = Location.stack()
        if pusher == 0:
            self._pusher_delivered = False

    def _track(self, actual: float, reference: float, speed: float, tick: int,
               axis_path: str) -> float:
        if self._fault_active(tick, FaultKind.MOTOR_JAM, path=axis_path):
            return actual
        drag = self._fault_active(tick, FaultKind.DRAG_DISTURBANCE, path=axis_path)
        if drag is not None:
            # Slipping drive: tracking speed reduced by the disturbance
            # magnitude, so the deviation grows while the axis still moves.
            speed = max(speed - drag.magnitude, 0.0)
        gap = reference - actual
        step = min(speed, abs(gap))
        if gap > 0:
            return actual + step
        if gap < 0:
            return actual - step
        return actual

    def _step_axes(self, analog: dict[str, float], tick: int) -> None:
        crane_ref = analog.get(io_key(self.paths["crane_base"], S.AO_REFERENCE), 0.0)
        self.crane_actual = self._track(
            self.crane_actual, crane_ref, self.config.crane_axis.max_speed, tick,
            self.paths["crane_base"],
        )
        belt_ref = analog.get(io_key(self.paths["belt"], S.AO_REFERENCE), 0.0)
        new_belt = self._track(
            self.belt_actual, belt_ref, self.config.belt_axis.max_speed, tick,
            self.paths["belt"],
        )
        self._belt_delta = new_belt - self.belt_actual
        self.belt_actual = new_belt

    def _station_at_crane(self) -> str | None:
        for name, angle in self.config.station_angles.items():
            if abs(self.crane_actual - angle) <= 0.5:
                return name
        return None

    def _step_gripper(self, outputs: dict[str, bool], tick: int) -> None:
        do_grip = outputs.get(io_key(self.paths["gripper"], S.DO_GRIP), False)
        lift_down = self.cylinders[self.paths["lift"]] == self.travel
        station = self._station_at_crane()
        if do_grip and self.holding is None and lift_down and station is not None:
            if self._fault_active(tick, FaultKind.GRIPPER_SENSOR_FAIL) is not None:
                return  # nothing is caught while the gripper is failing
            if station == "stack" and self.pickup is not None:
                self.holding = self.pickup
                self.pickup = None
            elif station == "stamp" and self.stamp_slot is not None:
                self.holding = self.stamp_slot
                self.stamp_slot = None
                self._press_hold = 0
            if self.holding is not None:
                self.work_pieces[self.holding].location = Location.gripper()
        elif not do_grip and self.holding is not None:
            wp = self.work_pieces[self.holding]
            self.holding = None
            if lift_down and station == "stamp" and self.stamp_slot is None:
                self.stamp_slot = wp.id
                wp.location = Location.stamp()
            elif lift_down and station == "belt":
                if self._fault_active(tick, FaultKind.WP_LOST_FROM_BELT, wp_id=wp.id):
                    wp.location = Location.dropped()
                else:
                    self.belt_wps[wp.id] = 0.0
                    wp.location = Location.belt(0.0)
            elif lift_down and station == "stack" and self.pickup is None:
                self.pickup = wp.id
                wp.location = Location.stack()
            else:
                wp.location = Location.dropped()

    def _step_stamp(self) -> None:
        press_down = self.cylinders[self.paths["press"]] == self.travel
        if self.stamp_slot is not None and press_down:
            self._press_hold += 1
            if self._press_hold >= self.config.press_hold_ticks:
                self.work_pieces[self.stamp_slot].stamped = True
        elif self.stamp_slot is None:
            self._press_hold = 0

    def _step_belt(self, tick: int) -> None:
        delta = getattr(self, "_belt_delta", 0.0)
        for wp_id in list(self.belt_wps):
            if self._fault_active(tick, FaultKind.WP_LOST_FROM_BELT, wp_id=wp_id):
                del self.belt_wps[wp_id]
                self.work_pieces[wp_id].location = Location.dropped()
                continue
            prev = self.belt_wps[wp_id]
            new = prev + delta
            diverted = False
            for k, sep_pos in enumerate(self.config.separator_positions):
                extended = self.cylinders[self.separator_paths[k]] == self.travel
                if extended and prev < sep_pos <= new:
                    del self.belt_wps[wp_id]
                    self.ramps[k].append(wp_id)
                    self.work_pieces[wp_id].location = Location.ramp(k)
                    self._ramp_pulse[k] = True
                    diverted = True
                    break
            if diverted:
                continue
            if new > self.config.belt_length:
                del self.belt_wps[wp_id]
                self.work_pieces[wp_id].location = Location.dropped()
            else:
                self.belt_wps[wp_id] = new
                self.work_pieces[wp_id].location = Location.belt(new)

    # -- sensors ---------------------------------------------------------------

    def _rebuild_sensors(self) -> None:
        digital: dict[str, bool] = {}
        analog: dict[str, float] = {}
        digital[io_key(self.unit_path, S.DI_ESTOP)] = self.estop_pressed
        for path, extent in self.cylinders.items():
            digital[io_key(path, S.DI_EXTENDED)] = extent == self.travel
            digital[io_key(path, S.DI_RETRACTED)] = extent == 0
        analog[io_key(self.paths["crane_base"], S.AI_ACTUAL)] = self.crane_actual
        analog[io_key(self.paths["belt"], S.AI_ACTUAL)] = self.belt_actual
        digital[io_key(self.paths["gripper"], S.DI_PRODUCT)] = self.holding is not None
        stack_em = f"{self.unit_path}/Stack"
        digital[io_key(stack_em, S.DI_STACK_EMPTY)] = not self.stack
        digital[io_key(stack_em, S.DI_PICKUP_OCCUPIED)] = self.pickup is not None
        digital[io_key(stack_em, S.DI_PICKUP_METAL)] = (
            self.pickup is not None
            and self.work_pieces[self.pickup].material == Material.METAL
        )
        stamp_em = f"{self.unit_path}/Stamp"
        digital[io_key(stamp_em, S.DI_STAMP_OCCUPIED)] = self.stamp_slot is not None
        sort_em = f"{self.unit_path}/SortingConveyor"
        sensor_pos = self.config.belt_sensor_position
        window = self.config.belt_axis.max_speed
        in_window = [
            wp_id
            for wp_id, pos in self.belt_wps.items()
            if sensor_pos <= pos < sensor_pos + window
        ]
        digital[io_key(sort_em, S.DI_BELT_SENSOR)] = bool(in_window)
        color_code = S.COLOR_CODE_NONE
        if in_window:
            color_code = COLOR_TO_CODE[self.work_pieces[in_window[0]].color]
        analog[io_key(sort_em, S.AI_COLOR_CODE)] = color_code
        for k in range(len(self._ramp_pulse)):
            digital[io_key(sort_em, f"{S.DI_RAMP_SENSOR}{k}")] = self._ramp_pulse[k]
        self._sensors_digital = digital
        self._sensors_analog = analog

    def read_sensors(self) -> tuple[dict[str, bool], dict[str, float]]:
        return dict(self._sensors_digital), dict(self._sensors_analog)

    # -- observation -------------------------------------------------------------

    def observe(self) -> dict:
        return {
            "cranePosition": self.crane_actual,
            "beltPosition": self.belt_actual,
            "cylinders": {path: extent for path, extent in sorted(self.cylinders.items())},
            "workPieces": [
                self.work_pieces[wp_id].as_dict() for wp_id in sorted(self.work_pieces)
            ],
            "activeFaults": [self.faults[k].as_dict() for k in sorted(self.faults)],
            "estopPressed": self.estop_pressed,
        }

    def locations_census(self) -> dict[int, str]:
        return {wp.id: wp.location.kind for wp in self.work_pieces.values()}
