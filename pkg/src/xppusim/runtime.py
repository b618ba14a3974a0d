"""Scan-cycle runtime: command queue, fixed phase order, snapshots.

Each scan runs the same phases: (1) drain and apply queued commands,
(2) latch plant sensors into the input image, (3) evaluate machine state and
operating mode, (4) evaluate module logic top-down including error
identification, (5) apply the error reaction, (6/7) hand the output image to
the plant and advance it one tick, (8) emit an immutable snapshot. All state
is owned by the single thread executing scans; external parties interact
through the bounded command queue and snapshot values only.
"""

from __future__ import annotations

import queue
from dataclasses import dataclass
from enum import Enum
from typing import Any

from . import signals as S
from .actuators import AxisModule, CylinderModule, GripperModule
from .errors.contract import ErrorCatalog, LocalAction, default_catalog
from .errors.oo import ErrorManager, ErrorSink, OoStrategy
from .errors.procedural import ProceduralStrategy
from .hierarchy import BuildError, IoImage, Module, ModuleLevel, ModulePath, io_key
from .packml import (
    FROZEN_STATES,
    PROCESS_STATES,
    SAFE_OUTPUT_STATES,
    MachineState,
    ModeManager,
    OperatingMode,
    StateCommand,
    StateMachine,
)
from .plant import FaultSpec, Plant, PlantConfig
from .process import CraneEM, ProcessBoard, SortingEM, StackEM, StampEM, UnitModule

SCAN_PERIOD_MS = 10  # simulated scan period; wall clock is decoupled
COMMAND_QUEUE_LIMIT = 1024


class CommandKind(str, Enum):
    ESTOP = "EStop"
    ESTOP_RELEASE = "EStopRelease"
    ACKNOWLEDGE = "Acknowledge"
    MODE_SWITCH = "ModeSwitch"
    MANUAL_OUTPUT = "ManualOutput"
    JOG = "Jog"
    INJECT_FAULT = "InjectFault"
    CLEAR_FAULT = "ClearFault"
    STATE_COMMAND = "StateCommand"
    REACTION_OVERRIDE = "ReactionOverride"


class CommandSource(str, Enum):
    HMI = "HMI"
    SCENARIO = "Scenario"


@dataclass(frozen=True)
class Command:
    kind: CommandKind
    source: CommandSource = CommandSource.HMI
    record_id: int | None = None
    mode: OperatingMode | None = None
    path: str | None = None
    signal: str | None = None
    value: bool | None = None
    direction: int | None = None
    fault: FaultSpec | None = None
    fault_id: int | None = None
    state_command: StateCommand | None = None
    reaction_code: int | None = None

    @classmethod
    def from_json(cls, doc: dict, source: CommandSource = CommandSource.HMI) -> "Command":
        kind = CommandKind(doc["kind"])
        kwargs: dict[str, Any] = {"kind": kind, "source": source}
        if kind == CommandKind.ACKNOWLEDGE:
            kwargs["record_id"] = doc.get("recordId")
        elif kind == CommandKind.MODE_SWITCH:
            kwargs["mode"] = OperatingMode(doc["mode"])
        elif kind == CommandKind.MANUAL_OUTPUT:
            kwargs.update(path=doc["path"], signal=doc["signal"], value=bool(doc["value"]))
        elif kind == CommandKind.JOG:
            kwargs.update(path=doc["path"], direction=int(doc["direction"]))
        elif kind == CommandKind.INJECT_FAULT:
            kwargs["fault"] = FaultSpec.from_json(doc["fault"])
        elif kind == CommandKind.CLEAR_FAULT:
            kwargs["fault_id"] = int(doc["faultId"])
        elif kind == CommandKind.STATE_COMMAND:
            kwargs["state_command"] = StateCommand(doc["command"])
        elif kind == CommandKind.REACTION_OVERRIDE:
            kwargs["reaction_code"] = int(doc["code"])
        return cls(**kwargs)


@dataclass
class AuditEvent:
    tick: int
    kind: str
    detail: str


class ScanContext:
    """Per-scan view handed to modules and the error strategy."""

    def __init__(self, runtime: "Runtime"):
        self._rt = runtime
        self.tick = 0
        self.machine_state = MachineState.STOPPED
        self.mode = OperatingMode.AUTOMATIC
        self.frozen = False
        self.sequences_enabled = False
        self.may_start_cycle = False

    @property
    def io(self) -> IoImage:
        return self._rt.io

    @property
    def board(self) -> ProcessBoard:
        return self._rt.board

    @property
    def unit_path(self) -> str:
        return self._rt.plant.unit_path

    def manual_for(self, path: ModulePath) -> bool:
        return self.mode == OperatingMode.MANUAL

    def audit(self, kind: str, detail: str) -> None:
        self._rt.audit(kind, detail)

    def apply_machine_action(self, action: LocalAction) -> bool:
        return self._rt.apply_machine_action(action)

    def apply_local_action(self, module: Module, action: LocalAction) -> None:
        self._rt.apply_local_action(module, action)


def build_xppu(config: PlantConfig) -> tuple[UnitModule, list[Module]]:
    """Assemble the module hierarchy for the pick-and-place cell."""
    if not config.equipment_modules:
        raise BuildError("Unit requires at least one equipment module")
    unit_path = ModulePath((config.unit_name,))
    unit = UnitModule(unit_path)
    known = {"Stack", "Crane", "Stamp", "SortingConveyor"}
    seen: set[str] = set()
    for name in config.equipment_modules:
        if name not in known:
            raise BuildError(f"unknown equipment module: {name}")
        if name in seen:
            raise BuildError(f"duplicate module paths: {unit_path.child(name)}")
        seen.add(name)
        em_path = unit_path.child(name)
        if name == "Stack":
            pusher = CylinderModule(
                em_path.child("Pusher"), config.cylinder_kinds["stack_pusher"], config.travel_ticks
            )
            unit.add_child(StackEM(em_path, pusher))
        elif name == "Crane":
            base = AxisModule(em_path.child("Base"), config.crane_axis)
            lift = CylinderModule(
                em_path.child("Lift"), config.cylinder_kinds["crane_lift"], config.travel_ticks
            )
            gripper = GripperModule(em_path.child("Gripper"))
            unit.add_child(CraneEM(em_path, base, lift, gripper, config))
        elif name == "Stamp":
            press = CylinderModule(
                em_path.child("Press"), config.cylinder_kinds["stamp_press"], config.travel_ticks
            )
            unit.add_child(StampEM(em_path, press, config))
        elif name == "SortingConveyor":
            belt = AxisModule(em_path.child("Belt"), config.belt_axis)
            separators = [
                CylinderModule(
                    em_path.child(f"Separator{i}"),
                    config.cylinder_kinds["separator"],
                    config.travel_ticks,
                )
                for i in range(len(config.separator_positions))
            ]
            em = SortingEM(em_path, belt, separators, config)
            # Application-specific reaction: this module also acts on code 32.
            em.app_reactions[32] = LocalAction.STOP_END_OF_CYCLE.value
            unit.add_child(em)
    modules = list(unit.walk())
    paths = [str(m.path) for m in modules]
    if len(paths) != len(set(paths)):
        raise BuildError("duplicate module paths")
    return unit, modules


class Runtime:
    """Deterministic scan executor for one machine program."""

    def __init__(
        self,
        config: PlantConfig | None = None,
        strategy: str = "procedural",
        catalog: ErrorCatalog | None = None,
        matrices_doc: dict | None = None,
        manager: ErrorManager | None = None,
        sink: ErrorSink | None = None,
    ):
        self.config = config if config is not None else PlantConfig()
        self.catalog = catalog if catalog is not None else default_catalog()
        self.plant = Plant(self.config)
        self.unit, self.modules = build_xppu(self.config)
        self.registry: dict[str, Module] = {str(m.path): m for m in self.modules}
        self.machine = StateMachine()
        self.mode_manager = ModeManager()
        self.board = ProcessBoard()
        self.io = IoImage()
        self.tick = 0
        self.audit_log: list[AuditEvent] = []
        self.visit_log: list[str] = []
        self._queue: queue.Queue[Command] = queue.Queue(maxsize=COMMAND_QUEUE_LIMIT)
        self._pending_state_commands: list[StateCommand] = []
        self._ctx = ScanContext(self)

        if strategy == "procedural":
            if matrices_doc is None:
                from . import data

                matrices_doc = data.load_json("reaction_matrices.json")
            self.strategy = ProceduralStrategy(self.catalog, self.audit, matrices_doc)
        elif strategy == "oo":
            self.strategy = OoStrategy(self.catalog, self.audit, manager=manager, sink=sink)
        else:
            raise BuildError(f"unknown error-handling strategy: {strategy}")
        self.strategy.bind(self.modules)

        self._register_io()

    # -- construction helpers ---------------------------------------------------

    def _register_io(self) -> None:
        for module in self.modules:
            if isinstance(module, CylinderModule):
                self.io.register_output(io_key(module.path, S.DO_EXTEND))
                if module.manifest()["signals"].count(S.DO_RETRACT):
                    self.io.register_output(io_key(module.path, S.DO_RETRACT))
            elif isinstance(module, GripperModule):
                self.io.register_output(io_key(module.path, S.DO_GRIP))
            elif isinstance(module, AxisModule):
                self.io.register_analog(
                    io_key(module.path, S.AO_REFERENCE), module.reference_position
                )
        digital, analog = self.plant.read_sensors()
        self.io.latch_inputs(digital, analog)
        self.io.sort_keys()

    # -- external surface ----------------------------------------------------------

    def audit(self, kind: str, detail: str) -> None:
        self.audit_log.append(AuditEvent(self.tick, kind, detail))

    def enqueue_command(self, command: Command) -> bool:
        """Queue a command for atomic application at the next scan start.

        Returns False when the bounded queue is full; the control loop never
        blocks on operator input.
        """
        try:
            self._queue.put_nowait(command)
            return True
        except queue.Full:
            self.audit("queue-overflow", f"command rejected: {command.kind.value}")
            return False

    def run(self, ticks: int) -> list[dict]:
        if ticks < 0:
            raise ValueError("tick count must be >= 0")
        return [self.scan() for _ in range(ticks)]

    # -- scan ------------------------------------------------------------------------

    def scan(self) -> dict:
        tick = self.tick
        ctx = self._ctx
        ctx.tick = tick

        # phase 1: commands latch at scan start
        self._apply_commands()

        # phase 2: latch plant sensors
        digital, analog = self.plant.read_sensors()
        self.io.latch_inputs(digital, analog)

        # phase 3: machine state and operating mode
        self._evaluate_machine(ctx)

        # phase 4: module logic, top-down
        state = self.machine.state
        ctx.machine_state = state
        ctx.mode = self.mode_manager.current
        ctx.frozen = state in FROZEN_STATES
        ctx.sequences_enabled = state in PROCESS_STATES
        ctx.may_start_cycle = state == MachineState.EXECUTE
        self.visit_log = []
        if state == MachineState.RESETTING:
            self.unit.command_home(ctx)
        if hasattr(self.strategy, "set_tick"):
            self.strategy.set_tick(tick)
        for module in self.modules:
            self.visit_log.append(str(module.path))
            module.scan(ctx)
            for event in module.diagnose(ctx):
                module.error_port.report(event)

        # phase 5: error reaction
        self.strategy.react(ctx)
        state = self.machine.state
        ctx.machine_state = state
        if state in SAFE_OUTPUT_STATES or self.io.digital_inputs[
            io_key(self.plant.unit_path, S.DI_ESTOP)
        ]:
            self.unit.safe_state(ctx)
        self._refresh_statuses()

        # phases 6+7: write outputs to the plant and advance physics
        self.plant.step(self.io.digital_outputs, self.io.analog_values, tick)

        # phase 8: snapshot
        snapshot = self._build_snapshot(tick)
        self.tick += 1
        return snapshot

    # -- phase helpers ------------------------------------------------------------------

    def _apply_commands(self) -> None:
        while True:
            try:
                command = self._queue.get_nowait()
            except queue.Empty:
                break
            self._apply_command(command)

    def _apply_command(self, cmd: Command) -> None:
        kind = cmd.kind
        if kind == CommandKind.ESTOP:
            self.plant.set_estop(True)
            self.audit("estop", "emergency stop actuated")
        elif kind == CommandKind.ESTOP_RELEASE:
            self.plant.set_estop(False)
            self.audit("estop", "emergency stop released")
        elif kind == CommandKind.ACKNOWLEDGE:
            if not self.strategy.acknowledge(cmd.record_id):
                self.audit("ack-rejected", f"no active record {cmd.record_id}")
        elif kind == CommandKind.MODE_SWITCH:
            self.mode_manager.request(cmd.mode)
        elif kind == CommandKind.MANUAL_OUTPUT:
            self._apply_manual_output(cmd)
        elif kind == CommandKind.JOG:
            self._apply_jog(cmd)
        elif kind == CommandKind.INJECT_FAULT:
            ok, reason = self.plant.inject_fault(cmd.fault)
            if not ok:
                self.audit("fault-rejected", reason)
        elif kind == CommandKind.CLEAR_FAULT:
            ok, reason = self.plant.clear_fault(cmd.fault_id)
            if not ok:
                self.audit("fault-rejected", reason)
        elif kind == CommandKind.STATE_COMMAND:
            self._pending_state_commands.append(cmd.state_command)
        elif kind == CommandKind.REACTION_OVERRIDE:
            try:
                self.strategy.set_operator_code(cmd.reaction_code)
            except ValueError as exc:
                self.audit("override-rejected", str(exc))

    def _apply_manual_output(self, cmd: Command) -> None:
        if self.mode_manager.current != OperatingMode.MANUAL:
            self.audit("command-rejected", f"rejected: wrong mode (ManualOutput {cmd.path}.{cmd.signal})")
            return
        module = self.registry.get(cmd.path)
        if module is None:
            self.audit("command-rejected", f"unknown module path: {cmd.path}")
            return
        writable = [s for s in module.manifest()["signals"] if s.startswith("DO_")]
        if cmd.signal not in writable:
            self.audit("command-rejected", f"signal absent in variant: {cmd.path}.{cmd.signal}")
            return
        module.manual_overrides[cmd.signal] = cmd.value

    def _apply_jog(self, cmd: Command) -> None:
        if self.mode_manager.current != OperatingMode.JOG:
            self.audit("command-rejected", f"rejected: wrong mode (Jog {cmd.path})")
            return
        module = self.registry.get(cmd.path)
        if not isinstance(module, AxisModule):
            self.audit("command-rejected", f"not an axis: {cmd.path}")
            return
        if not module.jog(cmd.direction):
            self.audit("command-rejected", f"axis faulted: {cmd.path}")

    def _evaluate_machine(self, ctx: ScanContext) -> None:
        tick = self.tick

        # Acting states entered in an earlier scan complete first, so every
        # acting state is visible in at least one snapshot.
        before = self.machine.state
        self.machine.tick_acting(tick, done=self._acting_done(ctx))
        if self.machine.state != before:
            self._on_state_entered(self.machine.state)

        estop = self.io.digital_inputs[io_key(self.plant.unit_path, S.DI_ESTOP)]
        if estop and self.machine.allowed(StateCommand.ABORT):
            self._command_machine(StateCommand.ABORT, "estop")

        for state_command in self._pending_state_commands:
            if state_command == StateCommand.CLEAR and estop:
                self.audit("transition-rejected", "Clear rejected: emergency stop engaged")
                continue
            accepted, reason = self._command_machine(state_command, "operator")
            if not accepted:
                self.audit("transition-rejected", reason)
        self._pending_state_commands.clear()

        if self.board.complete_requested:
            self.board.complete_requested = False
            if self.machine.state == MachineState.EXECUTE:
                self._command_machine(StateCommand.COMPLETE, "process-complete")

        result = self.mode_manager.evaluate(
            tick,
            self.machine.state,
            interlocks=self._automatic_interlocks,
            recovery_gate=lambda: self.strategy.recovery_gate(self.machine.state.value),
        )
        if result is not None:
            accepted, reason = result
            if not accepted:
                self.audit("mode-rejected", reason)
            else:
                mode = self.mode_manager.current
                self.strategy.recovery.on_mode_entered(mode.value)
                if mode == OperatingMode.AUTOMATIC:
                    self.strategy.recovery.on_automatic_granted()

    def _command_machine(self, cmd: StateCommand, trigger: str) -> tuple[bool, str | None]:
        accepted, reason = self.machine.command(cmd, self.tick, trigger)
        if accepted:
            self._on_state_entered(self.machine.state)
        return accepted, reason

    def _on_state_entered(self, state: MachineState) -> None:
        if state == MachineState.RESETTING:
            self.strategy.on_reset()
            self.board.reset()
            for module in self.modules:
                module.reset_process()
        elif state == MachineState.STARTING:
            self.board.reset()
            for module in self.modules:
                module.reset_process()
        elif state in (MachineState.UNHOLDING, MachineState.UNSUSPENDING):
            for module in self.modules:
                module.hold_frozen = False

    def _acting_done(self, ctx: ScanContext) -> bool:
        state = self.machine.state
        if state == MachineState.RESETTING:
            return self.unit.is_home(ctx)
        if state == MachineState.STARTING:
            return self.unit.is_home(ctx)
        if state in (MachineState.STOPPING, MachineState.COMPLETING):
            return self.unit.is_idle_for_stop(ctx)
        if state == MachineState.ABORTING:
            return not any(self.io.digital_outputs.values())
        if state in (MachineState.HOLDING, MachineState.SUSPENDING):
            return not self._stroke_in_progress()
        if state in (MachineState.CLEARING, MachineState.UNHOLDING, MachineState.UNSUSPENDING):
            return True
        return False

    def _stroke_in_progress(self) -> bool:
        return any(
            m.moving for m in self.modules if isinstance(m, CylinderModule)
        )

    def _automatic_interlocks(self) -> str | None:
        if self.strategy.active_records():
            return "open error"
        for module in self.modules:
            if isinstance(module, AxisModule) and module.config.limited:
                actual = self.io.analog_values[io_key(module.path, S.AI_ACTUAL)]
                cfg = module.config
                if not cfg.negative_limit <= actual <= cfg.positive_limit:
                    return f"axis outside limits: {module.path}"
        if any(spec.active(self.tick) for spec in self.plant.faults.values()):
            return "fault injection active"
        return None

    def apply_machine_action(self, action: LocalAction) -> bool:
        state = self.machine.state
        command = {
            LocalAction.ABORT_NOW: StateCommand.ABORT,
            LocalAction.STOP_END_OF_CYCLE: StateCommand.STOP,
            LocalAction.HOLD: StateCommand.HOLD,
            LocalAction.SUSPEND: StateCommand.SUSPEND,
            LocalAction.FINISH_CYCLE: StateCommand.STOP,
        }.get(action)
        if command is None:
            return False
        if not self.machine.allowed(command):
            return False
        if command == StateCommand.STOP and state == MachineState.STOPPING:
            return False
        accepted, _ = self._command_machine(command, "reaction")
        return accepted

    def apply_local_action(self, module: Module, action: LocalAction) -> None:
        if action == LocalAction.ABORT_NOW:
            module.safe_state(self._ctx)
        elif action in (LocalAction.STOP_END_OF_CYCLE, LocalAction.FINISH_CYCLE):
            module.stop_latched = True
        elif action in (LocalAction.HOLD, LocalAction.SUSPEND):
            module.hold_frozen = True

    def _refresh_statuses(self) -> None:
        visible = self.strategy.visible_records()
        active_origins = {str(r.origin) for r in visible if r.active}
        last_number: dict[str, int] = {}
        for record in visible:
            last_number[str(record.origin)] = record.number
        for module in self.modules:
            path = str(module.path)
            module.status.has_error = path in active_origins
            if module.fault_number is not None and not module.status.has_error:
                module.clear_fault_latch()
            module.status.last_error_number = last_number.get(path)
        # motion flags bottom-up
        for module in reversed(self.modules):
            if isinstance(module, (CylinderModule, AxisModule)):
                module.status.motion_active = module.moving
            elif isinstance(module, GripperModule):
                module.status.motion_active = False
            else:
                module.status.motion_active = any(
                    child.status.motion_active for child in module.children
                )

    # -- snapshots ------------------------------------------------------------------------

    def _module_status_entry(self, module: Module) -> dict:
        entry = module.status.as_dict()
        if isinstance(module, CylinderModule):
            entry["Status"] = module.cyl_status.value
        elif isinstance(module, AxisModule):
            entry["Status"] = module.axis_state.value
            entry["axis"] = {
                "config": module.config.as_dict(),
                "referencePosition": module.reference_position,
                "actualPosition": self.io.analog_values[io_key(module.path, S.AI_ACTUAL)],
            }
        elif isinstance(module, GripperModule):
            entry["Status"] = "Gripping" if module.gripping else "Released"
        elif module.level == ModuleLevel.EQUIPMENT_MODULE:
            entry["Status"] = getattr(module, "step", "-")
        else:
            entry["Status"] = "-"
        return entry

    def _build_snapshot(self, tick: int) -> dict:
        return {
            "tick": tick,
            "machineState": self.machine.state.value,
            "mode": self.mode_manager.current.value,
            "errors": [r.as_dict() for r in self.strategy.visible_records()],
            "moduleStatus": {
                str(m.path): self._module_status_entry(m) for m in self.modules
            },
            "io": self.io.observe(),
            "plant": self.plant.observe(),
            "strategy": self.strategy.trace_internals(),
        }

    def snapshot(self) -> dict:
        """Instantaneous immutable view; equal across calls without a scan."""
        return self._build_snapshot(self.tick)

    def module_manifest(self) -> dict:
        return {
            str(m.path): {"level": m.level.value, **m.manifest()} for m in self.modules
        }


def build_runtime(
    config: PlantConfig | None = None, strategy: str = "procedural", **kwargs
) -> Runtime:
    """Build a runtime at tick 0: machine stopped, automatic mode selected,
    all outputs false, plant at home positions."""
    return Runtime(config=config, strategy=strategy, **kwargs)
