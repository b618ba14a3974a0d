"""Version-1 wire protocol: newline-delimited JSON messages.

Server to client: status snapshots, error-list updates, and one ack per
received command. Client to server: commands carrying a client-chosen
command id. Every message embeds the protocol version.
"""

from __future__ import annotations

from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

from ..hierarchy import io_key


def axis_icon_hint(motion: str, limited: bool) -> str:
    """Icon selector for axis widgets, derived from the axis configuration."""
    kind = "Rotary" if motion == "Rotary" else "Linear"
    return f"{kind}{'Limited' if limited else 'Unlimited'}"


class ModuleStatusModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    has_error: bool = Field(alias="hasError")
    last_error_number: int | None = Field(alias="lastErrorNumber", default=None)
    motion_active: bool = Field(alias="motionActive")
    status: str = Field(alias="Status")


class AxisEcho(BaseModel):
    motion: str
    limited: bool
    negativeLimit: float | None = None
    positiveLimit: float | None = None
    feedback: str
    maxSpeed: float
    referencePosition: float
    actualPosition: float
    iconHint: str


class ModuleEntry(BaseModel):
    path: str
    level: str
    status: ModuleStatusModel
    signals: dict[str, Union[bool, float]]
    axis: AxisEcho | None = None


class StatusMessage(BaseModel):
    v: Literal["v1"] = "v1"
    type: Literal["status"] = "status"
    tick: int
    machineState: str
    mode: str
    modules: list[ModuleEntry]


class ErrorRecordModel(BaseModel):
    recordId: int
    number: int
    message: str
    severity: str
    origin: str
    cause: str
    tick: int
    state: str


class ErrorsMessage(BaseModel):
    v: Literal["v1"] = "v1"
    type: Literal["errors"] = "errors"
    tick: int
    records: list[ErrorRecordModel]


class AckMessage(BaseModel):
    v: Literal["v1"] = "v1"
    type: Literal["ack"] = "ack"
    commandId: str
    accepted: bool
    reason: str | None = None


class CommandMessage(BaseModel):
    v: Literal["v1"] = "v1"
    type: Literal["command"] = "command"
    commandId: str
    command: dict


WireMessage = Annotated[
    Union[StatusMessage, ErrorsMessage, AckMessage, CommandMessage],
    Field(discriminator="type"),
]

_adapter: TypeAdapter = TypeAdapter(WireMessage)


def encode(message: BaseModel) -> str:
    return message.model_dump_json(by_alias=True)


def decode(line: str):
    return _adapter.validate_json(line)


# -- snapshot to messages ---------------------------------------------------------


def _signal_value(snapshot: dict, path: str, signal: str):
    key = io_key(path, signal)
    io = snapshot["io"]
    if signal.startswith("DO_"):
        return io["digitalOutputs"].get(key)
    if signal.startswith("DI_"):
        return io["digitalInputs"].get(key)
    return io["analogValues"].get(key)


def status_message(snapshot: dict, manifest: dict) -> StatusMessage:
    modules = []
    for path, entry in manifest.items():
        module_status = snapshot["moduleStatus"][path]
        signals = {}
        for signal in entry["signals"]:
            if signal == "Status":
                continue
            value = _signal_value(snapshot, path, signal)
            if value is not None:
                signals[signal] = value
        axis = None
        if "axis" in module_status:
            config = module_status["axis"]["config"]
            axis = AxisEcho(
                motion=config["motion"],
                limited=config["limited"],
                negativeLimit=config.get("negativeLimit"),
                positiveLimit=config.get("positiveLimit"),
                feedback=config["feedback"],
                maxSpeed=config["maxSpeed"],
                referencePosition=module_status["axis"]["referencePosition"],
                actualPosition=module_status["axis"]["actualPosition"],
                iconHint=axis_icon_hint(config["motion"], config["limited"]),
            )
        modules.append(
            ModuleEntry(
                path=path,
                level=entry["level"],
                status=ModuleStatusModel.model_validate(
                    {k: module_status[k] for k in ("hasError", "lastErrorNumber", "motionActive", "Status")}
                ),
                signals=signals,
                axis=axis,
            )
        )
    return StatusMessage(
        tick=snapshot["tick"],
        machineState=snapshot["machineState"],
        mode=snapshot["mode"],
        modules=modules,
    )


def errors_message(snapshot: dict) -> ErrorsMessage:
    return ErrorsMessage(
        tick=snapshot["tick"],
        records=[ErrorRecordModel.model_validate(e) for e in snapshot["errors"]],
    )


# -- command gating ----------------------------------------------------------------


def gate_command(command: dict, snapshot: dict, manifest: dict) -> str | None:
    """Mode- and variant-dependent command gating; None means admissible.

    The panel mirrors this table to enable/disable its controls.
    """
    kind = command.get("kind")
    mode = snapshot["mode"]
    if kind == "ManualOutput":
        if mode != "Manual":
            return "rejected: wrong mode"
        entry = manifest.get(command.get("path"))
        if entry is None:
            return f"unknown module: {command.get('path')}"
        signal = command.get("signal")
        if signal not in entry["signals"] or not str(signal).startswith("DO_"):
            return "signal absent in variant"
    elif kind == "Jog":
        if mode != "Jog":
            return "rejected: wrong mode"
        entry = manifest.get(command.get("path"))
        if entry is None:
            return f"unknown module: {command.get('path')}"
        if "ACT_Jog" not in entry["actions"]:
            return "not a jog-capable axis"
    return None
