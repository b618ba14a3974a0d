"""Strategy-neutral error-handling vocabulary.

Both strategy implementations share this contract so a scenario written for
one runs unchanged under the other: severities with a fixed order, the error
catalog mapping numbers to severities and optional reaction overrides, the
default severity-to-reaction policy, and the recovery gate blocking the
return to automatic mode after a reaction was executed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from pathlib import Path
from typing import Callable, Protocol

from ..hierarchy import ModulePath


class Severity(IntEnum):
    """Error criticality; Malfunction and Error demand a machine reaction."""

    MESSAGE = 1
    WARNING = 2
    MALFUNCTION = 3
    ERROR = 4

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def from_label(cls, label: str) -> "Severity":
        try:
            return cls[label.upper()]
        except KeyError:
            raise ValueError(f"unknown severity: {label!r}") from None

    @property
    def requires_reaction(self) -> bool:
        return self >= Severity.MALFUNCTION


class ReactionCode:
    """Machine-wide reaction code space, 0..63.

    The code space is deliberately wider than the set of reactions any one
    machine defines; codes a module does not map simply do nothing there,
    which allows targeting individual modules.
    """

    NONE = 0
    ABORT_IMMEDIATE = 1
    STOP_CONTROLLED = 2
    HOLD = 3
    SUSPEND = 4
    FINISH_CYCLE_NO_RESTART = 5
    APPLICATION_MIN = 32
    MAX = 63

    STANDARD = frozenset(range(0, 6))

    @staticmethod
    def validate(code: int) -> int:
        if not 0 <= code <= ReactionCode.MAX:
            raise ValueError(f"reaction code out of range: {code}")
        return code

    @staticmethod
    def is_application(code: int) -> bool:
        return ReactionCode.APPLICATION_MIN <= code <= ReactionCode.MAX


class LocalAction(str, Enum):
    """Per-module resolution of a machine reaction."""

    ABORT_NOW = "AbortNow"
    STOP_END_OF_CYCLE = "StopEndOfCycle"
    HOLD = "Hold"
    SUSPEND = "Suspend"
    FINISH_CYCLE = "FinishCycle"
    IGNORE = "Ignore"


class RecordState(str, Enum):
    ACTIVE = "Active"
    ACKNOWLEDGED = "Acknowledged"
    CLEARED = "Cleared"


@dataclass(frozen=True)
class ErrorEvent:
    """One identified deviation, as reported by a module during a scan."""

    number: int
    message: str
    severity: Severity
    origin: ModulePath
    cause: str
    tick: int


@dataclass
class ErrorRecord:
    """A stored error with lifecycle state; record ids are assigned centrally."""

    record_id: int
    number: int
    message: str
    severity: Severity
    origin: ModulePath
    cause: str
    tick: int
    state: RecordState = RecordState.ACTIVE

    @property
    def active(self) -> bool:
        return self.state == RecordState.ACTIVE

    def as_dict(self) -> dict:
        return {
            "recordId": self.record_id,
            "number": self.number,
            "message": self.message,
            "severity": self.severity.label,
            "origin": str(self.origin),
            "cause": self.cause,
            "tick": self.tick,
            "state": self.state.value,
        }


@dataclass(frozen=True)
class CatalogEntry:
    number: int
    message: str
    severity: Severity
    reaction_override: int | None = None


class ErrorCatalog:
    """Registered error numbers with severity and optional reaction override."""

    def __init__(self, entries: list[CatalogEntry]):
        self._entries: dict[int, CatalogEntry] = {}
        for entry in entries:
            if entry.number in self._entries:
                raise ValueError(f"duplicate catalog number: {entry.number}")
            if entry.reaction_override is not None:
                ReactionCode.validate(entry.reaction_override)
            self._entries[entry.number] = entry

    def get(self, number: int) -> CatalogEntry | None:
        return self._entries.get(number)

    def numbers(self) -> set[int]:
        return set(self._entries)

    @classmethod
    def from_json(cls, document: list[dict]) -> "ErrorCatalog":
        entries = []
        for item in document:
            entries.append(
                CatalogEntry(
                    number=int(item["number"]),
                    message=str(item["message"]),
                    severity=Severity.from_label(item["severity"]),
                    reaction_override=item.get("reactionOverride"),
                )
            )
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> "ErrorCatalog":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def default_catalog() -> ErrorCatalog:
    """The catalog bundled with the pick-and-place cell."""
    from .. import data

    return ErrorCatalog.from_json(data.load_json("catalog.json"))


def default_reaction_for(severity: Severity) -> int:
    """Severity-based reaction when the catalog does not override it."""
    if severity == Severity.ERROR:
        return ReactionCode.ABORT_IMMEDIATE
    if severity == Severity.MALFUNCTION:
        return ReactionCode.STOP_CONTROLLED
    return ReactionCode.NONE


def normalize_event(
    event: ErrorEvent, catalog: ErrorCatalog, audit: Callable[[str, str], None]
) -> ErrorEvent:
    """Apply catalog policy: cataloged numbers take the catalog severity,
    unknown numbers are escalated to Error and audited."""
    entry = catalog.get(event.number)
    if entry is None:
        audit("uncataloged", f"error number {event.number} from {event.origin}")
        return replace(event, severity=Severity.ERROR)
    if entry.severity != event.severity:
        return replace(event, severity=entry.severity)
    return event


def governing_code(
    records: list[ErrorRecord], catalog: ErrorCatalog, operator_code: int | None
) -> int:
    """Reaction code in force this scan.

    The operator's chosen code wins; otherwise the highest-severity active
    record governs, resolved through its catalog override or the severity
    default. Ties go to the oldest record.
    """
    if operator_code is not None:
        return operator_code
    active = [r for r in records if r.active]
    if not active:
        return ReactionCode.NONE
    top = max(active, key=lambda r: (r.severity, -r.record_id))
    entry = catalog.get(top.number)
    if entry is not None and entry.reaction_override is not None:
        return entry.reaction_override
    return default_reaction_for(top.severity)


def machine_action_for_code(code: int) -> LocalAction:
    """Machine-level meaning of a standard reaction code.

    Application-specific codes (32..63) have no machine-level meaning; they
    only reach modules that explicitly map them.
    """
    return {
        ReactionCode.ABORT_IMMEDIATE: LocalAction.ABORT_NOW,
        ReactionCode.STOP_CONTROLLED: LocalAction.STOP_END_OF_CYCLE,
        ReactionCode.HOLD: LocalAction.HOLD,
        ReactionCode.SUSPEND: LocalAction.SUSPEND,
        ReactionCode.FINISH_CYCLE_NO_RESTART: LocalAction.FINISH_CYCLE,
    }.get(code, LocalAction.IGNORE)


class ErrorPort(Protocol):
    """Reporting channel installed on every module by the active strategy."""

    def report(self, event: ErrorEvent) -> int: ...


@dataclass
class RecoveryTracker:
    """Gate for returning to automatic mode after a reaction was executed.

    While the reaction bit is set, automatic mode stays blocked until every
    Malfunction/Error record is acknowledged, the operator has visited manual
    or jog mode, and the machine has been brought back to a stopped or idle
    state via clear/reset.
    """

    reaction_executed: bool = False
    manual_visited: bool = False

    def on_reaction(self) -> None:
        if not self.reaction_executed:
            self.reaction_executed = True
            self.manual_visited = False

    def on_mode_entered(self, mode_value: str) -> None:
        if mode_value in ("Manual", "Jog"):
            self.manual_visited = True

    def gate_automatic(
        self, machine_state: str, records: list[ErrorRecord]
    ) -> tuple[bool, str | None]:
        if not self.reaction_executed:
            return True, None
        open_critical = [
            r
            for r in records
            if r.active and r.severity >= Severity.MALFUNCTION
        ]
        if open_critical:
            return False, "open error"
        if not self.manual_visited:
            return False, "manual or jog mode not visited since reaction"
        if machine_state not in ("STOPPED", "IDLE"):
            return False, "machine not cleared/reset since reaction"
        return True, None

    def on_automatic_granted(self) -> None:
        self.reaction_executed = False
        self.manual_visited = False


@dataclass
class ReactionReport:
    """What the reaction phase resolved this scan, for traces and tests."""

    code: int
    machine_action: LocalAction
    module_actions: list[tuple[str, LocalAction]] = field(default_factory=list)

    def any_effective(self) -> bool:
        return self.machine_action != LocalAction.IGNORE or any(
            action != LocalAction.IGNORE for _, action in self.module_actions
        )

    def as_dict(self) -> dict:
        return {
            "code": self.code,
            "machineAction": self.machine_action.value,
            "moduleActions": {path: action.value for path, action in self.module_actions},
        }
