"""Template-style procedural error handling.

A single, globally reachable exception list collects every reported error.
Reporting goes through the set-exception routine, which callers pass the
global list to by convention only; nothing stops a module from touching the
list directly, which is exactly the structural weakness the design carries.
The machine-level reaction is broadcast top-down and resolved per module
through reaction matrices whose code space is wider than the set of defined
reactions, so writing an otherwise ineffective code targets individual
modules.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..hierarchy import Module
from .contract import (
    ErrorCatalog,
    ErrorEvent,
    ErrorRecord,
    LocalAction,
    ReactionCode,
    ReactionReport,
    RecordState,
    RecoveryTracker,
    governing_code,
    normalize_event,
)

Audit = Callable[[str, str], None]


@dataclass
class CentralExceptionList:
    """The global error store; append via fc_set_exception only (convention)."""

    records: list[ErrorRecord] = field(default_factory=list)
    next_record_id: int = 1


# The machine-wide list every module can reach. Rebuilt on every runtime
# build; running two machine programs in one process makes them share it.
GLOBAL_EXCEPTION_LIST = CentralExceptionList()


def fc_set_exception(
    lst: CentralExceptionList, event: ErrorEvent, catalog: ErrorCatalog, audit: Audit
) -> int:
    """Append an error record; idempotent per (origin, number) while active."""
    event = normalize_event(event, catalog, audit)
    for record in lst.records:
        if record.active and record.origin == event.origin and record.number == event.number:
            return record.record_id
    record = ErrorRecord(
        record_id=lst.next_record_id,
        number=event.number,
        message=event.message,
        severity=event.severity,
        origin=event.origin,
        cause=event.cause,
        tick=event.tick,
    )
    lst.records.append(record)
    lst.next_record_id += 1
    return record.record_id


@dataclass(frozen=True)
class ReactionMatrix:
    """Per-module mapping of broadcast codes to local actions.

    Codes outside the effective range resolve to Ignore, the deliberately
    ineffective lines of the table.
    """

    effective_range: frozenset[int]
    rows: dict[int, LocalAction]

    def resolve(self, code: int) -> LocalAction:
        if code not in self.effective_range:
            return LocalAction.IGNORE
        return self.rows.get(code, LocalAction.IGNORE)


STANDARD_ROWS = {
    ReactionCode.ABORT_IMMEDIATE: LocalAction.ABORT_NOW,
    ReactionCode.STOP_CONTROLLED: LocalAction.STOP_END_OF_CYCLE,
    ReactionCode.HOLD: LocalAction.HOLD,
    ReactionCode.SUSPEND: LocalAction.SUSPEND,
    ReactionCode.FINISH_CYCLE_NO_RESTART: LocalAction.FINISH_CYCLE,
}


def default_matrix(app_reactions: dict[int, str] | None = None) -> ReactionMatrix:
    rows = dict(STANDARD_ROWS)
    rng = set(range(1, 6))
    for code, action in (app_reactions or {}).items():
        rows[code] = LocalAction(action)
        rng.add(code)
    return ReactionMatrix(frozenset(rng), rows)


def load_matrices(document: dict, audit: Audit) -> dict[str, ReactionMatrix]:
    """Parse a matrix document.

    Validation is deliberately weak: unknown actions or missing fields are
    audited as warnings and fall back to defaults instead of failing the
    build. Incomplete tables are a known usage risk of this concept.
    """
    matrices: dict[str, ReactionMatrix] = {}
    for path, entry in document.items():
        if "effectiveRange" not in entry:
            audit("matrix-warning", f"{path}: missing effectiveRange, using 1..5")
        rng = set(int(c) for c in entry.get("effectiveRange", range(1, 6)))
        rows: dict[int, LocalAction] = {}
        for code_str, action_name in entry.get("rows", {}).items():
            try:
                rows[int(code_str)] = LocalAction(action_name)
            except ValueError:
                audit(
                    "matrix-warning",
                    f"{path}: unknown action {action_name!r} for code {code_str}, ignoring line",
                )
        if "rows" not in entry:
            audit("matrix-warning", f"{path}: missing rows, using standard rows")
            rows = dict(STANDARD_ROWS)
        matrices[path] = ReactionMatrix(frozenset(rng), rows)
    return matrices


class ProceduralErrorPort:
    """Reporting channel handed to modules under the procedural concept.

    The global list is exposed on purpose: the concept relies on convention,
    not encapsulation, to keep modules from manipulating it.
    """

    def __init__(self, catalog: ErrorCatalog, audit: Audit):
        self._catalog = catalog
        self._audit = audit

    @property
    def exception_list(self) -> CentralExceptionList:
        return GLOBAL_EXCEPTION_LIST

    def report(self, event: ErrorEvent) -> int:
        return fc_set_exception(GLOBAL_EXCEPTION_LIST, event, self._catalog, self._audit)


class ProceduralStrategy:
    """Central list + broadcast + reaction matrices + machine recovery bit."""

    kind = "procedural"

    def __init__(
        self,
        catalog: ErrorCatalog,
        audit: Audit,
        matrices_doc: dict | None = None,
    ):
        global GLOBAL_EXCEPTION_LIST
        GLOBAL_EXCEPTION_LIST = CentralExceptionList()
        self.catalog = catalog
        self.audit = audit
        self.matrices: dict[str, ReactionMatrix] = (
            load_matrices(matrices_doc, audit) if matrices_doc else {}
        )
        self.recovery = RecoveryTracker()
        self.operator_code: int | None = None
        self.last_report: ReactionReport | None = None
        self._modules: list[Module] = []

    @property
    def exception_list(self) -> CentralExceptionList:
        return GLOBAL_EXCEPTION_LIST

    # -- build ------------------------------------------------------------------

    def bind(self, modules: list[Module]) -> None:
        self._modules = modules
        for module in modules:
            module.error_port = ProceduralErrorPort(self.catalog, self.audit)
            path = str(module.path)
            if path not in self.matrices:
                if self.matrices:
                    self.audit("matrix-warning", f"{path}: no matrix entry, using defaults")
                self.matrices[path] = default_matrix(module.app_reactions)

    # -- scan hooks ---------------------------------------------------------------

    def set_operator_code(self, code: int | None) -> None:
        self.operator_code = ReactionCode.validate(code) if code is not None else None

    def react(self, ctx) -> ReactionReport:
        records = self.exception_list.records
        code = governing_code(records, self.catalog, self.operator_code)
        report = self.broadcast_reaction(ctx, code)
        if report.any_effective():
            self.recovery.on_reaction()
        if not any(r.active for r in records):
            self.operator_code = None
        self.last_report = report
        return report

    def broadcast_reaction(self, ctx, code: int) -> ReactionReport:
        """Write the code top-down; every module resolves it through its matrix."""
        machine_action = LocalAction.IGNORE
        report = ReactionReport(code, machine_action)
        for module in self._modules:
            action = self.matrices[str(module.path)].resolve(code)
            report.module_actions.append((str(module.path), action))
            if module is self._modules[0]:  # the unit carries the machine reaction
                report.machine_action = action
                ctx.apply_machine_action(action)
            else:
                ctx.apply_local_action(module, action)
        return report

    # -- record lifecycle ------------------------------------------------------------

    def acknowledge(self, record_id: int | None) -> bool:
        hit = False
        for record in self.exception_list.records:
            if record.active and (record_id is None or record.record_id == record_id):
                record.state = RecordState.ACKNOWLEDGED
                hit = True
        return hit

    def on_reset(self) -> None:
        for record in self.exception_list.records:
            if record.state == RecordState.ACKNOWLEDGED:
                record.state = RecordState.CLEARED

    def records(self) -> list[ErrorRecord]:
        return list(self.exception_list.records)

    def active_records(self) -> list[ErrorRecord]:
        return [r for r in self.exception_list.records if r.active]

    def visible_records(self) -> list[ErrorRecord]:
        return [r for r in self.exception_list.records if r.state != RecordState.CLEARED]

    def recovery_gate(self, machine_state: str) -> tuple[bool, str | None]:
        return self.recovery.gate_automatic(machine_state, self.records())

    def trace_internals(self) -> dict:
        report = self.last_report.as_dict() if self.last_report else None
        return {
            "kind": self.kind,
            "broadcast": report,
            "recoveryBit": self.recovery.reaction_executed,
            "listLength": len(self.exception_list.records),
        }
