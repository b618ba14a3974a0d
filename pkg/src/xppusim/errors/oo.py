"""Callback-style error handling.

An abstract error sink is injected into every module at initialization; the
single live error manager implements it. Modules report through the sink and
never see the record store, which stays private to the manager. Reactions
are decided locally from the status of neighboring modules instead of a
broadcast table, and the manager can be extended by inheritance without
touching the modules.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable

from ..hierarchy import BuildError, Module, ModulePath
from .contract import (
    ErrorCatalog,
    ErrorEvent,
    ErrorRecord,
    LocalAction,
    ReactionCode,
    ReactionReport,
    RecordState,
    RecoveryTracker,
    Severity,
    governing_code,
    machine_action_for_code,
    normalize_event,
)

Audit = Callable[[str, str], None]


class ErrorSink(ABC):
    """The executable capability handed to modules: a single add-error method.

    The full signature makes omitting severity, origin or cause impossible.
    """

    @abstractmethod
    def add_error(
        self, severity: Severity, origin: ModulePath, cause: str, number: int, message: str
    ) -> int: ...


class NoopErrorSink(ErrorSink):
    """Discards every report; used to prove the process logic is error-free."""

    def add_error(self, severity, origin, cause, number, message) -> int:
        return 0


class ErrorManager(ErrorSink):
    """Central error collection behind the sink capability.

    The record store is private; modules interact only through add_error,
    everything else (acknowledgment, published snapshots) is runtime/HMI API.
    """

    def __init__(self, catalog: ErrorCatalog, audit: Audit):
        self._catalog = catalog
        self._audit = audit
        self.__records: list[ErrorRecord] = []
        self.__next_id = 1
        self.__tick = 0

    def set_tick(self, tick: int) -> None:
        self.__tick = tick

    def add_error(
        self, severity: Severity, origin: ModulePath, cause: str, number: int, message: str
    ) -> int:
        event = normalize_event(
            ErrorEvent(number, message, severity, origin, cause, self.__tick),
            self._catalog,
            self._audit,
        )
        for record in self.__records:
            if record.active and record.origin == origin and record.number == number:
                return record.record_id
        record = ErrorRecord(
            record_id=self.__next_id,
            number=event.number,
            message=event.message,
            severity=event.severity,
            origin=event.origin,
            cause=event.cause,
            tick=event.tick,
        )
        self.__records.append(record)
        self.__next_id += 1
        return record.record_id

    # -- runtime/HMI API (not part of the module-facing capability) -----------

    def acknowledge(self, record_id: int | None) -> bool:
        hit = False
        for record in self.__records:
            if record.active and (record_id is None or record.record_id == record_id):
                record.state = RecordState.ACKNOWLEDGED
                hit = True
        return hit

    def clear_acknowledged(self) -> None:
        for record in self.__records:
            if record.state == RecordState.ACKNOWLEDGED:
                record.state = RecordState.CLEARED

    def published_records(self) -> tuple[ErrorRecord, ...]:
        return tuple(self.__records)


class ExtendedErrorManager(ErrorManager):
    """Manager derivative adding a severity-filtered audit channel.

    Modules keep working against it unchanged; they only ever use the
    add-error capability of the base.
    """

    def __init__(self, catalog: ErrorCatalog, audit: Audit, min_severity: Severity = Severity.WARNING):
        super().__init__(catalog, audit)
        self.min_severity = min_severity
        self.audit_channel: list[tuple[int, str]] = []

    def add_error(self, severity, origin, cause, number, message) -> int:
        record_id = super().add_error(severity, origin, cause, number, message)
        if severity >= self.min_severity:
            self.audit_channel.append((number, f"{origin}: {message}"))
        return record_id


class SinkSlot:
    """Per-module sink holder; injectable exactly once, before the first scan."""

    def __init__(self) -> None:
        self._sink: ErrorSink | None = None

    def inject(self, sink: ErrorSink) -> None:
        if self._sink is not None:
            raise BuildError("error sink already injected")
        self._sink = sink

    @property
    def sink(self) -> ErrorSink:
        if self._sink is None:
            raise BuildError("error sink was never injected")
        return self._sink


def inject_sink(module: Module, slot_sink: ErrorSink) -> None:
    """Initialization-time injection; double injection is a build error."""
    port = module.error_port
    if isinstance(port, OoErrorPort):
        port.slot.inject(slot_sink)
    else:
        slot = SinkSlot()
        slot.inject(slot_sink)
        module.error_port = OoErrorPort(slot)


class OoErrorPort:
    """Module-side reporting channel: forwards to the injected sink only."""

    def __init__(self, slot: SinkSlot):
        self.slot = slot

    def report(self, event: ErrorEvent) -> int:
        return self.slot.sink.add_error(
            severity=event.severity,
            origin=event.origin,
            cause=event.cause,
            number=event.number,
            message=event.message,
        )


@dataclass(frozen=True)
class NeighborStatus:
    has_error: bool
    severity_max: Severity | None


class NeighborStatusQuery:
    """Read-only status of other modules, answered from the last completed
    identification phase."""

    def __init__(self, strategy: "OoStrategy"):
        self._strategy = strategy

    def status_of(self, path: ModulePath | str) -> NeighborStatus:
        key = str(path)
        if key not in self._strategy.module_index:
            return NeighborStatus(False, None)
        return NeighborStatus(
            has_error=key in self._strategy.origin_set,
            severity_max=self._strategy.subtree_severity.get(key),
        )


class OoStrategy:
    """Error manager + injected sinks + neighbor-status-driven local reactions."""

    kind = "oo"

    def __init__(
        self,
        catalog: ErrorCatalog,
        audit: Audit,
        manager: ErrorManager | None = None,
        sink: ErrorSink | None = None,
    ):
        self.catalog = catalog
        self.audit = audit
        self.manager = manager if manager is not None else ErrorManager(catalog, audit)
        # Test hook: a non-manager sink (e.g. no-op) may replace the manager
        # as the injected capability; the manager still serves the HMI API.
        self._injected: ErrorSink = sink if sink is not None else self.manager
        self.recovery = RecoveryTracker()
        self.operator_code: int | None = None
        self.last_report: ReactionReport | None = None
        self.neighbor_query = NeighborStatusQuery(self)
        self._modules: list[Module] = []
        self.module_index: dict[str, Module] = {}
        self.subtree_severity: dict[str, Severity] = {}
        self.origin_set: set[str] = set()

    # -- build ------------------------------------------------------------------

    def bind(self, modules: list[Module]) -> None:
        self._modules = modules
        self.module_index = {str(m.path): m for m in modules}
        for module in modules:
            slot = SinkSlot()
            slot.inject(self._injected)
            module.error_port = OoErrorPort(slot)

    # -- scan hooks ---------------------------------------------------------------

    def set_operator_code(self, code: int | None) -> None:
        self.operator_code = ReactionCode.validate(code) if code is not None else None

    def set_tick(self, tick: int) -> None:
        self.manager.set_tick(tick)

    def _aggregate(self) -> None:
        self.subtree_severity = {}
        self.origin_set = set()
        for record in self.manager.published_records():
            if not record.active:
                continue
            self.origin_set.add(str(record.origin))
            segments = record.origin.segments
            for i in range(1, len(segments) + 1):
                key = "/".join(segments[:i])
                current = self.subtree_severity.get(key)
                if current is None or record.severity > current:
                    self.subtree_severity[key] = record.severity

    def decide_local_reaction(self, module: Module) -> LocalAction:
        """Self at Error severity aborts now; a critical neighbor (sibling or
        parent) asks for a stop at the end of the cycle."""
        key = str(module.path)
        self_max = self.subtree_severity.get(key)
        if self_max == Severity.ERROR:
            return LocalAction.ABORT_NOW
        candidates: list[Severity] = [self_max] if self_max else []
        parent = module.path.parent
        if parent is not None:
            parent_key = str(parent)
            parent_module = self.module_index.get(parent_key)
            if parent_module is not None:
                for sibling in parent_module.children:
                    if sibling is module:
                        continue
                    status = self.neighbor_query.status_of(sibling.path)
                    if status.severity_max is not None:
                        candidates.append(status.severity_max)
            parent_status = self.neighbor_query.status_of(parent_key)
            if parent_status.severity_max is not None:
                candidates.append(parent_status.severity_max)
        if candidates and max(candidates) >= Severity.MALFUNCTION:
            return LocalAction.STOP_END_OF_CYCLE
        return LocalAction.IGNORE

    def react(self, ctx) -> ReactionReport:
        records = list(self.manager.published_records())
        code = governing_code(records, self.catalog, self.operator_code)
        self._aggregate()
        machine_action = machine_action_for_code(code)
        report = ReactionReport(code, machine_action)
        ctx.apply_machine_action(machine_action)
        operator_standard = self.operator_code is not None and code in ReactionCode.STANDARD
        for module in self._modules[1:]:
            if ReactionCode.is_application(code):
                action = LocalAction(module.app_reactions.get(code, LocalAction.IGNORE.value))
            elif operator_standard or code == ReactionCode.NONE:
                # Operator-chosen standard reactions act at machine level; the
                # modules follow the machine state.
                action = LocalAction.IGNORE
            else:
                action = self.decide_local_reaction(module)
            report.module_actions.append((str(module.path), action))
            ctx.apply_local_action(module, action)
        if report.any_effective():
            self.recovery.on_reaction()
        if not any(r.active for r in records):
            self.operator_code = None
        self.last_report = report
        return report

    # -- record lifecycle ------------------------------------------------------------

    def acknowledge(self, record_id: int | None) -> bool:
        return self.manager.acknowledge(record_id)

    def on_reset(self) -> None:
        self.manager.clear_acknowledged()

    def records(self) -> list[ErrorRecord]:
        return list(self.manager.published_records())

    def active_records(self) -> list[ErrorRecord]:
        return [r for r in self.manager.published_records() if r.active]

    def visible_records(self) -> list[ErrorRecord]:
        return [r for r in self.manager.published_records() if r.state != RecordState.CLEARED]

    def recovery_gate(self, machine_state: str) -> tuple[bool, str | None]:
        return self.recovery.gate_automatic(machine_state, self.records())

    def trace_internals(self) -> dict:
        report = self.last_report.as_dict() if self.last_report else None
        return {"kind": self.kind, "decisions": report}
