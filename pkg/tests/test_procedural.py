import inspect
from pathlib import Path

from xppusim import actuators, process
from xppusim.errors import procedural
from xppusim.errors.contract import (
    ErrorEvent,
    LocalAction,
    ReactionCode,
    RecordState,
    Severity,
    default_catalog,
)
from xppusim.errors.procedural import (
    CentralExceptionList,
    ReactionMatrix,
    default_matrix,
    fc_set_exception,
    load_matrices,
)
from xppusim.hierarchy import ModulePath
from xppusim.packml import MachineState, OperatingMode
from xppusim.plant import FaultKind, FaultSpec
from xppusim.runtime import Command, CommandKind, CommandSource, build_runtime
from conftest import started_runtime


def _event(number=1003, origin="xPPU/Stack/Pusher", tick=0, severity=Severity.MALFUNCTION):
    return ErrorEvent(number, "m", severity, ModulePath.parse(origin), "c", tick)


def _audit_sink():
    audits = []
    return audits, lambda kind, detail: audits.append((kind, detail))


def test_fc_set_exception_assigns_sequential_ids():
    lst = CentralExceptionList()
    audits, audit = _audit_sink()
    catalog = default_catalog()
    rid1 = fc_set_exception(lst, _event(), catalog, audit)
    rid2 = fc_set_exception(lst, _event(origin="xPPU/Crane/Base", number=1001), catalog, audit)
    assert (rid1, rid2) == (1, 2)
    assert len(lst.records) == 2


def test_fc_set_exception_dedups_while_active():
    lst = CentralExceptionList()
    _, audit = _audit_sink()
    catalog = default_catalog()
    rid1 = fc_set_exception(lst, _event(tick=0), catalog, audit)
    rid2 = fc_set_exception(lst, _event(tick=1), catalog, audit)
    assert rid1 == rid2
    assert len(lst.records) == 1
    lst.records[0].state = RecordState.ACKNOWLEDGED
    rid3 = fc_set_exception(lst, _event(tick=2), catalog, audit)
    assert rid3 == 2  # re-raise after acknowledgment creates a fresh record


def test_fc_set_exception_uncataloged_becomes_error_with_audit():
    lst = CentralExceptionList()
    audits, audit = _audit_sink()
    rid = fc_set_exception(lst, _event(number=4711), default_catalog(), audit)
    assert lst.records[0].severity == Severity.ERROR
    assert rid == 1
    assert audits and audits[0][0] == "uncataloged"


def test_matrix_ineffective_lines_resolve_to_ignore():
    matrix = ReactionMatrix(frozenset({1, 2, 3, 4, 5}), {2: LocalAction.STOP_END_OF_CYCLE})
    assert matrix.resolve(2) == LocalAction.STOP_END_OF_CYCLE
    assert matrix.resolve(32) == LocalAction.IGNORE  # outside the effective range
    assert matrix.resolve(4) == LocalAction.IGNORE  # in range, no row defined
    assert matrix.resolve(0) == LocalAction.IGNORE


def test_load_matrices_weak_validation_warns_instead_of_failing():
    audits, audit = _audit_sink()
    doc = {
        "xPPU": {"rows": {"1": "AbortNow"}},  # missing effectiveRange
        "xPPU/Stack": {"effectiveRange": [1, 2]},  # missing rows
        "xPPU/Crane": {"effectiveRange": [1], "rows": {"1": "SelfDestruct"}},
    }
    matrices = load_matrices(doc, audit)
    kinds = [k for k, _ in audits]
    assert kinds.count("matrix-warning") == 3
    assert matrices["xPPU"].resolve(1) == LocalAction.ABORT_NOW
    assert matrices["xPPU/Crane"].resolve(1) == LocalAction.IGNORE  # bad line dropped


def test_global_list_is_reachable_from_module_scope():
    rt = build_runtime(strategy="procedural")
    port = rt.registry["xPPU/Stack/Pusher"].error_port
    # the global structure is exposed on the reporting port by design
    assert port.exception_list is procedural.GLOBAL_EXCEPTION_LIST
    assert rt.strategy.exception_list is procedural.GLOBAL_EXCEPTION_LIST


def test_two_runtimes_share_and_clobber_the_global_list():
    """The criticized weakness: two machine programs in one controller cannot
    keep their error handling separate, because both resolve the same global
    list, and building the second wipes the records of the first."""
    rt_a = build_runtime(strategy="procedural")
    port_a = rt_a.registry["xPPU/Stack/Pusher"].error_port
    port_a.report(_event())
    assert len(rt_a.strategy.exception_list.records) == 1

    rt_b = build_runtime(strategy="procedural")
    assert rt_a.strategy.exception_list is rt_b.strategy.exception_list
    assert not rt_a.strategy.exception_list.records  # b's build clobbered a

    port_a.report(_event())
    assert rt_b.strategy.exception_list.records  # a's report lands in b's store


def test_broadcast_code2_stops_every_module():
    rt = started_runtime("procedural")
    rt.strategy.set_operator_code(ReactionCode.STOP_CONTROLLED)
    rt.scan()
    report = rt.strategy.last_report
    assert report.code == 2
    assert report.machine_action == LocalAction.STOP_END_OF_CYCLE
    assert all(
        action == LocalAction.STOP_END_OF_CYCLE for _, action in report.module_actions[1:]
    )
    assert rt.machine.state == MachineState.STOPPING


def test_broadcast_code32_reaches_only_the_mapped_module():
    rt = started_runtime("procedural")
    rt.strategy.set_operator_code(32)
    rt.scan()
    report = rt.strategy.last_report
    acting = [path for path, action in report.module_actions if action != LocalAction.IGNORE]
    assert acting == ["xPPU/SortingConveyor"]
    assert rt.machine.state == MachineState.EXECUTE  # the unit ignores code 32


def test_broadcast_code0_is_all_ignore():
    rt = started_runtime("procedural")
    rt.scan()
    report = rt.strategy.last_report
    assert report.code == 0
    assert all(action == LocalAction.IGNORE for _, action in report.module_actions)


def test_delivery_report_covers_every_module_in_preorder():
    rt = started_runtime("procedural")
    rt.scan()
    delivered = [path for path, _ in rt.strategy.last_report.module_actions]
    assert delivered == [str(m.path) for m in rt.modules]
    assert len(delivered) == len(set(delivered))


def test_ineffective_line_law_on_untargeted_module():
    """Broadcasting a code outside a module's effective range leaves that
    module's outputs tick-identical to a run without any broadcast."""
    plain = started_runtime("procedural")
    targeted = started_runtime("procedural")
    targeted.enqueue_command(
        Command(CommandKind.REACTION_OVERRIDE, reaction_code=32, source=CommandSource.SCENARIO)
    )
    pusher_keys = [k for k in plain.io.digital_outputs if "Stack/Pusher" in k]
    belt_diverged = False
    for _ in range(60):
        a = plain.scan()
        b = targeted.scan()
        for key in pusher_keys:
            assert a["io"]["digitalOutputs"][key] == b["io"]["digitalOutputs"][key]
        if (
            a["moduleStatus"]["xPPU/SortingConveyor/Belt"]["motionActive"]
            != b["moduleStatus"]["xPPU/SortingConveyor/Belt"]["motionActive"]
        ):
            belt_diverged = True
    assert belt_diverged  # the mapped module did act


def test_recovery_bit_blocks_automatic_until_full_sequence():
    rt = started_runtime("procedural")
    rt.enqueue_command(
        Command(
            CommandKind.INJECT_FAULT,
            fault=FaultSpec(id=1, kind=FaultKind.GRIPPER_SENSOR_FAIL, active_from=0),
            source=CommandSource.SCENARIO,
        )
    )
    for _ in range(40):
        rt.scan()
    assert rt.machine.state == MachineState.ABORTED
    assert rt.strategy.recovery.reaction_executed

    # acknowledge and clear the cause, but never leave ABORTED:
    # the recovery gate keeps automatic mode blocked
    rt.enqueue_command(Command(CommandKind.ACKNOWLEDGE))
    rt.enqueue_command(Command(CommandKind.CLEAR_FAULT, fault_id=1))
    rt.enqueue_command(Command(CommandKind.MODE_SWITCH, mode=OperatingMode.MANUAL))
    rt.scan()
    rt.enqueue_command(Command(CommandKind.MODE_SWITCH, mode=OperatingMode.AUTOMATIC))
    rt.scan()
    assert rt.mode_manager.current == OperatingMode.MANUAL
    assert any("cleared/reset" in a.detail for a in rt.audit_log if a.kind == "mode-rejected")


def test_warning_only_never_sets_recovery_bit(scenario_runs):
    result = scenario_runs("belt_wp_lost_warning", "procedural")
    assert result.runtime.strategy.recovery.reaction_executed is False


def test_modules_follow_the_convention_only_calling_the_routine():
    """Lint-style check: module code never touches the global list directly,
    even though it could."""
    for module in (actuators, process):
        source = Path(inspect.getsourcefile(module)).read_text(encoding="utf-8")
        assert "exception_list" not in source
        assert "GLOBAL_EXCEPTION_LIST" not in source
        assert ".records" not in source


def test_default_matrix_includes_app_reactions():
    matrix = default_matrix({32: "StopEndOfCycle"})
    assert matrix.resolve(32) == LocalAction.STOP_END_OF_CYCLE
    assert 32 in matrix.effective_range
    assert default_matrix().resolve(32) == LocalAction.IGNORE
