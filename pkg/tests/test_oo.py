import inspect
import json
from pathlib import Path

import pytest

from xppusim import actuators, process
from xppusim.errors.contract import LocalAction, RecordState, Severity, default_catalog
from xppusim.errors.oo import (
    ErrorManager,
    ErrorSink,
    ExtendedErrorManager,
    NeighborStatusQuery,
    NoopErrorSink,
    OoErrorPort,
    SinkSlot,
    inject_sink,
)
from xppusim.hierarchy import BuildError, ModuleLevel, ModulePath
from xppusim.runtime import build_runtime
from xppusim.scenario import load_scenario, run_scenario


def fresh_manager():
    return ErrorManager(default_catalog(), lambda k, d: None)


def test_every_control_module_gets_the_same_manager_instance():
    rt = build_runtime(strategy="oo")
    control_modules = [m for m in rt.modules if m.level == ModuleLevel.CONTROL_MODULE]
    assert len(control_modules) >= 8
    sinks = {id(m.error_port.slot.sink) for m in rt.modules}
    assert sinks == {id(rt.strategy.manager)}


def test_double_injection_is_a_build_error():
    slot = SinkSlot()
    slot.inject(fresh_manager())
    with pytest.raises(BuildError, match="already injected"):
        slot.inject(fresh_manager())


def test_reporting_through_an_empty_slot_is_a_build_error():
    port = OoErrorPort(SinkSlot())
    with pytest.raises(BuildError, match="never injected"):
        port.slot.sink  # noqa: B018 - the access itself must raise


def test_inject_sink_helper_swaps_capability():
    rt = build_runtime(strategy="oo")
    module = rt.registry["xPPU/Stamp/Press"]
    with pytest.raises(BuildError):
        inject_sink(module, fresh_manager())  # slot already filled at build


def test_add_error_dedups_and_orders_by_report_order():
    manager = fresh_manager()
    manager.set_tick(7)
    crane = ModulePath.parse("xPPU/Crane/Base")
    belt = ModulePath.parse("xPPU/SortingConveyor")
    rid1 = manager.add_error(Severity.MALFUNCTION, crane, "drag", 1001, "drag")
    rid2 = manager.add_error(Severity.WARNING, belt, "missing", 2001, "missing")
    rid3 = manager.add_error(Severity.MALFUNCTION, crane, "drag", 1001, "drag")
    assert (rid1, rid2, rid3) == (1, 2, 1)
    records = manager.published_records()
    assert [r.record_id for r in records] == [1, 2]
    assert records[0].tick == 7


def test_record_store_is_private_to_the_manager():
    manager = fresh_manager()
    public = [n for n in dir(manager) if not n.startswith("_")]
    assert "records" not in public
    assert not any("record" in n and n != "published_records" for n in public)
    with pytest.raises(AttributeError):
        manager.records  # noqa: B018
    # published snapshots are read-only tuples
    assert isinstance(manager.published_records(), tuple)


def test_error_sink_capability_has_exactly_one_operation():
    abstract = ErrorSink.__abstractmethods__
    assert set(abstract) == {"add_error"}


def test_neighbor_query_unknown_path_is_healthy():
    rt = build_runtime(strategy="oo")
    status = rt.strategy.neighbor_query.status_of("xPPU/Nowhere")
    assert status.has_error is False and status.severity_max is None


def _decide_with_record(severity, origin, number):
    rt = build_runtime(strategy="oo")
    rt.strategy.manager.add_error(severity, ModulePath.parse(origin), "c", number, "m")
    rt.strategy._aggregate()
    return rt


def test_local_reaction_self_error_aborts_sibling_stops():
    rt = _decide_with_record(Severity.ERROR, "xPPU/Crane", 2002)
    decide = rt.strategy.decide_local_reaction
    assert decide(rt.registry["xPPU/Crane"]) == LocalAction.ABORT_NOW
    assert decide(rt.registry["xPPU/SortingConveyor"]) == LocalAction.STOP_END_OF_CYCLE
    assert decide(rt.registry["xPPU/Stack"]) == LocalAction.STOP_END_OF_CYCLE


def test_local_reaction_warning_is_ignored_everywhere():
    rt = _decide_with_record(Severity.WARNING, "xPPU/SortingConveyor", 2001)
    decide = rt.strategy.decide_local_reaction
    for path in ("xPPU/SortingConveyor", "xPPU/Crane", "xPPU/Stack/Pusher"):
        assert decide(rt.registry[path]) == LocalAction.IGNORE


def test_local_reaction_without_errors_is_ignore():
    rt = build_runtime(strategy="oo")
    rt.strategy._aggregate()
    for module in rt.modules:
        assert rt.strategy.decide_local_reaction(module) == LocalAction.IGNORE


def test_local_reaction_malfunction_stops_origin_and_vicinity():
    rt = _decide_with_record(Severity.MALFUNCTION, "xPPU/Crane/Base", 1001)
    decide = rt.strategy.decide_local_reaction
    assert decide(rt.registry["xPPU/Crane/Base"]) == LocalAction.STOP_END_OF_CYCLE
    assert decide(rt.registry["xPPU/Crane/Lift"]) == LocalAction.STOP_END_OF_CYCLE
    assert decide(rt.registry["xPPU/Crane"]) == LocalAction.STOP_END_OF_CYCLE
    # a control module in another subtree has no critical neighbors
    assert decide(rt.registry["xPPU/Stamp/Press"]) == LocalAction.IGNORE


def test_noop_sink_nominal_run_equals_normal_trace():
    """The automatic sequence contains no error handling: replacing the sink
    with a no-op changes nothing on a clean run."""
    scenario = load_scenario("nominal_sort_6wp")
    normal = run_scenario(scenario, "oo")
    noop = run_scenario(scenario, "oo", runtime_kwargs={"sink": NoopErrorSink()})
    assert [json.dumps(s) for s in normal.snapshots] == [json.dumps(s) for s in noop.snapshots]


def test_extended_manager_is_a_drop_in_replacement():
    scenario = load_scenario("nominal_sort_6wp")
    base = run_scenario(scenario, "oo")
    extended_manager = ExtendedErrorManager(default_catalog(), lambda k, d: None)
    extended = run_scenario(scenario, "oo", runtime_kwargs={"manager": extended_manager})
    assert [json.dumps(s) for s in base.snapshots] == [json.dumps(s) for s in extended.snapshots]


def test_extended_manager_adds_audit_channel_on_faulty_run():
    scenario = load_scenario("gripper_sensor_error_standstill")
    extended_manager = ExtendedErrorManager(default_catalog(), lambda k, d: None)
    base = run_scenario(scenario, "oo")
    extended = run_scenario(scenario, "oo", runtime_kwargs={"manager": extended_manager})
    assert [json.dumps(s) for s in base.snapshots] == [json.dumps(s) for s in extended.snapshots]
    assert extended_manager.audit_channel, "audit channel must capture the gripper error"
    number, text = extended_manager.audit_channel[0]
    assert number == 2002 and "xPPU/Crane" in text


def test_acknowledge_all_and_per_record():
    manager = fresh_manager()
    crane = ModulePath.parse("xPPU/Crane")
    rid1 = manager.add_error(Severity.ERROR, crane, "c", 2002, "m")
    rid2 = manager.add_error(Severity.WARNING, ModulePath.parse("xPPU/SortingConveyor"), "c", 2001, "m")
    assert manager.acknowledge(rid1)
    states = {r.record_id: r.state for r in manager.published_records()}
    assert states == {rid1: RecordState.ACKNOWLEDGED, rid2: RecordState.ACTIVE}
    assert manager.acknowledge(None)  # bulk acknowledge
    assert all(r.state == RecordState.ACKNOWLEDGED for r in manager.published_records())
    assert not manager.acknowledge(None)  # nothing active anymore


def test_reset_clears_acknowledged_records():
    manager = fresh_manager()
    manager.add_error(Severity.ERROR, ModulePath.parse("xPPU/Crane"), "c", 2002, "m")
    manager.acknowledge(None)
    manager.clear_acknowledged()
    assert all(r.state == RecordState.CLEARED for r in manager.published_records())


def test_oo_recovery_contract_matches_procedural(scenario_runs):
    for strategy in ("procedural", "oo"):
        result = scenario_runs("fig1_estop_recovery", strategy)
        final = result.snapshots[-1]
        assert final["machineState"] == "EXECUTE"
        assert final["mode"] == "Automatic"


def test_module_sources_never_touch_manager_internals():
    for module in (actuators, process):
        source = Path(inspect.getsourcefile(module)).read_text(encoding="utf-8")
        assert ".published_records(" not in source
        assert "ErrorManager" not in source
        assert ".acknowledge(" not in source
        assert "_ErrorManager__" not in source  # no name-mangling workarounds
