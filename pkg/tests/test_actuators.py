import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xppusim import signals as S
from xppusim.actuators import (
    ERR_AXIS_DRAG,
    ERR_AXIS_JAM,
    ERR_CYLINDER_TIMEOUT,
    AxisConfig,
    AxisFeedback,
    AxisModule,
    AxisMotion,
    AxisState,
    CylinderKind,
    CylinderModule,
    CylinderStatus,
    GripperModule,
)
from xppusim.hierarchy import IoImage, ModulePath, io_key


class StubCtx:
    """Minimal scan context for driving a single control module."""

    def __init__(self):
        self.io = IoImage()
        self.tick = 0
        self.frozen = False
        self.manual = False
        self.audits = []

    def manual_for(self, path):
        return self.manual

    def audit(self, kind, detail):
        self.audits.append((kind, detail))


def make_cylinder(kind=CylinderKind.BISTABLE, travel=8, timeout=None):
    cyl = CylinderModule(ModulePath.parse("u/em/Cyl"), kind, travel, timeout)
    ctx = StubCtx()
    ctx.io.register_input(io_key(cyl.path, S.DI_EXTENDED), False)
    ctx.io.register_input(io_key(cyl.path, S.DI_RETRACTED), True)
    return cyl, ctx


def plant_step(cyl, ctx, extent, jammed=False):
    """Tiny cylinder physics oracle: one tick of valve-driven travel."""
    do_ext = ctx.io.digital_outputs.get(io_key(cyl.path, S.DO_EXTEND), False)
    do_ret = ctx.io.digital_outputs.get(io_key(cyl.path, S.DO_RETRACT), False)
    if not jammed:
        if cyl.kind == CylinderKind.MONOSTABLE:
            direction = 1 if do_ext else -1
        else:
            direction = 1 if do_ext and not do_ret else (-1 if do_ret and not do_ext else 0)
        extent = min(max(extent + direction, 0), cyl.travel_ticks)
    ctx.io.digital_inputs[io_key(cyl.path, S.DI_EXTENDED)] = extent == cyl.travel_ticks
    ctx.io.digital_inputs[io_key(cyl.path, S.DI_RETRACTED)] = extent == 0
    return extent


def test_bistable_extend_sets_one_valve():
    cyl, ctx = make_cylinder()
    assert cyl.act_extend()
    cyl.scan(ctx)
    assert ctx.io.digital_outputs[io_key(cyl.path, S.DO_EXTEND)] is True
    assert ctx.io.digital_outputs[io_key(cyl.path, S.DO_RETRACT)] is False


def test_monostable_has_no_retract_action():
    cyl, ctx = make_cylinder(CylinderKind.MONOSTABLE)
    assert cyl.act_retract() is False
    assert S.DO_RETRACT not in cyl.manifest()["signals"]
    assert "ACT_Retract" not in cyl.manifest()["actions"]


def test_extend_reaches_end_position_after_travel_ticks():
    cyl, ctx = make_cylinder()
    extent = 0
    cyl.act_extend()
    history = []
    for tick in range(10):
        ctx.tick = tick
        cyl.scan(ctx)
        assert cyl.diagnose(ctx) == []
        history.append(cyl.cyl_status)
        extent = plant_step(cyl, ctx, extent)
    # end position sensed at the latch following the eighth travel tick
    assert history[7] == CylinderStatus.EXTENDING
    assert history[8] == CylinderStatus.EXTENDED


def test_monostable_spring_return():
    cyl, ctx = make_cylinder(CylinderKind.MONOSTABLE)
    extent = 0
    cyl.act_extend()
    for tick in range(10):
        cyl.scan(ctx)
        extent = plant_step(cyl, ctx, extent)
    assert cyl.cyl_status == CylinderStatus.EXTENDED
    cyl.release()
    for tick in range(10):
        cyl.scan(ctx)
        extent = plant_step(cyl, ctx, extent)
    assert cyl.cyl_status == CylinderStatus.RETRACTED
    assert extent == 0


def test_timeout_raises_1003_once_and_latches():
    cyl, ctx = make_cylinder(timeout=24)
    extent = 0
    cyl.act_extend()
    events = []
    for tick in range(40):
        ctx.tick = tick
        cyl.scan(ctx)
        events += cyl.diagnose(ctx)
        extent = plant_step(cyl, ctx, extent, jammed=True)
    assert [e.number for e in events] == [ERR_CYLINDER_TIMEOUT]
    assert events[0].severity.label == "Malfunction"
    assert events[0].tick == 23  # stroke counter reaches 24 on the 24th scan
    assert cyl.cyl_status == CylinderStatus.FAULTED
    # fail-safe: valves de-energized after the fault latched
    assert ctx.io.digital_outputs[io_key(cyl.path, S.DO_EXTEND)] is False


def test_fault_latch_clears_and_redetects():
    cyl, ctx = make_cylinder(timeout=4)
    extent = 0
    cyl.act_extend()
    events = []
    for tick in range(8):
        ctx.tick = tick
        cyl.scan(ctx)
        events += cyl.diagnose(ctx)
        extent = plant_step(cyl, ctx, extent, jammed=True)
    assert len(events) == 1
    cyl.clear_fault_latch()
    assert cyl.cyl_status == CylinderStatus.IDLE
    cyl.act_extend()
    for tick in range(8, 16):
        ctx.tick = tick
        cyl.scan(ctx)
        events += cyl.diagnose(ctx)
        extent = plant_step(cyl, ctx, extent, jammed=True)
    assert len(events) == 2  # re-detection after acknowledgment raises again


def crane_axis_config(**overrides):
    defaults = dict(
        motion=AxisMotion.ROTARY,
        limited=True,
        negative_limit=0.0,
        positive_limit=360.0,
        feedback=AxisFeedback.POTENTIOMETER,
        max_speed=5.0,
        drag_tolerance_units=12.0,
        drag_tolerance_ticks=5,
    )
    defaults.update(overrides)
    return AxisConfig(**defaults)


def make_axis(config=None):
    axis = AxisModule(ModulePath.parse("u/em/Axis"), config or crane_axis_config())
    ctx = StubCtx()
    ctx.io.register_analog(io_key(axis.path, S.AI_ACTUAL), 0.0)
    ctx.io.register_analog(io_key(axis.path, S.AO_REFERENCE), 0.0)
    return axis, ctx


def test_move_to_clamps_to_positive_limit_with_audit():
    axis, ctx = make_axis()
    assert axis.move_to(400.0, ctx)
    assert axis.commanded_target == 360.0
    assert any(kind == "clamped" for kind, _ in ctx.audits)


def test_move_to_current_position_is_idle_next_scan():
    axis, ctx = make_axis()
    assert axis.move_to(0.0, ctx)
    axis.scan(ctx)
    assert axis.axis_state == AxisState.IDLE
    assert axis.commanded_target is None


def test_limits_invalid_config_rejected():
    with pytest.raises(ValueError):
        crane_axis_config(negative_limit=10.0, positive_limit=10.0)


def test_endless_run_advances_reference_by_speed_times_ticks():
    config = AxisConfig(
        motion=AxisMotion.LINEAR, limited=False,
        feedback=AxisFeedback.INCREMENTAL_ENCODER, max_speed=2.0,
    )
    axis, ctx = make_axis(config)
    assert axis.run_endless(1)
    for _ in range(100):
        axis.scan(ctx)
    assert axis.reference_position == 200.0  # 2 units/tick * 100 ticks


def test_endless_rejected_on_limited_axis():
    axis, _ = make_axis()
    assert axis.run_endless(1) is False


def test_motor_jam_raises_1002_after_exactly_tolerance_ticks():
    axis, ctx = make_axis()
    axis.move_to(100.0, ctx)
    actual_key = io_key(axis.path, S.AI_ACTUAL)
    events = []
    event_scan = None
    for scan in range(12):
        ctx.tick = scan
        ctx.io.analog_values[actual_key] = 0.0  # frozen drive
        axis.scan(ctx)
        got = axis.diagnose(ctx)
        if got and event_scan is None:
            event_scan = scan
        events += got
    assert [e.number for e in events] == [ERR_AXIS_JAM]
    # first scan only seeds the last-actual sample; the counter then needs
    # dragToleranceTicks consecutive frozen scans
    assert event_scan == axis.config.drag_tolerance_ticks
    assert axis.axis_state == AxisState.FAULTED
    assert axis.move_to(50.0, ctx) is False  # moves rejected while faulted
    assert axis.jog(1) is False


def test_drag_sustained_below_tolerance_ticks_recovers_clean():
    axis, ctx = make_axis()
    axis.move_to(300.0, ctx)
    actual_key = io_key(axis.path, S.AI_ACTUAL)
    events = []
    for scan in range(4):  # one short of dragToleranceTicks
        ctx.io.analog_values[actual_key] = axis.reference_position - 13.0
        axis.scan(ctx)
        events += axis.diagnose(ctx)
    for scan in range(10):  # recovered: actual tracks reference exactly
        ctx.io.analog_values[actual_key] = axis.reference_position
        axis.scan(ctx)
        events += axis.diagnose(ctx)
    assert events == []


def test_drag_sustained_raises_1001():
    axis, ctx = make_axis()
    axis.move_to(300.0, ctx)
    actual_key = io_key(axis.path, S.AI_ACTUAL)
    events = []
    for scan in range(6):
        ctx.io.analog_values[actual_key] = axis.reference_position - 13.0
        axis.scan(ctx)
        events += axis.diagnose(ctx)
    assert [e.number for e in events] == [ERR_AXIS_DRAG]


def test_feedback_variability_is_hidden():
    """Changing the feedback device changes nothing but the config echo."""
    traces = {}
    for feedback in AxisFeedback:
        axis, ctx = make_axis(crane_axis_config(feedback=feedback))
        axis.move_to(90.0, ctx)
        trace = []
        for _ in range(30):
            axis.scan(ctx)
            ctx.io.analog_values[io_key(axis.path, S.AI_ACTUAL)] = axis.reference_position
            trace.append((axis.reference_position, axis.axis_state))
        traces[feedback] = trace
    assert len({tuple(t) for t in traces.values()}) == 1


@settings(max_examples=200, deadline=None)
@given(
    st.lists(
        st.one_of(
            st.tuples(st.just("move"), st.floats(-720, 720, allow_nan=False)),
            st.tuples(st.just("jog"), st.sampled_from([-1, 1])),
        ),
        max_size=40,
    )
)
def test_reference_never_leaves_limits(commands):
    axis, ctx = make_axis()
    for op, value in commands:
        if op == "move":
            axis.move_to(value, ctx)
        else:
            axis.jog(int(value))
        axis.scan(ctx)
        assert 0.0 <= axis.reference_position <= 360.0


def test_gripper_manifest_and_signals():
    gripper = GripperModule(ModulePath.parse("u/em/Grip"))
    ctx = StubCtx()
    gripper.grip()
    gripper.scan(ctx)
    assert ctx.io.digital_outputs[io_key(gripper.path, S.DO_GRIP)] is True
    gripper.release()
    gripper.scan(ctx)
    assert ctx.io.digital_outputs[io_key(gripper.path, S.DO_GRIP)] is False
    assert S.DI_PRODUCT in gripper.manifest()["signals"]


def test_cylinder_manifest_matches_variant():
    mono, _ = make_cylinder(CylinderKind.MONOSTABLE)
    bi, _ = make_cylinder(CylinderKind.BISTABLE)
    assert set(bi.manifest()["signals"]) - set(mono.manifest()["signals"]) == {S.DO_RETRACT}
    assert set(bi.manifest()["actions"]) - set(mono.manifest()["actions"]) == {"ACT_Retract"}
