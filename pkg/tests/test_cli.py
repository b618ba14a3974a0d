import json

from xppusim import data
from xppusim.cli import main


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out.split()
    assert out == data.list_scenarios()


def test_run_writes_trace_and_passes(tmp_path, capsys):
    trace = tmp_path / "trace.jsonl"
    code = main(
        ["run", "--scenario", "reaction32_targeting", "--strategy", "oo", "--trace", str(trace)]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "PASS" in out
    lines = trace.read_text().strip().splitlines()
    meta = json.loads(lines[0])["meta"]
    assert meta == {"scenario": "reaction32_targeting", "strategy": "oo", "format": "v1"}
    assert len(lines) == 1 + 100  # meta + one line per tick


def test_run_unknown_scenario_exits_2(capsys):
    assert main(["run", "--scenario", "nope"]) == 2
    assert "unknown scenario" in capsys.readouterr().err


def test_run_invalid_scenario_file_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"name": "bad", "runTicks": 5,
                               "schedule": [{"tick": 9, "command": {"kind": "EStop"}}]}))
    assert main(["run", "--scenario", str(bad)]) == 2


def test_failing_assertion_exits_1(tmp_path, capsys):
    doc = {
        "name": "doomed",
        "runTicks": 5,
        "schedule": [],
        "assertions": [{"kind": "machineState", "tick": 4, "equals": "EXECUTE"}],
    }
    path = tmp_path / "doomed.json"
    path.write_text(json.dumps(doc))
    assert main(["run", "--scenario", str(path)]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_compare_behavioral_and_full(tmp_path, capsys):
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    for strategy, path in [("procedural", a), ("oo", b)]:
        assert main(["run", "--scenario", "gripper_sensor_error_standstill",
                     "--strategy", strategy, "--trace", str(path)]) == 0
    assert main(["compare", str(a), str(b), "--projection", "behavioral"]) == 0
    assert main(["compare", str(a), str(b), "--projection", "full"]) == 1
    out = capsys.readouterr().out
    assert "identical" in out and "divergence" in out


def test_manifest_and_family_conform_flow(tmp_path, capsys):
    manifest = tmp_path / "manifest.json"
    assert main(["manifest", "--out", str(manifest)]) == 0
    assert main(["family", "validate", "bundled"]) == 0
    assert (
        main(
            ["family", "conform", "bundled", "--manifest", str(manifest),
             "--module", "xPPU/Crane/Lift", "--select", "cylinderKind=monostable"]
        )
        == 0
    )
    assert (
        main(
            ["family", "conform", "bundled", "--manifest", str(manifest),
             "--module", "xPPU/Stamp/Press", "--select", "cylinderKind=monostable"]
        )
        == 1
    )
    out = capsys.readouterr().out
    assert "OK" in out and "MISMATCH" in out


def test_family_derive_outputs_config(tmp_path, capsys):
    out_file = tmp_path / "variant.json"
    code = main(
        ["family", "derive", "bundled", "--select", "cylinderKind=bistable", "--out", str(out_file)]
    )
    assert code == 0
    doc = json.loads(out_file.read_text())
    assert "DO_Retract" in doc["views"]["plc"]


def test_family_derive_missing_selection_exits_2(capsys):
    assert main(["family", "derive", "bundled"]) == 2
    assert "cylinderKind" in capsys.readouterr().err


def test_family_conform_unknown_module_exits_2(tmp_path, capsys):
    manifest = tmp_path / "manifest.json"
    main(["manifest", "--out", str(manifest)])
    assert (
        main(
            ["family", "conform", "bundled", "--manifest", str(manifest),
             "--module", "xPPU/Nowhere", "--select", "cylinderKind=monostable"]
        )
        == 2
    )


def test_emit_manifest_during_run(tmp_path):
    manifest = tmp_path / "m.json"
    assert main(["run", "--scenario", "reaction32_targeting", "--emit-manifest", str(manifest)]) == 0
    doc = json.loads(manifest.read_text())
    assert "xPPU/Crane/Lift" in doc
