"""Command-line harness: run scenarios, compare traces, work with family models.

Exit codes: 0 success, 1 assertion failure or mismatch, 2 validation error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

from . import data
from .family import (
    DerivationError,
    FamilyModelError,
    check_conformance,
    derive,
    load_model,
    validate,
)
from .hierarchy import BuildError
from .runtime import SCAN_PERIOD_MS, build_runtime
from .scenario import ScenarioValidationError, load_scenario, run_scenario
from .trace import compare_trace_files, write_trace

REALTIME_PERIOD_S = SCAN_PERIOD_MS / 1000.0


def _parse_endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


def _parse_selection(pairs: list[str]) -> dict[str, str]:
    selection = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"selection must be key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        selection[key] = value
    return selection


def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    if args.serve:
        return _run_serving(args, scenario)
    pace = REALTIME_PERIOD_S if args.realtime else 0.0
    result = run_scenario(scenario, args.strategy, pace_s=pace)
    if args.trace:
        write_trace(args.trace, scenario.name, args.strategy, result.snapshots)
    if args.emit_manifest:
        with open(args.emit_manifest, "w", encoding="utf-8") as fh:
            json.dump(result.runtime.module_manifest(), fh, indent=2)
    for assertion_result in result.assertion_results:
        print(assertion_result.describe())
    print(
        f"scenario {scenario.name} [{args.strategy}]: "
        f"{'PASS' if result.passed else 'FAIL'} "
        f"({len(result.snapshots)} ticks)"
    )
    return 0 if result.passed else 1


def _run_serving(args: argparse.Namespace, scenario) -> int:
    from .gateway.server import serve_gateway

    host, port = _parse_endpoint(args.serve)
    http_port = None
    if args.http:
        http_port = _parse_endpoint(args.http)[1]
    elif not args.no_http:
        http_port = port + 1
    runtime = build_runtime(scenario.plant_config, args.strategy)
    period = REALTIME_PERIOD_S  # a served run is always paced to real time
    panel_dir = args.panel_dir or str(Path(__file__).resolve().parents[2] / "frontend" / "dist")
    print(f"serving {scenario.name} [{args.strategy}] on tcp://{host}:{port}", flush=True)
    if http_port is not None:
        print(f"http/ws on http://{host}:{http_port} (panel at /panel)", flush=True)
    try:
        asyncio.run(
            serve_gateway(
                runtime,
                host,
                port,
                scenario=scenario,
                period_s=period,
                break_at=args.break_at,
                http_port=http_port,
                panel_dir=panel_dir,
            )
        )
    except KeyboardInterrupt:
        pass
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    diff = compare_trace_files(args.trace_a, args.trace_b, args.projection)
    print(diff.describe())
    return 0 if diff.empty else 1


def cmd_list_scenarios(_args: argparse.Namespace) -> int:
    for name in data.list_scenarios():
        print(name)
    return 0


def cmd_manifest(args: argparse.Namespace) -> int:
    runtime = build_runtime()
    manifest = runtime.module_manifest()
    text = json.dumps(manifest, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def _load_family(path: str):
    if path == "bundled":
        return load_model(data.data_path("cylinder_family.json"))
    return load_model(path)


def cmd_family_validate(args: argparse.Namespace) -> int:
    model = _load_family(args.model)
    violations = validate(model)
    for violation in violations:
        print(violation)
    print(f"{model.name}: {len(violations)} violation(s)")
    return 0 if not violations else 1


def cmd_family_derive(args: argparse.Namespace) -> int:
    model = _load_family(args.model)
    config = derive(model, _parse_selection(args.select), set(args.optional))
    text = json.dumps(config.as_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def cmd_family_conform(args: argparse.Namespace) -> int:
    model = _load_family(args.model)
    config = derive(model, _parse_selection(args.select), set(args.optional))
    with open(args.manifest, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if args.module not in manifest:
        print(f"module {args.module!r} not present in manifest", file=sys.stderr)
        return 2
    report = check_conformance(config, manifest[args.module], args.module)
    print(report.describe())
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xppusim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario headless or behind the gateway")
    run.add_argument("--scenario", required=True, help="bundled scenario name or JSON path")
    run.add_argument("--strategy", choices=["procedural", "oo"], default="procedural")
    run.add_argument("--trace", help="write the JSON-lines trace to this file")
    run.add_argument("--emit-manifest", help="write the runtime module manifest to this file")
    run.add_argument("--serve", metavar="HOST:PORT", help="attach the operator gateway (NDJSON/TCP)")
    run.add_argument("--http", metavar="HOST:PORT", help="HTTP/WS endpoint (default: TCP port + 1)")
    run.add_argument("--no-http", action="store_true", help="serve TCP only")
    run.add_argument("--realtime", action="store_true", help="pace scans to the 10 ms period")
    run.add_argument("--break-at", type=int, help="drop schedule entries from this tick on (serve mode)")
    run.add_argument("--panel-dir", help="directory with the built operator panel")
    run.set_defaults(func=cmd_run)

    compare = sub.add_parser("compare", help="diff two trace files")
    compare.add_argument("trace_a")
    compare.add_argument("trace_b")
    compare.add_argument("--projection", choices=["behavioral", "full"], default="behavioral")
    compare.set_defaults(func=cmd_compare)

    sub.add_parser("list-scenarios", help="list bundled scenarios").set_defaults(
        func=cmd_list_scenarios
    )

    manifest = sub.add_parser("manifest", help="emit the module manifest of the default build")
    manifest.add_argument("--out")
    manifest.set_defaults(func=cmd_manifest)

    family = sub.add_parser("family", help="family-model operations")
    family_sub = family.add_subparsers(dest="family_command", required=True)

    fv = family_sub.add_parser("validate", help="check a family model document")
    fv.add_argument("model", help="model path, or 'bundled' for the cylinder family")
    fv.set_defaults(func=cmd_family_validate)

    fd = family_sub.add_parser("derive", help="derive a variant configuration")
    fd.add_argument("model")
    fd.add_argument("--select", action="append", default=[], metavar="KEY=VALUE")
    fd.add_argument("--optional", action="append", default=[], metavar="NAME")
    fd.add_argument("--out")
    fd.set_defaults(func=cmd_family_derive)

    fc = family_sub.add_parser("conform", help="check a variant against a runtime manifest")
    fc.add_argument("model")
    fc.add_argument("--manifest", required=True)
    fc.add_argument("--module", required=True)
    fc.add_argument("--select", action="append", default=[], metavar="KEY=VALUE")
    fc.add_argument("--optional", action="append", default=[], metavar="NAME")
    fc.set_defaults(func=cmd_family_conform)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioValidationError, FamilyModelError, DerivationError, BuildError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
