"""Command line interface over the project store.

Every command operates on one project directory (``--project``).  Exit codes
follow the usual convention: 0 on success, 1 when a domain rule rejects the
request (missing file, stale revision, integrity violation), 2 when the
command line itself is malformed.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from .cast import analyze_narrative, cast_to_dict, format_cast_text
from .errors import MedDevSecError, NotFoundError
from .inventory import compile_profile, derive_search_keywords, load_attack_kb
from .model import validate as validate_structure
from .project import (
    DATASET_DEVICES,
    DATASET_MAUDE,
    ProjectStore,
    StoredCast,
    StoredScenario,
    add_cast,
    add_scenario,
    next_id,
    upsert_profile,
    with_surface,
)
from .regulatory import GroupBy, aggregate, count_table_to_dict
from .report import REPORT_FORMATS, write_report_files
from .scenario import (
    HttpGateway,
    ScenarioRequest,
    format_scenario_text,
    generate,
    generate_fallback,
    scenario_to_dict,
)
from .surface import (
    enumerate_entry_points,
    format_surface_table,
    inference_data_flow,
    report_to_dict,
)

EXIT_OK = 0
EXIT_DOMAIN_ERROR = 1
EXIT_USAGE_ERROR = 2

_GROUP_CHOICES = {
    "event_type": GroupBy.EventType,
    "problem_code": GroupBy.ProblemCode,
    "year": GroupBy.Year,
    "panel": GroupBy.Panel,
}


def _slug(text: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    return slug or "project"


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _emit_json(payload: object) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _warn(lines) -> None:
    for line in lines:
        print(f"warning: {line}", file=sys.stderr)


def _store(args: argparse.Namespace) -> ProjectStore:
    return ProjectStore(Path(args.project))


def cmd_init(args: argparse.Namespace) -> int:
    store = _store(args)
    project = store.init(
        args.id or _slug(args.device),
        args.device,
        ml_location=args.ml_location,
        system_description=args.description,
    )
    _emit(f"initialized project {project.id} at {store.project_path}")
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    store = _store(args)
    project = store.load()
    on_disk = project.revision
    for snapshot in args.snapshot:
        project, info, warnings = store.ingest_snapshot(project, Path(snapshot))
        _warn(warnings)
        declared = info.declared_date or "undated"
        _emit(
            f"ingested {info.file}: {info.dataset}, {info.records} records,"
            f" snapshot {declared}"
        )
    store.save(project, expected_revision=on_disk)
    return EXIT_OK


def cmd_profile(args: argparse.Namespace) -> int:
    store = _store(args)
    project = store.load()
    responses_path = Path(args.responses)
    if not responses_path.is_file():
        raise NotFoundError(f"responses file {responses_path} not found")
    responses = json.loads(responses_path.read_text(encoding="utf-8"))
    profile = compile_profile(args.component, responses)
    updated = upsert_profile(project, profile)
    store.save(updated, expected_revision=project.revision)
    keywords = ", ".join(derive_search_keywords(profile)) or "(none)"
    _emit(f"profiled {args.component}; search keywords: {keywords}")
    return EXIT_OK


def cmd_surface(args: argparse.Namespace) -> int:
    store = _store(args)
    project = store.load()
    index = store.vulnerability_index(project)
    report = enumerate_entry_points(project.structure, project.profiles, index)
    updated = with_surface(project, report)
    store.save(updated, expected_revision=project.revision)
    if args.format == "structured":
        _emit_json(report_to_dict(report))
    else:
        _emit(format_surface_table(report))
    return EXIT_OK


def _locate(items, wanted: str, what: str):
    for item in items:
        if item.id == wanted:
            return item
    known = ", ".join(sorted(item.id for item in items)) or "(none)"
    raise NotFoundError(f"unknown {what} {wanted!r}; known: {known}")


def cmd_scenario(args: argparse.Namespace) -> int:
    store = _store(args)
    project = store.load()
    if project.attack_surface is None or not project.attack_surface.entry_points:
        raise NotFoundError("no attack surface recorded; run the surface command first")
    entries = project.attack_surface.entry_points
    if not 1 <= args.entry_point <= len(entries):
        raise NotFoundError(
            f"entry point {args.entry_point} out of range 1..{len(entries)}"
        )
    entry = entries[args.entry_point - 1]
    request = ScenarioRequest(
        system_description=project.system_description,
        data_flow=inference_data_flow(project.structure),
        ml_attack=_locate(load_attack_kb(), args.attack, "attack pattern"),
        target_component=entry.component,
        target_technology=entry.technology,
        vulnerability=entry.vulnerability,
        hazard=_locate(project.hazards, args.hazard, "hazard"),
        uca=_locate(project.ucas, args.uca, "unsafe control action"),
    )
    if args.fallback:
        scenario = generate_fallback(request)
    else:
        scenario = generate(request, HttpGateway(args.gateway))
    stored = StoredScenario(
        id=next_id("scn", [s.id for s in project.scenarios]), scenario=scenario
    )
    updated = add_scenario(project, stored)
    store.save(updated, expected_revision=project.revision)
    _warn(scenario.warnings)
    if args.format == "structured":
        _emit_json({"id": stored.id, "scenario": scenario_to_dict(scenario)})
    else:
        sys.stdout.write(format_scenario_text(scenario))
    return EXIT_OK


def cmd_cast(args: argparse.Namespace) -> int:
    store = _store(args)
    project = store.load()
    narrative_path = Path(args.narrative)
    if not narrative_path.is_file():
        raise NotFoundError(f"narrative file {narrative_path} not found")
    narrative = narrative_path.read_text(encoding="utf-8")
    gateway = HttpGateway(args.gateway) if args.gateway else None
    analysis = analyze_narrative(narrative, project.structure, gateway=gateway)
    stored = StoredCast(
        id=next_id("cast", [c.id for c in project.cast_results]), analysis=analysis
    )
    updated = add_cast(project, stored)
    store.save(updated, expected_revision=project.revision)
    _warn(analysis.warnings)
    if args.format == "structured":
        _emit_json({"id": stored.id, "analysis": cast_to_dict(analysis)})
    else:
        sys.stdout.write(format_cast_text(analysis))
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    store = _store(args)
    project = store.load()
    data = store.regulatory_data(project)
    group_by = _GROUP_CHOICES[args.group_by]
    devices = data[DATASET_DEVICES] if group_by is GroupBy.Panel else None
    table = aggregate(data[DATASET_MAUDE], group_by, devices)
    if args.format == "structured":
        _emit_json(count_table_to_dict(table))
    else:
        _emit(f"{table.group_by.value}: {table.total} events")
        for row in table.rows:
            _emit(f"  {row.key}: {row.count} ({row.percent}%)")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    store = _store(args)
    project = store.load()
    out_dir = Path(args.out)
    written = write_report_files(project, out_dir)
    if args.format == "structured":
        _emit_json({"out_dir": str(out_dir), "files": written})
    else:
        for name in written:
            _emit(f"wrote {out_dir / name}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(_store(args))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    store = _store(args)
    project = store.load()
    violations = validate_structure(project.structure)
    payload = {
        "project": project.id,
        "revision": project.revision,
        "findings": [
            {"element": v.element, "rule": v.rule, "message": v.message}
            for v in violations
        ],
    }
    if args.format == "structured":
        _emit_json(payload)
    else:
        _emit(f"project {project.id} loads cleanly (revision {project.revision})")
        for finding in payload["findings"]:
            _emit(f"finding [{finding['rule']}] {finding['element']}: {finding['message']}")
        if not violations:
            _emit("no review findings")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meddevsec",
        description="Security risk assessment for ML-enabled medical devices.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def command(name: str, handler, help_text: str):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--project", required=True, help="project directory")
        sub.set_defaults(handler=handler)
        return sub

    def format_flag(sub) -> None:
        sub.add_argument(
            "--format", choices=REPORT_FORMATS, default="text",
            help="output as human text or machine JSON",
        )

    sub = command("init", cmd_init, "create a project from the device template")
    sub.add_argument("--device", required=True, help="device name")
    sub.add_argument(
        "--ml-location", choices=("device", "cloud"), default="device",
        help="where the ML controller runs",
    )
    sub.add_argument("--description", default="", help="system description text")
    sub.add_argument("--id", default=None, help="project id (defaults to device slug)")

    sub = command("ingest", cmd_ingest, "copy evidence snapshots into the project")
    sub.add_argument(
        "--snapshot", action="append", required=True,
        help="snapshot file to ingest (repeatable)",
    )

    sub = command("profile", cmd_profile, "record a component technology profile")
    sub.add_argument("--component", required=True, help="component id")
    sub.add_argument(
        "--responses", required=True, help="JSON file with questionnaire answers"
    )

    sub = command("surface", cmd_surface, "enumerate and store the attack surface")
    format_flag(sub)

    sub = command("scenario", cmd_scenario, "draft an attack scenario for an entry point")
    sub.add_argument(
        "--entry-point", type=int, required=True,
        help="rank of the entry point in the surface table (1-based)",
    )
    sub.add_argument("--attack", required=True, help="ML attack pattern id")
    sub.add_argument("--hazard", required=True, help="hazard id from the project")
    sub.add_argument("--uca", required=True, help="unsafe control action id")
    mode = sub.add_mutually_exclusive_group(required=True)
    mode.add_argument("--gateway", help="LLM gateway URL")
    mode.add_argument(
        "--fallback", action="store_true", help="use the deterministic generator"
    )
    format_flag(sub)

    sub = command("cast", cmd_cast, "run a causal analysis over an incident narrative")
    sub.add_argument("--narrative", required=True, help="plain text narrative file")
    sub.add_argument("--gateway", default=None, help="optional LLM gateway URL")
    format_flag(sub)

    sub = command("stats", cmd_stats, "aggregate ingested regulatory event data")
    sub.add_argument(
        "--group-by", choices=sorted(_GROUP_CHOICES), default="event_type",
        help="grouping axis",
    )
    format_flag(sub)

    sub = command("report", cmd_report, "render report files into a directory")
    sub.add_argument("--out", required=True, help="output directory")
    format_flag(sub)

    sub = command("serve", cmd_serve, "start the HTTP service")
    sub.add_argument("--host", default="127.0.0.1", help="bind address")
    sub.add_argument("--port", type=int, default=8000, help="bind port")

    sub = command("validate", cmd_validate, "check the project file and structure")
    format_flag(sub)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE_ERROR if exc.code else EXIT_OK
    try:
        return args.handler(args)
    except MedDevSecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN_ERROR
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON input: {exc}", file=sys.stderr)
        return EXIT_DOMAIN_ERROR


if __name__ == "__main__":
    sys.exit(main())
