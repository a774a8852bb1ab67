"""HTTP service over a single project store.

Wire bodies reuse the project-file dictionary shapes, so a client that can
read ``project.json`` can read every response here.  Mutating requests
carry the revision the client last saw; a mismatch returns 409 and the
client is expected to reload and replay.  Mutations may also carry an
``op_id``: retrying an operation the project already absorbed returns
success without applying it twice.

Status codes: 404 unknown element, 409 revision conflict or id collision,
422 anything that fails domain validation or parsing.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Mapping

from fastapi import Body, FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .cast import analyze_narrative, cast_to_dict
from .errors import (
    ConflictError,
    IncompleteQuestionnaireError,
    MedDevSecError,
    NotFoundError,
    ParseError,
    ValidationError,
)
from .inventory import compile_profile, load_attack_kb, profile_to_dict
from .model import (
    edit,
    parse_edit_operation,
    structure_from_dict,
    structure_to_dict,
    validate as validate_structure,
)
from .project import (
    DATASET_DEVICES,
    DATASET_MAUDE,
    Project,
    ProjectStore,
    StoredCast,
    StoredScenario,
    add_cast,
    add_scenario,
    next_id,
    set_disposition,
    snapshot_info_to_dict,
    stored_cast_to_dict,
    stored_scenario_to_dict,
    upsert_profile,
    with_structure,
    with_surface,
)
from .regulatory import GroupBy, aggregate, count_table_to_dict
from .report import render_structured, render_text
from .scenario import (
    Disposition,
    HttpGateway,
    ScenarioRequest,
    generate,
    generate_fallback,
)
from .surface import enumerate_entry_points, inference_data_flow, report_to_dict
from .vulnintel import MatchResult, record_to_dict

GROUP_BY_PARAMS = {
    "event_type": GroupBy.EventType,
    "problem_code": GroupBy.ProblemCode,
    "year": GroupBy.Year,
    "panel": GroupBy.Panel,
}


def _match_to_dict(match: MatchResult) -> dict[str, object]:
    return {
        "record": record_to_dict(match.record),
        "score": match.score,
        "matched_terms": list(match.matched_terms),
    }


def _project_summary(project: Project) -> dict[str, object]:
    return {
        "id": project.id,
        "revision": project.revision,
        "device": project.structure.device_name,
        "schema_version": project.schema_version,
    }


def _require(body: Mapping[str, object], field: str) -> object:
    if field not in body:
        raise ValidationError(f"request body missing field {field!r}")
    return body[field]


def _claimed_revision(body: Mapping[str, object]) -> int:
    revision = _require(body, "revision")
    if isinstance(revision, bool) or not isinstance(revision, int):
        raise ValidationError("revision must be an integer")
    return revision


def create_app(store: ProjectStore | Path | str) -> FastAPI:
    """Application bound to one project directory."""

    if not isinstance(store, ProjectStore):
        store = ProjectStore(Path(store))
    app = FastAPI(title="meddevsec", docs_url=None, redoc_url=None)
    write_lock = threading.Lock()

    def load() -> Project:
        return store.load()

    def load_named(project_id: str) -> Project:
        project = load()
        if project.id != project_id:
            raise NotFoundError(f"unknown project {project_id!r}")
        return project

    def commit(project: Project, claimed: int, updated: Project) -> None:
        # claimed was verified against the loaded revision inside the lock,
        # so the save can use it directly as the on-disk guard.
        store.save(updated, expected_revision=claimed)

    def check_revision(project: Project, body: Mapping[str, object]) -> int:
        claimed = _claimed_revision(body)
        if claimed != project.revision:
            raise ConflictError(
                f"stale revision: client has {claimed}, project is at {project.revision}"
            )
        return claimed

    def replayed(project: Project, body: Mapping[str, object]) -> bool:
        op_id = body.get("op_id")
        return isinstance(op_id, str) and op_id in project.applied_ops

    def op_id_of(body: Mapping[str, object]) -> str | None:
        op_id = body.get("op_id")
        if op_id is None:
            return None
        if not isinstance(op_id, str) or not op_id.strip():
            raise ValidationError("op_id must be a nonempty string when given")
        return op_id

    @app.exception_handler(MedDevSecError)
    def domain_error(request: Request, exc: MedDevSecError) -> JSONResponse:
        if isinstance(exc, NotFoundError):
            status = 404
        elif isinstance(exc, ConflictError):
            status = 409
        else:
            status = 422
        payload: dict[str, object] = {"detail": str(exc)}
        if isinstance(exc, IncompleteQuestionnaireError):
            payload["missing_groups"] = exc.missing_groups
        if isinstance(exc, ParseError) and exc.context:
            payload["context"] = exc.context
        return JSONResponse(payload, status_code=status)

    # --- project and structure ---------------------------------------------

    @app.get("/projects")
    def list_projects():
        if not store.exists():
            return []
        return [_project_summary(load())]

    @app.post("/projects", status_code=201)
    def create_project(body: dict = Body(...)) -> dict[str, object]:
        device = str(_require(body, "device"))
        with write_lock:
            project = store.init(
                str(body.get("id") or "").strip() or "project",
                device,
                ml_location=str(body.get("ml_location", "device")),
                system_description=str(body.get("description", "")),
            )
        return _project_summary(project)

    @app.get("/projects/{project_id}/structure")
    def get_structure(project_id: str):
        project = load_named(project_id)
        return {
            "revision": project.revision,
            "structure": structure_to_dict(project.structure),
            "findings": [
                {"element": v.element, "rule": v.rule, "message": v.message}
                for v in validate_structure(project.structure)
            ],
        }

    @app.put("/projects/{project_id}/structure")
    def put_structure(project_id: str, body: dict = Body(...)) -> dict[str, object]:
        with write_lock:
            project = load_named(project_id)
            if replayed(project, body):
                return get_structure(project_id)
            claimed = check_revision(project, body)
            if "structure" in body:
                raw = body["structure"]
                if not isinstance(raw, Mapping):
                    raise ValidationError("structure must be an object")
                structure = structure_from_dict(raw)
            elif "operations" in body:
                operations = body["operations"]
                if not isinstance(operations, list):
                    raise ValidationError("operations must be a list")
                structure = project.structure
                for raw_op in operations:
                    if not isinstance(raw_op, Mapping):
                        raise ValidationError("each operation must be an object")
                    structure = edit(structure, parse_edit_operation(raw_op))
            else:
                raise ValidationError(
                    "request body needs either 'structure' or 'operations'"
                )
            updated = with_structure(project, structure, op_id=op_id_of(body))
            commit(project, claimed, updated)
        return get_structure(project_id)

    # --- profiles ------------------------------------------------------------

    @app.get("/profiles")
    def list_profiles():
        project = load()
        return {
            "revision": project.revision,
            "profiles": [profile_to_dict(p) for p in project.profiles],
        }

    @app.put("/profiles/{component}")
    def put_profile(component: str, body: dict = Body(...)) -> dict[str, object]:
        with write_lock:
            project = load()
            if not replayed(project, body):
                claimed = check_revision(project, body)
                responses = _require(body, "responses")
                if not isinstance(responses, Mapping):
                    raise ValidationError("responses must be an object")
                profile = compile_profile(component, responses)
                updated = upsert_profile(project, profile, op_id=op_id_of(body))
                commit(project, claimed, updated)
                project = updated
        return {
            "revision": project.revision,
            "profile": profile_to_dict(project.profile(component)),
        }

    # --- vulnerability intelligence ------------------------------------------

    @app.post("/vulns/search")
    def search_vulns(body: dict = Body(...)) -> dict[str, object]:
        keywords = _require(body, "keywords")
        if not isinstance(keywords, list) or not all(
            isinstance(k, str) for k in keywords
        ):
            raise ValidationError("keywords must be a list of strings")
        project = load()
        index = store.vulnerability_index(project)
        matches = index.search(keywords)
        return {"matches": [_match_to_dict(m) for m in matches]}

    # --- attack surface --------------------------------------------------------

    @app.get("/surface")
    def get_surface():
        project = load()
        if project.attack_surface is None:
            raise NotFoundError("no attack surface recorded; POST /surface to compute")
        return {
            "revision": project.revision,
            "surface": report_to_dict(project.attack_surface),
        }

    @app.post("/surface")
    def compute_surface(body: dict = Body(...)) -> dict[str, object]:
        with write_lock:
            project = load()
            if not replayed(project, body):
                claimed = check_revision(project, body)
                index = store.vulnerability_index(project)
                report = enumerate_entry_points(
                    project.structure, project.profiles, index
                )
                updated = with_surface(project, report, op_id=op_id_of(body))
                commit(project, claimed, updated)
                project = updated
        return {
            "revision": project.revision,
            "surface": report_to_dict(project.attack_surface),
        }

    # --- scenarios -------------------------------------------------------------

    @app.get("/scenarios")
    def list_scenarios():
        project = load()
        return {
            "revision": project.revision,
            "scenarios": [stored_scenario_to_dict(s) for s in project.scenarios],
        }

    @app.post("/scenarios", status_code=201)
    def create_scenario(body: dict = Body(...)):
        with write_lock:
            project = load()
            if replayed(project, body):
                wanted = body.get("id")
                if isinstance(wanted, str) and any(
                    s.id == wanted for s in project.scenarios
                ):
                    return JSONResponse(
                        {
                            "revision": project.revision,
                            "stored": stored_scenario_to_dict(project.scenario(wanted)),
                        },
                        status_code=200,
                    )
                return JSONResponse(
                    {"revision": project.revision, "replayed": True}, status_code=200
                )
            claimed = check_revision(project, body)
            if project.attack_surface is None or not project.attack_surface.entry_points:
                raise NotFoundError(
                    "no attack surface recorded; POST /surface to compute"
                )
            entries = project.attack_surface.entry_points
            position = _require(body, "entry_point")
            if isinstance(position, bool) or not isinstance(position, int):
                raise ValidationError("entry_point must be an integer rank")
            if not 1 <= position <= len(entries):
                raise NotFoundError(
                    f"entry point {position} out of range 1..{len(entries)}"
                )
            entry = entries[position - 1]
            attack_id = str(_require(body, "attack"))
            pattern = next(
                (p for p in load_attack_kb() if p.id == attack_id), None
            )
            if pattern is None:
                raise NotFoundError(f"unknown attack pattern {attack_id!r}")
            hazard_id = str(_require(body, "hazard"))
            hazard = next((h for h in project.hazards if h.id == hazard_id), None)
            if hazard is None:
                raise NotFoundError(f"unknown hazard {hazard_id!r}")
            uca_id = str(_require(body, "uca"))
            uca = next((u for u in project.ucas if u.id == uca_id), None)
            if uca is None:
                raise NotFoundError(f"unknown unsafe control action {uca_id!r}")
            request = ScenarioRequest(
                system_description=project.system_description,
                data_flow=inference_data_flow(project.structure),
                ml_attack=pattern,
                target_component=entry.component,
                target_technology=entry.technology,
                vulnerability=entry.vulnerability,
                hazard=hazard,
                uca=uca,
            )
            gateway_url = body.get("gateway")
            if body.get("fallback") or not gateway_url:
                scenario = generate_fallback(request)
            else:
                scenario = generate(request, HttpGateway(str(gateway_url)))
            scenario_id = str(
                body.get("id") or next_id("scn", [s.id for s in project.scenarios])
            )
            stored = StoredScenario(id=scenario_id, scenario=scenario)
            updated = add_scenario(project, stored, op_id=op_id_of(body))
            commit(project, claimed, updated)
        return {
            "revision": updated.revision,
            "stored": stored_scenario_to_dict(stored),
        }

    @app.patch("/scenarios/{scenario_id}")
    def patch_scenario(scenario_id: str, body: dict = Body(...)) -> dict[str, object]:
        with write_lock:
            project = load()
            if not replayed(project, body):
                claimed = check_revision(project, body)
                raw_disposition = str(_require(body, "disposition"))
                try:
                    disposition = Disposition(raw_disposition)
                except ValueError as exc:
                    raise ValidationError(
                        f"unknown disposition {raw_disposition!r}"
                    ) from exc
                note = str(body.get("note", ""))
                updated = set_disposition(
                    project, scenario_id, disposition, note=note, op_id=op_id_of(body)
                )
                commit(project, claimed, updated)
                project = updated
        return {
            "revision": project.revision,
            "stored": stored_scenario_to_dict(project.scenario(scenario_id)),
        }

    # --- causal analysis ---------------------------------------------------------

    @app.get("/cast")
    def list_cast():
        project = load()
        return {
            "revision": project.revision,
            "analyses": [stored_cast_to_dict(c) for c in project.cast_results],
        }

    @app.post("/cast", status_code=201)
    def create_cast(body: dict = Body(...)):
        with write_lock:
            project = load()
            if replayed(project, body):
                wanted = body.get("id")
                if isinstance(wanted, str) and any(
                    c.id == wanted for c in project.cast_results
                ):
                    return JSONResponse(
                        {
                            "revision": project.revision,
                            "stored": stored_cast_to_dict(project.cast_result(wanted)),
                        },
                        status_code=200,
                    )
                return JSONResponse(
                    {"revision": project.revision, "replayed": True}, status_code=200
                )
            claimed = check_revision(project, body)
            narrative = str(_require(body, "narrative"))
            gateway_url = body.get("gateway")
            gateway = HttpGateway(str(gateway_url)) if gateway_url else None
            analysis = analyze_narrative(narrative, project.structure, gateway=gateway)
            cast_id = str(
                body.get("id") or next_id("cast", [c.id for c in project.cast_results])
            )
            stored = StoredCast(id=cast_id, analysis=analysis)
            updated = add_cast(project, stored, op_id=op_id_of(body))
            commit(project, claimed, updated)
        return {"revision": updated.revision, "stored": stored_cast_to_dict(stored)}

    # --- statistics and reporting ---------------------------------------------

    @app.get("/stats")
    def get_stats(group_by: str = Query("event_type")) -> dict[str, object]:
        if group_by not in GROUP_BY_PARAMS:
            raise ValidationError(
                f"unknown group_by {group_by!r};"
                f" expected one of {', '.join(sorted(GROUP_BY_PARAMS))}"
            )
        project = load()
        data = store.regulatory_data(project)
        axis = GROUP_BY_PARAMS[group_by]
        devices = data[DATASET_DEVICES] if axis is GroupBy.Panel else None
        table = aggregate(data[DATASET_MAUDE], axis, devices)
        return {
            "revision": project.revision,
            "table": count_table_to_dict(table),
            "snapshots": [snapshot_info_to_dict(s) for s in project.snapshots],
        }

    @app.get("/report")
    def get_report(format: str = Query("structured")):
        project = load()
        if format == "text":
            return PlainTextResponse(render_text(project))
        if format == "structured":
            return JSONResponse(render_structured(project))
        raise ValidationError(f"unknown report format {format!r}")

    return app
