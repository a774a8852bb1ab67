"""Project persistence: one assessment per directory, plain text artifacts.

A project directory holds ``project.json`` (the analysis state: structure,
safety artifacts, profiles, attack surface, scenarios, causal analyses,
notes) and a ``snapshots/`` subdirectory with verbatim copies of every
ingested evidence file.  The JSON document is the unit of optimistic
concurrency: every mutation helper returns a new value with the revision
bumped, and :meth:`ProjectStore.save` refuses to overwrite a revision it
has not seen.  Mutation helpers accept an operation id; re-applying an id
recorded in the project is a no-op, which makes client retries safe.

No wall-clock timestamps are stored anywhere, so identical edit histories
produce byte-identical project files.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .cast import CastAnalysis, cast_from_dict, cast_to_dict
from .errors import ConflictError, NotFoundError, ParseError, ValidationError
from .inventory import TechnologyProfile, profile_from_dict, profile_to_dict
from .model import (
    ControlStructure,
    Hazard,
    Loss,
    UnsafeControlAction,
    hazard_from_dict,
    hazard_to_dict,
    loss_from_dict,
    loss_to_dict,
    new_from_template,
    structure_from_dict,
    structure_to_dict,
    uca_from_dict,
    uca_to_dict,
)
from .regulatory import parse_maude, parse_recalls, parse_devices_csv
from .scenario import (
    AttackScenario,
    Disposition,
    scenario_from_dict,
    scenario_to_dict,
)
from .surface import AttackSurfaceReport, report_from_dict, report_to_dict
from .vulnintel import (
    VulnerabilityIndex,
    VulnerabilityRecord,
    ingest_cve_feed,
    ingest_icscert,
    read_snapshot_date,
)

PROJECT_SCHEMA_VERSION = 1
PROJECT_FILE = "project.json"
SNAPSHOT_DIR = "snapshots"
APPLIED_OPS_WINDOW = 50

_ID_RE = re.compile(r"^[a-z0-9][a-z0-9_-]*$")

DATASET_CVE = "cve_feed"
DATASET_ADVISORY = "advisory_feed"
DATASET_RECALLS = "fda_recalls"
DATASET_MAUDE = "fda_maude"
DATASET_DEVICES = "ml_devices"

DATASETS = (DATASET_CVE, DATASET_ADVISORY, DATASET_RECALLS, DATASET_MAUDE, DATASET_DEVICES)


@dataclass(frozen=True)
class SnapshotInfo:
    """Provenance for one ingested evidence file."""

    file: str
    dataset: str
    declared_date: str | None
    records: int

    def __post_init__(self) -> None:
        if not self.file.strip():
            raise ValidationError("snapshot: file name must be nonempty")
        if self.dataset not in DATASETS:
            raise ValidationError(f"snapshot {self.file}: unknown dataset {self.dataset!r}")
        if self.records < 0:
            raise ValidationError(f"snapshot {self.file}: record count must be nonnegative")


@dataclass(frozen=True)
class StoredScenario:
    """A drafted scenario plus its analyst triage state."""

    id: str
    scenario: AttackScenario
    disposition: Disposition = Disposition.Open
    note: str = ""

    def __post_init__(self) -> None:
        if not _ID_RE.match(self.id):
            raise ValidationError(f"scenario id {self.id!r} must be a lowercase slug")
        if not isinstance(self.disposition, Disposition):
            object.__setattr__(self, "disposition", Disposition(self.disposition))


@dataclass(frozen=True)
class StoredCast:
    id: str
    analysis: CastAnalysis

    def __post_init__(self) -> None:
        if not _ID_RE.match(self.id):
            raise ValidationError(f"causal analysis id {self.id!r} must be a lowercase slug")


@dataclass(frozen=True)
class AnalystNote:
    """Free-text note, optionally anchored to one project element id."""

    id: str
    text: str
    element: str = ""

    def __post_init__(self) -> None:
        if not _ID_RE.match(self.id):
            raise ValidationError(f"note id {self.id!r} must be a lowercase slug")
        if not self.text.strip():
            raise ValidationError(f"note {self.id}: text must be nonempty")


@dataclass(frozen=True)
class Project:
    """Immutable snapshot of one assessment; mutations return new values."""

    id: str
    structure: ControlStructure
    system_description: str = ""
    losses: tuple[Loss, ...] = ()
    hazards: tuple[Hazard, ...] = ()
    ucas: tuple[UnsafeControlAction, ...] = ()
    profiles: tuple[TechnologyProfile, ...] = ()
    snapshots: tuple[SnapshotInfo, ...] = ()
    attack_surface: AttackSurfaceReport | None = None
    scenarios: tuple[StoredScenario, ...] = ()
    cast_results: tuple[StoredCast, ...] = ()
    notes: tuple[AnalystNote, ...] = ()
    applied_ops: tuple[str, ...] = ()
    revision: int = 0
    schema_version: int = PROJECT_SCHEMA_VERSION

    def __post_init__(self) -> None:
        for name in ("losses", "hazards", "ucas", "profiles", "snapshots",
                     "scenarios", "cast_results", "notes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "applied_ops", tuple(self.applied_ops)[-APPLIED_OPS_WINDOW:])
        if self.schema_version != PROJECT_SCHEMA_VERSION:
            raise ValidationError(
                f"unsupported project schema version {self.schema_version}"
            )
        if not _ID_RE.match(self.id):
            raise ValidationError(f"project id {self.id!r} must be a lowercase slug")
        if self.revision < 0:
            raise ValidationError("revision must be nonnegative")
        self._check_integrity()

    def _check_integrity(self) -> None:
        component_ids = {c.id for c in self.structure.components}
        link_ids = {l.id for l in self.structure.links}
        loss_ids = _unique_ids((l.id for l in self.losses), "loss")
        hazard_ids = _unique_ids((h.id for h in self.hazards), "hazard")
        uca_ids = _unique_ids((u.id for u in self.ucas), "unsafe control action")
        for hazard in self.hazards:
            for loss_id in hazard.linked_losses:
                if loss_id not in loss_ids:
                    raise ValidationError(
                        f"hazard {hazard.id}: unknown loss {loss_id!r}"
                    )
        for uca in self.ucas:
            for hazard_id in uca.hazards:
                if hazard_id not in hazard_ids:
                    raise ValidationError(
                        f"unsafe control action {uca.id}: unknown hazard {hazard_id!r}"
                    )
        profiled = set()
        for profile in self.profiles:
            if profile.component not in component_ids:
                raise ValidationError(
                    f"profile for unknown component {profile.component!r}"
                )
            if profile.component in profiled:
                raise ValidationError(
                    f"duplicate profile for component {profile.component!r}"
                )
            profiled.add(profile.component)
        _unique_ids((s.file for s in self.snapshots), "snapshot file")
        if self.attack_surface is not None:
            for entry in self.attack_surface.entry_points:
                if entry.component not in component_ids:
                    raise ValidationError(
                        f"attack surface entry for unknown component {entry.component!r}"
                    )
                for link_id in entry.injection_path:
                    if link_id not in link_ids:
                        raise ValidationError(
                            f"attack surface entry {entry.vulnerability.id}:"
                            f" unknown link {link_id!r}"
                        )
        scenario_ids = _unique_ids((s.id for s in self.scenarios), "scenario")
        for stored in self.scenarios:
            request = stored.scenario.request
            for component in request.data_flow:
                if component not in component_ids:
                    raise ValidationError(
                        f"scenario {stored.id}: unknown component {component!r} in data flow"
                    )
        cast_ids = _unique_ids((c.id for c in self.cast_results), "causal analysis")
        for stored_cast in self.cast_results:
            for assignment in stored_cast.analysis.assignments:
                if not assignment.assigned:
                    continue
                controller, controlled = assignment.loop.split("->", 1)
                if controller not in component_ids or controlled not in component_ids:
                    raise ValidationError(
                        f"causal analysis {stored_cast.id}:"
                        f" loop {assignment.loop} names unknown components"
                    )
        known = (
            component_ids
            | link_ids
            | loss_ids
            | hazard_ids
            | uca_ids
            | scenario_ids
            | cast_ids
        )
        for note in self.notes:
            if note.element and note.element not in known:
                raise ValidationError(
                    f"note {note.id}: unknown element {note.element!r}"
                )
        _unique_ids((n.id for n in self.notes), "note")

    def scenario(self, scenario_id: str) -> StoredScenario:
        for stored in self.scenarios:
            if stored.id == scenario_id:
                return stored
        raise NotFoundError(f"unknown scenario {scenario_id!r}")

    def cast_result(self, cast_id: str) -> StoredCast:
        for stored in self.cast_results:
            if stored.id == cast_id:
                return stored
        raise NotFoundError(f"unknown causal analysis {cast_id!r}")

    def profile(self, component: str) -> TechnologyProfile:
        for profile in self.profiles:
            if profile.component == component:
                return profile
        raise NotFoundError(f"no profile for component {component!r}")


def _unique_ids(ids, what: str) -> set[str]:
    seen: set[str] = set()
    for item in ids:
        if item in seen:
            raise ValidationError(f"duplicate {what} id {item!r}")
        seen.add(item)
    return seen


def new_project(
    project_id: str,
    device_name: str,
    ml_location: str = "device",
    system_description: str = "",
) -> Project:
    """Fresh project around the template structure, revision 0."""

    return Project(
        id=project_id,
        structure=new_from_template(device_name, ml_location=ml_location),
        system_description=system_description,
    )


# --- mutation helpers -------------------------------------------------------


def _commit(project: Project, op_id: str | None, **changes: object) -> Project:
    """Apply changes, bump the revision, and record the operation id.

    When ``op_id`` was already applied the project is returned unchanged:
    the caller is retrying a request the project has already absorbed.
    """

    if op_id is not None:
        if not op_id.strip():
            raise ValidationError("operation id must be nonempty when given")
        if op_id in project.applied_ops:
            return project
        changes["applied_ops"] = project.applied_ops + (op_id,)
    return replace(project, revision=project.revision + 1, **changes)


def with_structure(
    project: Project, structure: ControlStructure, op_id: str | None = None
) -> Project:
    return _commit(project, op_id, structure=structure)


def with_safety(
    project: Project,
    losses: Sequence[Loss] | None = None,
    hazards: Sequence[Hazard] | None = None,
    ucas: Sequence[UnsafeControlAction] | None = None,
    op_id: str | None = None,
) -> Project:
    changes: dict[str, object] = {}
    if losses is not None:
        changes["losses"] = tuple(losses)
    if hazards is not None:
        changes["hazards"] = tuple(hazards)
    if ucas is not None:
        changes["ucas"] = tuple(ucas)
    if not changes:
        raise ValidationError("no safety artifacts supplied")
    return _commit(project, op_id, **changes)


def with_description(project: Project, text: str, op_id: str | None = None) -> Project:
    return _commit(project, op_id, system_description=text)


def upsert_profile(
    project: Project, profile: TechnologyProfile, op_id: str | None = None
) -> Project:
    kept = tuple(p for p in project.profiles if p.component != profile.component)
    return _commit(project, op_id, profiles=kept + (profile,))


def with_surface(
    project: Project, report: AttackSurfaceReport, op_id: str | None = None
) -> Project:
    return _commit(project, op_id, attack_surface=report)


def add_scenario(
    project: Project, stored: StoredScenario, op_id: str | None = None
) -> Project:
    if any(s.id == stored.id for s in project.scenarios):
        raise ConflictError(f"duplicate scenario id {stored.id!r}")
    return _commit(project, op_id, scenarios=project.scenarios + (stored,))


def set_disposition(
    project: Project,
    scenario_id: str,
    disposition: Disposition,
    note: str = "",
    op_id: str | None = None,
) -> Project:
    stored = project.scenario(scenario_id)
    updated = replace(stored, disposition=Disposition(disposition), note=note)
    scenarios = tuple(updated if s.id == scenario_id else s for s in project.scenarios)
    return _commit(project, op_id, scenarios=scenarios)


def add_cast(project: Project, stored: StoredCast, op_id: str | None = None) -> Project:
    if any(c.id == stored.id for c in project.cast_results):
        raise ConflictError(f"duplicate causal analysis id {stored.id!r}")
    return _commit(project, op_id, cast_results=project.cast_results + (stored,))


def add_note(project: Project, note: AnalystNote, op_id: str | None = None) -> Project:
    if any(n.id == note.id for n in project.notes):
        raise ConflictError(f"duplicate note id {note.id!r}")
    return _commit(project, op_id, notes=project.notes + (note,))


def next_id(prefix: str, existing: Sequence[str]) -> str:
    """Smallest ``<prefix><n>`` not in ``existing``; n starts at 1."""

    taken = set(existing)
    n = 1
    while f"{prefix}{n}" in taken:
        n += 1
    return f"{prefix}{n}"


# --- snapshot ingestion -----------------------------------------------------


def sniff_dataset(document: str) -> str:
    """Classify a snapshot document by its declared format markers."""

    stripped = document.lstrip()
    if stripped.startswith("{"):
        try:
            raw = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", context="snapshot") from exc
        dataset = raw.get("dataset") if isinstance(raw, dict) else None
        if dataset in (DATASET_CVE, DATASET_RECALLS, DATASET_MAUDE):
            return str(dataset)
        raise ParseError(
            f"unrecognized dataset marker {dataset!r}", context="snapshot"
        )
    head = stripped.splitlines()[0] if stripped else ""
    if stripped.startswith("Snapshot-Date:") or stripped.startswith("Advisory:"):
        return DATASET_ADVISORY
    if head.startswith("submission_number,"):
        return DATASET_DEVICES
    raise ParseError("unrecognized snapshot format", context="snapshot")


def count_snapshot_records(document: str, dataset: str) -> tuple[int, list[str]]:
    """Parse a snapshot document, returning record count and parser warnings."""

    if dataset == DATASET_CVE:
        records, warnings = ingest_cve_feed(document)
    elif dataset == DATASET_ADVISORY:
        records, warnings = ingest_icscert(document)
    elif dataset == DATASET_RECALLS:
        records, warnings = parse_recalls(document)
    elif dataset == DATASET_MAUDE:
        records, warnings = parse_maude(document)
    elif dataset == DATASET_DEVICES:
        records, warnings = parse_devices_csv(document)
    else:
        raise ValidationError(f"unknown dataset {dataset!r}")
    return len(records), warnings


@dataclass
class ProjectStore:
    """Single project persisted in one directory as plain text files."""

    directory: Path

    def __post_init__(self) -> None:
        self.directory = Path(self.directory)

    @property
    def project_path(self) -> Path:
        return self.directory / PROJECT_FILE

    @property
    def snapshot_dir(self) -> Path:
        return self.directory / SNAPSHOT_DIR

    def exists(self) -> bool:
        return self.project_path.is_file()

    def init(
        self,
        project_id: str,
        device_name: str,
        ml_location: str = "device",
        system_description: str = "",
    ) -> Project:
        if self.exists():
            raise ConflictError(f"project already exists at {self.project_path}")
        project = new_project(
            project_id, device_name, ml_location=ml_location,
            system_description=system_description,
        )
        self.directory.mkdir(parents=True, exist_ok=True)
        self.snapshot_dir.mkdir(exist_ok=True)
        self._write(project)
        return project

    def load(self) -> Project:
        if not self.exists():
            raise NotFoundError(f"no project file at {self.project_path}")
        try:
            raw = json.loads(self.project_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(
                f"invalid JSON: {exc.msg}",
                context=f"{self.project_path} line {exc.lineno}",
            ) from exc
        if not isinstance(raw, dict):
            raise ParseError("project document root must be an object", context=PROJECT_FILE)
        return project_from_dict(raw)

    def save(self, project: Project, expected_revision: int | None = None) -> None:
        """Persist; ``expected_revision`` guards against concurrent writers.

        The guard compares against the revision currently on disk, so a
        writer that loaded revision N and produced N+1 passes
        ``expected_revision=N`` and loses cleanly if someone else got there
        first.
        """

        if expected_revision is not None and self.exists():
            current = self.load().revision
            if current != expected_revision:
                raise ConflictError(
                    f"stale revision: expected {expected_revision}, found {current}"
                )
        self.directory.mkdir(parents=True, exist_ok=True)
        self._write(project)

    def _write(self, project: Project) -> None:
        text = serialize_project(project)
        tmp = self.project_path.with_suffix(".json.tmp")
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(self.project_path)

    def ingest_snapshot(
        self, project: Project, source: Path, op_id: str | None = None
    ) -> tuple[Project, SnapshotInfo, list[str]]:
        """Copy an evidence file into the project and record its provenance.

        Re-ingesting a file with unchanged content is a no-op for the
        snapshot list (the provenance entry already exists); the same name
        with different content is a conflict, never a silent overwrite.
        """

        source = Path(source)
        if not source.is_file():
            raise NotFoundError(f"snapshot file {source} not found")
        document = source.read_text(encoding="utf-8")
        dataset = sniff_dataset(document)
        records, warnings = count_snapshot_records(document, dataset)
        info = SnapshotInfo(
            file=source.name,
            dataset=dataset,
            declared_date=read_snapshot_date(document),
            records=records,
        )
        destination = self.snapshot_dir / source.name
        if destination.exists():
            if destination.read_text(encoding="utf-8") != document:
                raise ConflictError(
                    f"snapshot {source.name} already ingested with different content"
                )
            return project, info, warnings
        self.snapshot_dir.mkdir(parents=True, exist_ok=True)
        destination.write_text(document, encoding="utf-8")
        updated = _commit(project, op_id, snapshots=project.snapshots + (info,))
        return updated, info, warnings

    def read_snapshot(self, file_name: str) -> str:
        path = self.snapshot_dir / file_name
        if not path.is_file():
            raise NotFoundError(f"snapshot {file_name!r} not found in project")
        return path.read_text(encoding="utf-8")

    def vulnerability_records(self, project: Project) -> list[VulnerabilityRecord]:
        records: list[VulnerabilityRecord] = []
        for info in project.snapshots:
            document = self.read_snapshot(info.file)
            if info.dataset == DATASET_CVE:
                records.extend(ingest_cve_feed(document)[0])
            elif info.dataset == DATASET_ADVISORY:
                records.extend(ingest_icscert(document)[0])
        return records

    def vulnerability_index(self, project: Project) -> VulnerabilityIndex:
        return VulnerabilityIndex(self.vulnerability_records(project))

    def regulatory_data(self, project: Project) -> dict[str, list]:
        """Parsed regulatory snapshots keyed by dataset name."""

        out: dict[str, list] = {
            DATASET_RECALLS: [],
            DATASET_MAUDE: [],
            DATASET_DEVICES: [],
        }
        for info in project.snapshots:
            if info.dataset not in out:
                continue
            document = self.read_snapshot(info.file)
            if info.dataset == DATASET_RECALLS:
                out[info.dataset].extend(parse_recalls(document)[0])
            elif info.dataset == DATASET_MAUDE:
                out[info.dataset].extend(parse_maude(document)[0])
            else:
                out[info.dataset].extend(parse_devices_csv(document)[0])
        return out


# --- serialization ----------------------------------------------------------


def _require(raw: Mapping[str, object], field_name: str, where: str) -> object:
    if field_name not in raw:
        raise ParseError(f"missing field {field_name!r}", context=where)
    return raw[field_name]


def snapshot_info_to_dict(info: SnapshotInfo) -> dict[str, object]:
    return {
        "file": info.file,
        "dataset": info.dataset,
        "declared_date": info.declared_date,
        "records": info.records,
    }


def snapshot_info_from_dict(raw: Mapping[str, object]) -> SnapshotInfo:
    where = "snapshot"
    declared = _require(raw, "declared_date", where)
    try:
        return SnapshotInfo(
            file=str(_require(raw, "file", where)),
            dataset=str(_require(raw, "dataset", where)),
            declared_date=None if declared is None else str(declared),
            records=int(_require(raw, "records", where)),  # type: ignore[arg-type]
        )
    except (TypeError, ValueError, ValidationError) as exc:
        raise ParseError(str(exc), context=where) from exc


def stored_scenario_to_dict(stored: StoredScenario) -> dict[str, object]:
    return {
        "id": stored.id,
        "scenario": scenario_to_dict(stored.scenario),
        "disposition": stored.disposition.value,
        "note": stored.note,
    }


def stored_scenario_from_dict(raw: Mapping[str, object]) -> StoredScenario:
    where = "stored scenario"
    scenario = _require(raw, "scenario", where)
    if not isinstance(scenario, Mapping):
        raise ParseError("scenario must be an object", context=where)
    try:
        return StoredScenario(
            id=str(_require(raw, "id", where)),
            scenario=scenario_from_dict(scenario),
            disposition=Disposition(str(_require(raw, "disposition", where))),
            note=str(_require(raw, "note", where)),
        )
    except (ValueError, ValidationError) as exc:
        raise ParseError(str(exc), context=where) from exc


def stored_cast_to_dict(stored: StoredCast) -> dict[str, object]:
    return {"id": stored.id, "analysis": cast_to_dict(stored.analysis)}


def stored_cast_from_dict(raw: Mapping[str, object]) -> StoredCast:
    where = "stored causal analysis"
    analysis = _require(raw, "analysis", where)
    if not isinstance(analysis, Mapping):
        raise ParseError("analysis must be an object", context=where)
    try:
        return StoredCast(
            id=str(_require(raw, "id", where)),
            analysis=cast_from_dict(analysis),
        )
    except ValidationError as exc:
        raise ParseError(str(exc), context=where) from exc


def note_to_dict(note: AnalystNote) -> dict[str, object]:
    return {"id": note.id, "text": note.text, "element": note.element}


def note_from_dict(raw: Mapping[str, object]) -> AnalystNote:
    where = "note"
    try:
        return AnalystNote(
            id=str(_require(raw, "id", where)),
            text=str(_require(raw, "text", where)),
            element=str(_require(raw, "element", where)),
        )
    except ValidationError as exc:
        raise ParseError(str(exc), context=where) from exc


def project_to_dict(project: Project) -> dict[str, object]:
    return {
        "schema_version": project.schema_version,
        "id": project.id,
        "revision": project.revision,
        "system_description": project.system_description,
        "structure": structure_to_dict(project.structure),
        "losses": [loss_to_dict(l) for l in project.losses],
        "hazards": [hazard_to_dict(h) for h in project.hazards],
        "ucas": [uca_to_dict(u) for u in project.ucas],
        "profiles": [profile_to_dict(p) for p in project.profiles],
        "snapshots": [snapshot_info_to_dict(s) for s in project.snapshots],
        "attack_surface": (
            None if project.attack_surface is None else report_to_dict(project.attack_surface)
        ),
        "scenarios": [stored_scenario_to_dict(s) for s in project.scenarios],
        "cast": [stored_cast_to_dict(c) for c in project.cast_results],
        "notes": [note_to_dict(n) for n in project.notes],
        "applied_ops": list(project.applied_ops),
    }


def project_from_dict(raw: Mapping[str, object]) -> Project:
    where = "project"
    structure = _require(raw, "structure", where)
    if not isinstance(structure, Mapping):
        raise ParseError("structure must be an object", context=where)
    surface_raw = _require(raw, "attack_surface", where)
    if surface_raw is not None and not isinstance(surface_raw, Mapping):
        raise ParseError("attack_surface must be an object or null", context=where)
    lists: dict[str, list] = {}
    for name in ("losses", "hazards", "ucas", "profiles", "snapshots",
                 "scenarios", "cast", "notes", "applied_ops"):
        value = _require(raw, name, where)
        if not isinstance(value, list):
            raise ParseError(f"{name} must be a list", context=where)
        lists[name] = value
    try:
        return Project(
            schema_version=int(_require(raw, "schema_version", where)),  # type: ignore[arg-type]
            id=str(_require(raw, "id", where)),
            revision=int(_require(raw, "revision", where)),  # type: ignore[arg-type]
            system_description=str(_require(raw, "system_description", where)),
            structure=structure_from_dict(structure),
            losses=tuple(loss_from_dict(l) for l in lists["losses"]),
            hazards=tuple(hazard_from_dict(h) for h in lists["hazards"]),
            ucas=tuple(uca_from_dict(u) for u in lists["ucas"]),
            profiles=tuple(profile_from_dict(p) for p in lists["profiles"]),
            snapshots=tuple(snapshot_info_from_dict(s) for s in lists["snapshots"]),
            attack_surface=(
                None if surface_raw is None else report_from_dict(surface_raw)
            ),
            scenarios=tuple(stored_scenario_from_dict(s) for s in lists["scenarios"]),
            cast_results=tuple(stored_cast_from_dict(c) for c in lists["cast"]),
            notes=tuple(note_from_dict(n) for n in lists["notes"]),
            applied_ops=tuple(str(o) for o in lists["applied_ops"]),
        )
    except (TypeError, ValueError, ValidationError) as exc:
        raise ParseError(str(exc), context=where) from exc


def serialize_project(project: Project) -> str:
    """Canonical text form: sorted keys, two-space indent, trailing newline."""

    return json.dumps(project_to_dict(project), indent=2, sort_keys=True) + "\n"


def deserialize_project(document: str) -> Project:
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"invalid JSON: {exc.msg}", context=f"line {exc.lineno} column {exc.colno}"
        ) from exc
    if not isinstance(raw, dict):
        raise ParseError("document root must be an object", context="document")
    return project_from_dict(raw)


def load_project_schema() -> dict:
    """Published JSON Schema describing the project file format."""

    text = resources.files("meddevsec").joinpath("schemas/project.schema.json").read_text("utf-8")
    return json.loads(text)
