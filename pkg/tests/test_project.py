"""Tests for project state, mutation helpers, store, and serialization."""

import json
import random
from datetime import date
from pathlib import Path

import pytest

from meddevsec.cast import analyze_narrative
from meddevsec.errors import (
    ConflictError,
    NotFoundError,
    ParseError,
    ValidationError,
)
from meddevsec.inventory import compile_profile, load_attack_kb
from meddevsec.model import (
    Component,
    ComponentKind,
    ControlStructure,
    Hazard,
    Link,
    LinkKind,
    Loss,
    UCAGuideword,
    UnsafeControlAction,
    new_from_template,
)
from meddevsec.project import (
    APPLIED_OPS_WINDOW,
    DATASET_ADVISORY,
    DATASET_CVE,
    DATASET_DEVICES,
    DATASET_MAUDE,
    DATASET_RECALLS,
    PROJECT_SCHEMA_VERSION,
    AnalystNote,
    Project,
    ProjectStore,
    SnapshotInfo,
    StoredCast,
    StoredScenario,
    add_cast,
    add_note,
    add_scenario,
    count_snapshot_records,
    deserialize_project,
    new_project,
    next_id,
    project_from_dict,
    project_to_dict,
    serialize_project,
    set_disposition,
    sniff_dataset,
    upsert_profile,
    with_safety,
    with_structure,
    with_surface,
)
from meddevsec.scenario import (
    Disposition,
    Provenance,
    ScenarioRequest,
    generate_fallback,
)
from meddevsec.surface import enumerate_entry_points
from meddevsec.vulnintel import (
    Exploitability,
    Source,
    VulnerabilityIndex,
    VulnerabilityRecord,
)

from .randgen import random_project

FIXTURES = Path(__file__).parent / "fixtures"

LOSSES = (
    Loss("l1", "Patient suffers a severe hypoglycemic episode."),
    Loss("l2", "Therapy is interrupted for more than a day."),
)
HAZARDS = (
    Hazard("h1", "Insulin dose exceeds what measured glucose justifies.", ("l1",)),
)
UCAS = (
    UnsafeControlAction(
        "u1",
        "deliver_dose",
        UCAGuideword.ProvidedCausesHazard,
        ("h1",),
        "Dose command issued from manipulated readings.",
    ),
)

ROUTER_VULN = VulnerabilityRecord(
    id="CVE-2024-1111",
    source=Source.CVE,
    summary="A router allows remote attackers to execute commands.",
    affected_terms=("router",),
    severity=9.8,
    exploitability=Exploitability.Remote,
    public_exploit=True,
    published=date(2024, 3, 5),
)


def network_profile(component="network"):
    return compile_profile(
        component,
        {
            "human_interaction": "unknown",
            "communication": {"protocol": "wi-fi"},
            "em_susceptibility": "unknown",
            "dependencies": {"hardware": [{"name": "router"}]},
        },
    )


def base_project(**overrides):
    fields = dict(id="demo", structure=new_from_template("d-Nav", ml_location="cloud"))
    fields.update(overrides)
    return Project(**fields)


def tiny_structure():
    return ControlStructure(
        device_name="Tiny",
        components=(
            Component("a1", "Alpha", ComponentKind.MLController),
            Component("b1", "Beta", ComponentKind.Actuator),
        ),
        links=(Link("k1", "a1", "b1", LinkKind.ControlAction),),
    )


def template_scenario():
    request = ScenarioRequest(
        system_description="A cloud dosing service for a connected meter.",
        data_flow=("sensor", "network", "cloud", "ml_controller", "actuator"),
        ml_attack=load_attack_kb()[0],
        target_component="network",
        target_technology="router",
        vulnerability=ROUTER_VULN,
        hazard=HAZARDS[0],
        uca=UCAS[0],
    )
    return generate_fallback(request)


class TestProjectInvariants:
    def test_minimal_project_constructs(self):
        project = base_project()
        assert project.revision == 0
        assert project.schema_version == PROJECT_SCHEMA_VERSION
        assert project.scenarios == ()
        assert project.attack_surface is None

    def test_collections_coerced_to_tuples(self):
        project = base_project(losses=[LOSSES[0]], notes=[AnalystNote("n1", "ok")])
        assert isinstance(project.losses, tuple)
        assert isinstance(project.notes, tuple)

    def test_bad_project_id_rejected(self):
        for bad in ("", "Demo", "has space", "-lead"):
            with pytest.raises(ValidationError):
                base_project(id=bad)

    def test_negative_revision_rejected(self):
        with pytest.raises(ValidationError):
            base_project(revision=-1)

    def test_wrong_schema_version_rejected(self):
        with pytest.raises(ValidationError):
            base_project(schema_version=99)

    def test_hazard_unknown_loss_rejected(self):
        with pytest.raises(ValidationError):
            base_project(hazards=HAZARDS)

    def test_uca_unknown_hazard_rejected(self):
        with pytest.raises(ValidationError):
            base_project(losses=LOSSES, ucas=UCAS)

    def test_linked_safety_chain_accepted(self):
        project = base_project(losses=LOSSES, hazards=HAZARDS, ucas=UCAS)
        assert project.ucas[0].hazards == ("h1",)

    def test_profile_unknown_component_rejected(self):
        with pytest.raises(ValidationError):
            base_project(profiles=(network_profile("nonexistent"),))

    def test_duplicate_profile_rejected(self):
        with pytest.raises(ValidationError):
            base_project(profiles=(network_profile(), network_profile()))

    def test_duplicate_loss_id_rejected(self):
        with pytest.raises(ValidationError):
            base_project(losses=(LOSSES[0], LOSSES[0]))

    def test_duplicate_snapshot_file_rejected(self):
        snap = SnapshotInfo("feed.json", DATASET_CVE, "2025-01-15", 30)
        with pytest.raises(ValidationError):
            base_project(snapshots=(snap, snap))

    def test_scenario_flow_must_reference_structure(self):
        stored = StoredScenario(id="scn1", scenario=template_scenario())
        with pytest.raises(ValidationError):
            Project(id="demo", structure=tiny_structure(), scenarios=(stored,))

    def test_cast_loops_must_reference_structure(self):
        analysis = analyze_narrative(
            "The pump malfunctioned.", new_from_template("d-Nav", ml_location="cloud")
        )
        assert any(a.assigned for a in analysis.assignments)
        stored = StoredCast(id="cast1", analysis=analysis)
        with pytest.raises(ValidationError):
            Project(id="demo", structure=tiny_structure(), cast_results=(stored,))

    def test_surface_must_reference_structure(self):
        structure = new_from_template("d-Nav", ml_location="cloud")
        report = enumerate_entry_points(
            structure, (network_profile(),), VulnerabilityIndex([ROUTER_VULN])
        )
        assert report.entry_points
        with pytest.raises(ValidationError):
            Project(id="demo", structure=tiny_structure(), attack_surface=report)

    def test_note_unknown_element_rejected(self):
        note = AnalystNote("n1", "dangling", element="ghost9")
        with pytest.raises(ValidationError):
            base_project(notes=(note,))

    def test_note_element_may_cite_any_known_id(self):
        project = base_project(
            losses=LOSSES,
            notes=(
                AnalystNote("n1", "about a component", element="network"),
                AnalystNote("n2", "about a loss", element="l2"),
                AnalystNote("n3", "unanchored"),
            ),
        )
        assert len(project.notes) == 3

    def test_applied_ops_window(self):
        ops = tuple(f"op{i}" for i in range(APPLIED_OPS_WINDOW + 10))
        project = base_project(applied_ops=ops)
        assert len(project.applied_ops) == APPLIED_OPS_WINDOW
        assert project.applied_ops[0] == "op10"
        assert project.applied_ops[-1] == ops[-1]

    def test_accessors(self):
        stored = StoredScenario(id="scn1", scenario=template_scenario())
        project = base_project(scenarios=(stored,), profiles=(network_profile(),))
        assert project.scenario("scn1") is stored
        assert project.profile("network").component == "network"
        with pytest.raises(NotFoundError):
            project.scenario("nope")
        with pytest.raises(NotFoundError):
            project.profile("sensor")
        with pytest.raises(NotFoundError):
            project.cast_result("nope")


class TestComponentParts:
    def test_snapshot_info_rejects_unknown_dataset(self):
        with pytest.raises(ValidationError):
            SnapshotInfo("x.json", "mystery_feed", None, 1)

    def test_snapshot_info_rejects_negative_count(self):
        with pytest.raises(ValidationError):
            SnapshotInfo("x.json", DATASET_CVE, None, -1)

    def test_stored_scenario_id_slug(self):
        with pytest.raises(ValidationError):
            StoredScenario(id="Bad Id", scenario=template_scenario())

    def test_stored_scenario_coerces_disposition(self):
        stored = StoredScenario(
            id="scn1", scenario=template_scenario(), disposition="Mitigated"
        )
        assert stored.disposition is Disposition.Mitigated

    def test_note_requires_text(self):
        with pytest.raises(ValidationError):
            AnalystNote("n1", "   ")


class TestMutationHelpers:
    def test_with_structure_bumps_revision(self):
        project = base_project()
        updated = with_structure(project, tiny_structure())
        assert updated.revision == 1
        assert updated.structure.device_name == "Tiny"
        assert project.revision == 0

    def test_op_id_recorded_and_deduplicated(self):
        project = base_project()
        first = with_safety(project, losses=LOSSES, op_id="op-a")
        assert first.revision == 1
        assert "op-a" in first.applied_ops
        second = with_safety(first, losses=(), op_id="op-a")
        assert second is first

    def test_blank_op_id_rejected(self):
        with pytest.raises(ValidationError):
            with_safety(base_project(), losses=LOSSES, op_id="  ")

    def test_with_safety_requires_a_field(self):
        with pytest.raises(ValidationError):
            with_safety(base_project())

    def test_with_safety_checks_integrity(self):
        with pytest.raises(ValidationError):
            with_safety(base_project(), hazards=HAZARDS)

    def test_upsert_profile_replaces(self):
        project = upsert_profile(base_project(), network_profile())
        assert project.profile("network").communication.protocol == "wi-fi"
        changed = compile_profile(
            "network",
            {
                "human_interaction": "unknown",
                "communication": {"protocol": "zigbee"},
                "em_susceptibility": "unknown",
                "dependencies": "unknown",
            },
        )
        updated = upsert_profile(project, changed)
        assert len(updated.profiles) == 1
        assert updated.profile("network").communication.protocol == "zigbee"
        assert updated.revision == 2

    def test_add_scenario_and_disposition(self):
        stored = StoredScenario(id="scn1", scenario=template_scenario())
        project = add_scenario(base_project(), stored)
        assert project.scenario("scn1").disposition is Disposition.Open
        triaged = set_disposition(project, "scn1", Disposition.Rejected, note="dup")
        assert triaged.scenario("scn1").disposition is Disposition.Rejected
        assert triaged.scenario("scn1").note == "dup"
        assert triaged.revision == 2

    def test_add_scenario_duplicate_id(self):
        stored = StoredScenario(id="scn1", scenario=template_scenario())
        project = add_scenario(base_project(), stored)
        with pytest.raises(ConflictError):
            add_scenario(project, stored)

    def test_set_disposition_unknown_scenario(self):
        with pytest.raises(NotFoundError):
            set_disposition(base_project(), "scn9", Disposition.Mitigated)

    def test_add_cast_and_note_dedup(self):
        structure = new_from_template("d-Nav", ml_location="cloud")
        analysis = analyze_narrative("The pump malfunctioned.", structure)
        project = add_cast(base_project(), StoredCast(id="cast1", analysis=analysis))
        assert project.cast_result("cast1").analysis.provenance is Provenance.Fallback
        with pytest.raises(ConflictError):
            add_cast(project, StoredCast(id="cast1", analysis=analysis))
        noted = add_note(project, AnalystNote("n1", "check this", element="cast1"))
        assert noted.notes[0].element == "cast1"
        with pytest.raises(ConflictError):
            add_note(noted, AnalystNote("n1", "again"))

    def test_with_surface(self):
        structure = new_from_template("d-Nav", ml_location="cloud")
        report = enumerate_entry_points(
            structure, (network_profile(),), VulnerabilityIndex([ROUTER_VULN])
        )
        project = with_surface(base_project(), report)
        assert project.attack_surface is report
        assert project.revision == 1

    def test_next_id(self):
        assert next_id("scn", []) == "scn1"
        assert next_id("scn", ["scn1", "scn2"]) == "scn3"
        assert next_id("scn", ["scn2"]) == "scn1"


class TestSniffing:
    def test_fixture_datasets(self):
        expectations = {
            "cve_feed_main.json": (DATASET_CVE, 30),
            "icscert_small.txt": (DATASET_ADVISORY, 3),
            "fda_recalls.json": (DATASET_RECALLS, 8),
            "fda_maude_small.json": (DATASET_MAUDE, 8),
            "fda_devices.csv": (DATASET_DEVICES, 20),
        }
        for name, (dataset, count) in expectations.items():
            document = (FIXTURES / name).read_text(encoding="utf-8")
            assert sniff_dataset(document) == dataset
            records, _ = count_snapshot_records(document, dataset)
            assert records == count

    def test_unknown_json_dataset(self):
        with pytest.raises(ParseError):
            sniff_dataset('{"dataset": "mystery", "records": []}')

    def test_invalid_json(self):
        with pytest.raises(ParseError):
            sniff_dataset("{not json")

    def test_unrecognized_text(self):
        with pytest.raises(ParseError):
            sniff_dataset("hello world\nsecond line\n")


class TestProjectStore:
    def test_init_creates_layout(self, tmp_path):
        store = ProjectStore(tmp_path / "proj")
        project = store.init("demo", "d-Nav", ml_location="cloud")
        assert project.revision == 0
        assert store.project_path.is_file()
        assert store.snapshot_dir.is_dir()
        assert store.load() == project

    def test_init_twice_conflicts(self, tmp_path):
        store = ProjectStore(tmp_path)
        store.init("demo", "d-Nav")
        with pytest.raises(ConflictError):
            store.init("demo", "d-Nav")

    def test_load_missing(self, tmp_path):
        with pytest.raises(NotFoundError):
            ProjectStore(tmp_path / "void").load()

    def test_load_corrupt_json(self, tmp_path):
        store = ProjectStore(tmp_path)
        store.init("demo", "d-Nav")
        store.project_path.write_text("{broken", encoding="utf-8")
        with pytest.raises(ParseError):
            store.load()

    def test_save_revision_guard(self, tmp_path):
        store = ProjectStore(tmp_path)
        project = store.init("demo", "d-Nav")
        updated = with_safety(project, losses=LOSSES)
        store.save(updated, expected_revision=0)
        assert store.load().revision == 1
        stale = with_safety(project, losses=(LOSSES[1],))
        with pytest.raises(ConflictError):
            store.save(stale, expected_revision=0)

    def test_save_leaves_no_temp_file(self, tmp_path):
        store = ProjectStore(tmp_path)
        store.init("demo", "d-Nav")
        leftovers = [p.name for p in tmp_path.iterdir() if p.suffix == ".tmp"]
        assert leftovers == []

    def test_ingest_snapshot(self, tmp_path):
        store = ProjectStore(tmp_path)
        project = store.init("demo", "d-Nav", ml_location="cloud")
        updated, info, warnings = store.ingest_snapshot(
            project, FIXTURES / "cve_feed_main.json"
        )
        assert info.dataset == DATASET_CVE
        assert info.declared_date == "2025-01-15"
        assert info.records == 30
        assert warnings == []
        assert updated.revision == 1
        assert updated.snapshots == (info,)
        assert (store.snapshot_dir / "cve_feed_main.json").is_file()

    def test_reingest_same_content_is_noop(self, tmp_path):
        store = ProjectStore(tmp_path)
        project = store.init("demo", "d-Nav")
        updated, info, _ = store.ingest_snapshot(project, FIXTURES / "fda_recalls.json")
        again, info2, _ = store.ingest_snapshot(updated, FIXTURES / "fda_recalls.json")
        assert again is updated
        assert info2 == info

    def test_reingest_changed_content_conflicts(self, tmp_path):
        store = ProjectStore(tmp_path)
        project = store.init("demo", "d-Nav")
        project, _, _ = store.ingest_snapshot(project, FIXTURES / "fda_recalls.json")
        fake = tmp_path / "fda_recalls.json"
        fake.write_text(
            '{"dataset": "fda_recalls", "snapshot_date": "2029-01-01", "records": []}',
            encoding="utf-8",
        )
        with pytest.raises(ConflictError):
            store.ingest_snapshot(project, fake)

    def test_ingest_missing_file(self, tmp_path):
        store = ProjectStore(tmp_path)
        project = store.init("demo", "d-Nav")
        with pytest.raises(NotFoundError):
            store.ingest_snapshot(project, tmp_path / "ghost.json")

    def test_vulnerability_index_rebuilt_from_snapshots(self, tmp_path):
        store = ProjectStore(tmp_path)
        project = store.init("demo", "d-Nav", ml_location="cloud")
        project, _, _ = store.ingest_snapshot(project, FIXTURES / "cve_feed_main.json")
        project, _, _ = store.ingest_snapshot(project, FIXTURES / "icscert_small.txt")
        index = store.vulnerability_index(project)
        assert len(index.records()) == 33
        hits = index.search(["android"])
        assert hits
        assert hits[0].record.id == "CVE-2024-43093"

    def test_regulatory_data_rebuilt_from_snapshots(self, tmp_path):
        store = ProjectStore(tmp_path)
        project = store.init("demo", "d-Nav")
        for name in ("fda_recalls.json", "fda_maude_small.json", "fda_devices.csv"):
            project, _, _ = store.ingest_snapshot(project, FIXTURES / name)
        data = store.regulatory_data(project)
        assert len(data[DATASET_RECALLS]) == 8
        assert len(data[DATASET_MAUDE]) == 8
        assert len(data[DATASET_DEVICES]) == 20

    def test_read_snapshot_missing(self, tmp_path):
        store = ProjectStore(tmp_path)
        store.init("demo", "d-Nav")
        with pytest.raises(NotFoundError):
            store.read_snapshot("ghost.json")


class TestSerialization:
    def full_project(self):
        structure = new_from_template("d-Nav", ml_location="cloud")
        project = Project(
            id="demo",
            structure=structure,
            system_description="A cloud dosing service.",
            losses=LOSSES,
            hazards=HAZARDS,
            ucas=UCAS,
            profiles=(network_profile(),),
            snapshots=(SnapshotInfo("feed.json", DATASET_CVE, "2025-01-15", 30),),
            attack_surface=enumerate_entry_points(
                structure, (network_profile(),), VulnerabilityIndex([ROUTER_VULN])
            ),
            scenarios=(
                StoredScenario(
                    id="scn1",
                    scenario=template_scenario(),
                    disposition=Disposition.Mitigated,
                    note="firewalled",
                ),
            ),
            cast_results=(
                StoredCast(
                    id="cast1",
                    analysis=analyze_narrative("The pump malfunctioned.", structure),
                ),
            ),
            notes=(AnalystNote("n1", "watch the router", element="network"),),
            applied_ops=("op-a", "op-b"),
            revision=7,
        )
        return project

    def test_round_trip_identity(self):
        project = self.full_project()
        assert project_from_dict(project_to_dict(project)) == project

    def test_serialize_deterministic(self):
        project = self.full_project()
        assert serialize_project(project) == serialize_project(project)
        assert serialize_project(project).endswith("\n")

    def test_round_trip_through_text(self):
        project = self.full_project()
        assert deserialize_project(serialize_project(project)) == project

    def test_random_round_trip_100(self):
        rng = random.Random(20260814)
        for i in range(100):
            project = random_project(rng, f"proj-{i:03d}")
            document = serialize_project(project)
            restored = deserialize_project(document)
            assert restored == project
            assert serialize_project(restored) == document

    def test_missing_fields_rejected(self):
        raw = project_to_dict(self.full_project())
        for field_name in sorted(raw):
            broken = dict(raw)
            del broken[field_name]
            with pytest.raises(ParseError):
                project_from_dict(broken)

    def test_non_object_root(self):
        with pytest.raises(ParseError):
            deserialize_project("[1, 2]\n")

    def test_invalid_json_document(self):
        with pytest.raises(ParseError):
            deserialize_project("{nope")

    def test_integrity_violation_surfaces_as_parse_error(self):
        raw = project_to_dict(self.full_project())
        raw["hazards"][0]["linked_losses"] = ["l9"]
        with pytest.raises(ParseError):
            project_from_dict(raw)

    def test_unsupported_schema_version(self):
        raw = project_to_dict(self.full_project())
        raw["schema_version"] = 99
        with pytest.raises(ParseError):
            project_from_dict(raw)

    def test_wrong_type_rejected(self):
        raw = project_to_dict(self.full_project())
        raw["losses"] = "not a list"
        with pytest.raises(ParseError):
            project_from_dict(raw)

    def test_new_project_serializes_compactly(self):
        project = new_project("demo", "d-Nav")
        raw = json.loads(serialize_project(project))
        assert raw["schema_version"] == PROJECT_SCHEMA_VERSION
        assert raw["revision"] == 0
        assert raw["attack_surface"] is None
        assert raw["scenarios"] == []
