"""Tests for the HTTP service: endpoints, concurrency, degradation."""

from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from meddevsec.project import ProjectStore
from meddevsec.service import create_app

from .dnav import PROFILE_RESPONSES, build_dnav_project

FIXTURES = Path(__file__).parent / "fixtures"

SCENARIO_BODY = {
    "entry_point": 1,
    "attack": "model-inversion-recovery",
    "hazard": "H1",
    "uca": "U1",
    "fallback": True,
}


@pytest.fixture()
def dnav(tmp_path):
    directory = tmp_path / "dnav"
    store, project = build_dnav_project(directory)
    return TestClient(create_app(store)), store


@pytest.fixture()
def client(dnav):
    return dnav[0]


@pytest.fixture()
def empty_client(tmp_path):
    return TestClient(create_app(tmp_path / "void"))


def revision_of(client) -> int:
    return client.get("/projects").json()[0]["revision"]


class TestProjects:
    def test_empty_store_lists_nothing(self, empty_client):
        response = empty_client.get("/projects")
        assert response.status_code == 200
        assert response.json() == []

    def test_lists_single_project(self, client):
        response = client.get("/projects")
        assert response.status_code == 200
        rows = response.json()
        assert len(rows) == 1
        assert rows[0]["id"] == "dnav"
        assert rows[0]["device"] == "d-Nav"

    def test_create_project(self, empty_client):
        response = empty_client.post(
            "/projects",
            json={"id": "fresh", "device": "Pump", "ml_location": "device"},
        )
        assert response.status_code == 201
        assert response.json()["id"] == "fresh"
        assert empty_client.get("/projects").json()[0]["id"] == "fresh"

    def test_create_twice_conflicts(self, empty_client):
        empty_client.post("/projects", json={"id": "fresh", "device": "Pump"})
        response = empty_client.post("/projects", json={"id": "other", "device": "Pump"})
        assert response.status_code == 409

    def test_missing_device_field(self, empty_client):
        assert empty_client.post("/projects", json={"id": "x"}).status_code == 422


class TestStructure:
    def test_read_structure(self, client):
        response = client.get("/projects/dnav/structure")
        assert response.status_code == 200
        raw = response.json()
        assert len(raw["structure"]["components"]) == 8
        assert raw["findings"] == []

    def test_unknown_project_id(self, client):
        assert client.get("/projects/ghost/structure").status_code == 404

    def test_apply_operations(self, client):
        revision = revision_of(client)
        response = client.put(
            "/projects/dnav/structure",
            json={
                "revision": revision,
                "operations": [
                    {
                        "op": "add_component",
                        "component": {
                            "id": "vent",
                            "name": "Backup ventilator",
                            "kind": "Actuator",
                        },
                    },
                    {"op": "rename", "component_id": "vent", "new_name": "Ventilator"},
                ],
            },
        )
        assert response.status_code == 200
        raw = response.json()
        assert raw["revision"] == revision + 1
        names = {c["id"]: c["name"] for c in raw["structure"]["components"]}
        assert names["vent"] == "Ventilator"

    def test_full_replacement(self, client):
        snapshot = client.get("/projects/dnav/structure").json()
        structure = snapshot["structure"]
        structure["device_name"] = "d-Nav mk2"
        response = client.put(
            "/projects/dnav/structure",
            json={"revision": snapshot["revision"], "structure": structure},
        )
        assert response.status_code == 200
        assert response.json()["structure"]["device_name"] == "d-Nav mk2"

    def test_stale_revision_conflicts(self, client):
        revision = revision_of(client)
        body = {
            "revision": revision,
            "operations": [
                {"op": "rename", "component_id": "sensor", "new_name": "Meter"}
            ],
        }
        assert client.put("/projects/dnav/structure", json=body).status_code == 200
        response = client.put("/projects/dnav/structure", json=body)
        assert response.status_code == 409
        assert "stale revision" in response.json()["detail"]

    def test_op_id_replay_no_double_apply(self, client):
        revision = revision_of(client)
        body = {
            "revision": revision,
            "op_id": "edit-1",
            "operations": [
                {"op": "remove_link", "link_id": "physician_to_interface"}
            ],
        }
        first = client.put("/projects/dnav/structure", json=body)
        assert first.status_code == 200
        assert first.json()["revision"] == revision + 1
        replay = client.put("/projects/dnav/structure", json=body)
        assert replay.status_code == 200
        assert replay.json()["revision"] == revision + 1

    def test_body_without_payload(self, client):
        response = client.put(
            "/projects/dnav/structure", json={"revision": revision_of(client)}
        )
        assert response.status_code == 422

    def test_malformed_operation(self, client):
        response = client.put(
            "/projects/dnav/structure",
            json={"revision": revision_of(client), "operations": [{"op": "explode"}]},
        )
        assert response.status_code == 422

    def test_operation_on_unknown_component(self, client):
        response = client.put(
            "/projects/dnav/structure",
            json={
                "revision": revision_of(client),
                "operations": [
                    {"op": "rename", "component_id": "ghost", "new_name": "X"}
                ],
            },
        )
        assert response.status_code in (404, 422)


class TestProfiles:
    def test_list_profiles(self, client):
        raw = client.get("/profiles").json()
        assert sorted(p["component"] for p in raw["profiles"]) == [
            "interface", "network", "sensor",
        ]

    def test_put_profile(self, client):
        revision = revision_of(client)
        response = client.put(
            "/profiles/actuator",
            json={"revision": revision, "responses": PROFILE_RESPONSES["sensor"]},
        )
        assert response.status_code == 200
        raw = response.json()
        assert raw["revision"] == revision + 1
        assert raw["profile"]["component"] == "actuator"

    def test_incomplete_questionnaire_names_missing_groups(self, client):
        response = client.put(
            "/profiles/actuator",
            json={
                "revision": revision_of(client),
                "responses": {"communication": "unknown"},
            },
        )
        assert response.status_code == 422
        missing = response.json()["missing_groups"]
        assert "human_interaction" in missing
        assert "dependencies" in missing

    def test_unknown_component_rejected(self, client):
        response = client.put(
            "/profiles/ghost",
            json={
                "revision": revision_of(client),
                "responses": PROFILE_RESPONSES["sensor"],
            },
        )
        assert response.status_code == 422

    def test_profile_stale_revision(self, client):
        response = client.put(
            "/profiles/actuator",
            json={"revision": 999, "responses": PROFILE_RESPONSES["sensor"]},
        )
        assert response.status_code == 409


class TestVulnSearch:
    def test_android_search_ranks_kernel_bug_first(self, client):
        response = client.post("/vulns/search", json={"keywords": ["android"]})
        assert response.status_code == 200
        matches = response.json()["matches"]
        assert matches
        assert matches[0]["record"]["id"] == "CVE-2024-43093"

    def test_missing_keywords_field(self, client):
        assert client.post("/vulns/search", json={}).status_code == 422

    def test_keywords_must_be_strings(self, client):
        response = client.post("/vulns/search", json={"keywords": [1, 2]})
        assert response.status_code == 422

    def test_empty_index_returns_no_matches(self, empty_client):
        empty_client.post("/projects", json={"id": "fresh", "device": "Pump"})
        response = empty_client.post("/vulns/search", json={"keywords": ["android"]})
        assert response.status_code == 200
        assert response.json()["matches"] == []


class TestSurface:
    def test_get_stored_surface(self, client):
        response = client.get("/surface")
        assert response.status_code == 200
        surface = response.json()["surface"]
        assert len(surface["entry_points"]) == 16
        top = surface["entry_points"][0]
        assert top["component"] == "network"
        assert top["vulnerability"]["id"] == "CVE-2023-35836"

    def test_get_before_compute_is_404(self, empty_client):
        empty_client.post("/projects", json={"id": "fresh", "device": "Pump"})
        assert empty_client.get("/surface").status_code == 404

    def test_recompute_after_profile_change(self, client):
        revision = revision_of(client)
        response = client.post("/surface", json={"revision": revision})
        assert response.status_code == 200
        assert response.json()["revision"] == revision + 1

    def test_compute_stale_revision(self, client):
        assert client.post("/surface", json={"revision": 999}).status_code == 409


class TestScenarios:
    def test_create_fallback_scenario(self, client):
        revision = revision_of(client)
        response = client.post(
            "/scenarios", json={"revision": revision, **SCENARIO_BODY}
        )
        assert response.status_code == 201
        raw = response.json()
        assert raw["revision"] == revision + 1
        stored = raw["stored"]
        assert stored["id"] == "scn1"
        assert stored["disposition"] == "Open"
        assert len(stored["scenario"]["steps"]) == 9
        assert stored["scenario"]["provenance"] == "Fallback"
        listing = client.get("/scenarios").json()
        assert [s["id"] for s in listing["scenarios"]] == ["scn1"]

    def test_create_stale_revision(self, client):
        response = client.post("/scenarios", json={"revision": 999, **SCENARIO_BODY})
        assert response.status_code == 409

    def test_create_unknown_hazard(self, client):
        body = {**SCENARIO_BODY, "hazard": "H9", "revision": revision_of(client)}
        assert client.post("/scenarios", json=body).status_code == 404

    def test_create_entry_point_out_of_range(self, client):
        body = {**SCENARIO_BODY, "entry_point": 99, "revision": revision_of(client)}
        assert client.post("/scenarios", json=body).status_code == 404

    def test_create_without_surface(self, empty_client):
        empty_client.post("/projects", json={"id": "fresh", "device": "Pump"})
        body = {**SCENARIO_BODY, "revision": 0}
        assert empty_client.post("/scenarios", json=body).status_code == 404

    def test_replay_returns_stored_scenario(self, client):
        body = {
            "revision": revision_of(client),
            "op_id": "gen-1",
            "id": "scn-alpha",
            **SCENARIO_BODY,
        }
        first = client.post("/scenarios", json=body)
        assert first.status_code == 201
        replay = client.post("/scenarios", json=body)
        assert replay.status_code == 200
        assert replay.json()["stored"]["id"] == "scn-alpha"

    def test_patch_disposition(self, client):
        revision = revision_of(client)
        client.post("/scenarios", json={"revision": revision, **SCENARIO_BODY})
        response = client.patch(
            "/scenarios/scn1",
            json={
                "revision": revision + 1,
                "disposition": "Mitigated",
                "note": "router patched",
            },
        )
        assert response.status_code == 200
        stored = response.json()["stored"]
        assert stored["disposition"] == "Mitigated"
        assert stored["note"] == "router patched"

    def test_patch_stale_revision_conflicts(self, client):
        revision = revision_of(client)
        client.post("/scenarios", json={"revision": revision, **SCENARIO_BODY})
        response = client.patch(
            "/scenarios/scn1",
            json={"revision": revision, "disposition": "Mitigated"},
        )
        assert response.status_code == 409

    def test_patch_unknown_scenario(self, client):
        response = client.patch(
            "/scenarios/ghost",
            json={"revision": revision_of(client), "disposition": "Mitigated"},
        )
        assert response.status_code == 404

    def test_patch_invalid_disposition(self, client):
        revision = revision_of(client)
        client.post("/scenarios", json={"revision": revision, **SCENARIO_BODY})
        response = client.patch(
            "/scenarios/scn1",
            json={"revision": revision + 1, "disposition": "Shrugged"},
        )
        assert response.status_code == 422


class TestCast:
    def test_create_analysis(self, client):
        revision = revision_of(client)
        response = client.post(
            "/cast",
            json={
                "revision": revision,
                "narrative": "The pump malfunctioned. No alarm reached the app.",
            },
        )
        assert response.status_code == 201
        stored = response.json()["stored"]
        assert stored["id"] == "cast1"
        assert stored["analysis"]["provenance"] == "Fallback"
        assert len(stored["analysis"]["segments"]) == 2
        assert client.get("/cast").json()["analyses"][0]["id"] == "cast1"

    def test_empty_narrative_rejected(self, client):
        response = client.post(
            "/cast", json={"revision": revision_of(client), "narrative": "   "}
        )
        assert response.status_code == 422

    def test_cast_stale_revision(self, client):
        response = client.post(
            "/cast", json={"revision": 999, "narrative": "The pump malfunctioned."}
        )
        assert response.status_code == 409


class TestStatsAndReport:
    @pytest.fixture()
    def stats_client(self, dnav):
        client, store = dnav
        project = store.load()
        for name in ("fda_maude_small.json", "fda_devices.csv"):
            project, _, _ = store.ingest_snapshot(project, FIXTURES / name)
        store.save(project)
        return client

    def test_event_type_stats(self, stats_client):
        response = stats_client.get("/stats")
        assert response.status_code == 200
        table = response.json()["table"]
        assert table["group_by"] == "EventType"
        assert table["total"] == 8

    def test_panel_grouping(self, stats_client):
        response = stats_client.get("/stats", params={"group_by": "panel"})
        assert response.status_code == 200
        assert response.json()["table"]["group_by"] == "Panel"

    def test_unknown_group_by(self, client):
        assert client.get("/stats", params={"group_by": "phase"}).status_code == 422

    def test_stats_lists_snapshot_provenance(self, stats_client):
        raw = stats_client.get("/stats").json()
        files = [s["file"] for s in raw["snapshots"]]
        assert "fda_maude_small.json" in files

    def test_text_report(self, client):
        response = client.get("/report", params={"format": "text"})
        assert response.status_code == 200
        assert response.headers["content-type"].startswith("text/plain")
        assert "Security assessment report: d-Nav" in response.text

    def test_structured_report(self, client):
        response = client.get("/report")
        assert response.status_code == 200
        raw = response.json()
        assert raw["executive_summary"]["device"] == "d-Nav"
        assert len(raw["attack_surface"]["rows"]) == 16

    def test_unknown_report_format(self, client):
        assert client.get("/report", params={"format": "pdf"}).status_code == 422


class TestPersistenceAcrossApps:
    def test_mutations_survive_app_restart(self, tmp_path):
        directory = tmp_path / "dnav"
        store, _ = build_dnav_project(directory)
        first = TestClient(create_app(store))
        revision = revision_of(first)
        first.post("/scenarios", json={"revision": revision, **SCENARIO_BODY})
        second = TestClient(create_app(ProjectStore(directory)))
        listing = second.get("/scenarios").json()
        assert [s["id"] for s in listing["scenarios"]] == ["scn1"]
