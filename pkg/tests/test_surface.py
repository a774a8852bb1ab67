"""Attack-surface enumeration: frozen template expectations, then randomized
equality with the brute-force triple-loop oracle."""

from __future__ import annotations

import json
import random
from datetime import date
from functools import cmp_to_key
from pathlib import Path

import pytest

from meddevsec import model
from meddevsec.errors import NotFoundError, ValidationError
from meddevsec.inventory import compile_profile, derive_search_keywords
from meddevsec.model import Component, ComponentKind, ControlStructure, Link, LinkKind
from meddevsec.surface import (
    AttackSurfaceReport,
    EntryPoint,
    enumerate_entry_points,
    format_surface_table,
    inference_data_flow,
    rank,
    reachability,
    report_from_dict,
    report_to_dict,
)
from meddevsec.vulnintel import (
    Exploitability,
    Source,
    VulnerabilityIndex,
    VulnerabilityRecord,
    ingest_cve_feed,
)

from .oracles import oracle_entry_points, oracle_reachability
from .randgen import random_structure, random_tech_profile, random_vuln_record

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def cloud_structure():
    return model.new_from_template("d-Nav", ml_location="cloud")


@pytest.fixture(scope="module")
def main_index():
    records, warnings = ingest_cve_feed((FIXTURES / "cve_feed_main.json").read_text())
    assert warnings == []
    return VulnerabilityIndex(records)


def profile_of(component, *, protocol="", version="", os=None, hardware=None):
    deps = {}
    if os:
        deps["operating_system"] = os
    if hardware:
        deps["hardware"] = hardware
    return compile_profile(
        component,
        {
            "human_interaction": "unknown",
            "em_susceptibility": "unknown",
            "communication": {"protocol": protocol, "version": version} if protocol else "unknown",
            "dependencies": deps if deps else "unknown",
        },
    )


def device_profiles():
    return [
        profile_of("interface", os=[{"name": "Android", "version": "13"}], protocol="Bluetooth"),
        profile_of(
            "network",
            protocol="Wi-Fi",
            version="WPA2",
            hardware=[{"name": "AC1200 Wi-Fi Router"}],
        ),
        profile_of("sensor", protocol="Wi-Fi"),
    ]


def mini_structure():
    return ControlStructure(
        device_name="mini",
        components=(
            Component(id="ml", name="Engine", kind=ComponentKind.MLController),
            Component(id="probe", name="Probe", kind=ComponentKind.Sensor),
        ),
        links=(Link(id="p2m", source="probe", target="ml", kind=LinkKind.DataFlow),),
    )


class TestReachability:
    def test_network_reaches_ml_through_cloud(self, cloud_structure):
        assert reachability(cloud_structure, "network") == ("network_to_cloud", "cloud_to_ml")

    def test_sensor_path_has_three_links(self, cloud_structure):
        assert reachability(cloud_structure, "sensor") == (
            "sensor_to_network",
            "network_to_cloud",
            "cloud_to_ml",
        )

    def test_interface_path(self, cloud_structure):
        assert reachability(cloud_structure, "interface") == ("interface_to_cloud", "cloud_to_ml")

    def test_operator_path_starts_with_control_action(self, cloud_structure):
        assert reachability(cloud_structure, "physician") == (
            "physician_to_interface",
            "interface_to_cloud",
            "cloud_to_ml",
        )

    def test_feedback_only_source_is_unreachable(self, cloud_structure):
        assert reachability(cloud_structure, "patient") is None

    def test_dead_end_source_is_unreachable(self, cloud_structure):
        assert reachability(cloud_structure, "actuator") is None

    def test_ml_controller_needs_another_ml_controller(self, cloud_structure):
        assert reachability(cloud_structure, "ml_controller") is None

    def test_unknown_source_rejected(self, cloud_structure):
        with pytest.raises(NotFoundError):
            reachability(cloud_structure, "nonexistent")

    def test_matches_exhaustive_oracle_on_random_structures(self):
        rng = random.Random(4820031)
        for _ in range(50):
            structure = random_structure(rng, max_components=9)
            for component in structure.components:
                assert reachability(structure, component.id) == oracle_reachability(
                    structure, component.id
                )


@pytest.fixture(scope="module")
def fixture_report(cloud_structure, main_index):
    return enumerate_entry_points(cloud_structure, device_profiles(), main_index)


class TestEnumerateAgainstFixture:
    # (component, vulnerability id) sequence computed by hand from the raw
    # fixture JSON: score = matched terms + 0.5 exploit + severity/100,
    # doubled when remotely exploitable, ties by component then id.
    EXPECTED_ORDER = [
        ("network", "CVE-2023-35836"),
        ("interface", "CVE-2017-1000251"),
        ("network", "CVE-2017-13077"),
        ("sensor", "CVE-2017-13077"),
        ("interface", "CVE-2024-43093"),
        ("interface", "CVE-2021-0316"),
        ("interface", "CVE-2019-9506"),
        ("sensor", "CVE-2023-35836"),
        ("network", "CVE-2020-26145"),
        ("sensor", "CVE-2020-26145"),
        ("network", "CVE-2020-24588"),
        ("sensor", "CVE-2020-24588"),
        ("network", "CVE-2019-15126"),
        ("sensor", "CVE-2019-15126"),
        ("interface", "CVE-2022-20474"),
        ("interface", "CVE-2023-21036"),
    ]

    def test_full_ranked_order(self, fixture_report):
        got = [(e.component, e.vulnerability.id) for e in fixture_report.entry_points]
        assert got == self.EXPECTED_ORDER

    def test_top_entry_is_the_router_bypass(self, fixture_report):
        top = fixture_report.entry_points[0]
        assert top.component == "network"
        assert top.vulnerability.id == "CVE-2023-35836"
        assert top.technology == "wi-fi"
        assert top.exploitability is Exploitability.Remote
        assert top.injection_path == ("network_to_cloud", "cloud_to_ml")
        assert top.rank_score == (3.0 + 8.1 / 100) * 2.0

    def test_technology_is_first_matching_keyword(self, fixture_report):
        tech = {
            (e.component, e.vulnerability.id): e.technology for e in fixture_report.entry_points
        }
        assert tech[("interface", "CVE-2024-43093")] == "android 13"
        assert tech[("interface", "CVE-2021-0316")] == "android"
        assert tech[("interface", "CVE-2017-1000251")] == "bluetooth"
        assert tech[("network", "CVE-2017-13077")] == "wi-fi"

    def test_paths_are_constant_per_component(self, fixture_report):
        by_component = {
            "interface": ("interface_to_cloud", "cloud_to_ml"),
            "network": ("network_to_cloud", "cloud_to_ml"),
            "sensor": ("sensor_to_network", "network_to_cloud", "cloud_to_ml"),
        }
        for entry in fixture_report.entry_points:
            assert entry.injection_path == by_component[entry.component]

    def test_all_profiled_components_covered(self, fixture_report):
        assert fixture_report.uncovered_components == ()

    def test_rank_scores_nonincreasing(self, fixture_report):
        scores = [e.rank_score for e in fixture_report.entry_points]
        assert scores == sorted(scores, reverse=True)

    def test_deterministic(self, cloud_structure, main_index, fixture_report):
        again = enumerate_entry_points(cloud_structure, device_profiles(), main_index)
        assert again == fixture_report


class TestEnumerateEdges:
    def test_empty_index_leaves_everything_uncovered(self, cloud_structure):
        report = enumerate_entry_points(cloud_structure, device_profiles(), VulnerabilityIndex())
        assert report.entry_points == ()
        assert report.uncovered_components == ("interface", "network", "sensor")

    def test_component_without_injection_path_is_uncovered(self, cloud_structure, main_index):
        report = enumerate_entry_points(
            cloud_structure, [profile_of("actuator", protocol="Wi-Fi")], main_index
        )
        assert report.entry_points == ()
        assert report.uncovered_components == ("actuator",)

    def test_profiled_ml_controller_is_uncovered(self, cloud_structure, main_index):
        report = enumerate_entry_points(
            cloud_structure, [profile_of("ml_controller", protocol="Wi-Fi")], main_index
        )
        assert report.uncovered_components == ("ml_controller",)

    def test_keywordless_profile_is_uncovered(self, cloud_structure, main_index):
        report = enumerate_entry_points(cloud_structure, [profile_of("network")], main_index)
        assert report.entry_points == ()
        assert report.uncovered_components == ("network",)

    def test_unknown_profiled_component_rejected(self, cloud_structure, main_index):
        with pytest.raises(NotFoundError):
            enumerate_entry_points(
                cloud_structure, [profile_of("mainframe", protocol="Wi-Fi")], main_index
            )

    def test_no_profiles_no_output(self, cloud_structure, main_index):
        report = enumerate_entry_points(cloud_structure, [], main_index)
        assert report.entry_points == ()
        assert report.uncovered_components == ()
        assert report.device_name == cloud_structure.device_name

    def test_remote_rank_doubles_and_wins_ties(self):
        common = dict(
            source=Source.CVE,
            summary="wifi stack flaw",
            affected_terms=(),
            severity=5.0,
            public_exploit=False,
            published=date(2021, 1, 1),
        )
        local = VulnerabilityRecord(
            id="CVE-2021-0001", exploitability=Exploitability.Local, **common
        )
        remote = VulnerabilityRecord(
            id="CVE-2021-0002", exploitability=Exploitability.Remote, **common
        )
        report = enumerate_entry_points(
            mini_structure(),
            [profile_of("probe", protocol="wifi")],
            VulnerabilityIndex([local, remote]),
        )
        assert [e.vulnerability.id for e in report.entry_points] == [
            "CVE-2021-0002",
            "CVE-2021-0001",
        ]
        assert report.entry_points[0].rank_score == (1.0 + 5.0 / 100) * 2.0
        assert report.entry_points[1].rank_score == 1.0 + 5.0 / 100

    def test_entry_point_requires_nonempty_path(self):
        record = random_vuln_record(random.Random(5), "CVE-2021-5555")
        with pytest.raises(ValueError):
            EntryPoint(
                component="probe",
                technology="wifi",
                vulnerability=record,
                exploitability=record.exploitability,
                injection_path=(),
                rank_score=1.0,
            )


def _random_run(rng, max_components=10, max_profiles=5, max_records=40):
    structure = random_structure(rng, max_components=max_components)
    ids = [c.id for c in structure.components]
    chosen = rng.sample(ids, k=rng.randint(0, min(max_profiles, len(ids))))
    profiles = [random_tech_profile(rng, cid) for cid in chosen]
    records = [
        random_vuln_record(rng, f"CVE-2021-{10000 + i}") for i in range(rng.randint(0, max_records))
    ]
    return structure, profiles, records


class TestEnumerateRandomized:
    def test_matches_brute_force_oracle(self):
        rng = random.Random(7340032)
        nonempty = 0
        for _ in range(60):
            structure, profiles, records = _random_run(rng)
            report = enumerate_entry_points(structure, profiles, VulnerabilityIndex(records))
            expected_rows, expected_uncovered = oracle_entry_points(
                structure,
                [(p.component, derive_search_keywords(p)) for p in profiles],
                records,
            )
            got_rows = [
                (
                    e.component,
                    e.technology,
                    e.vulnerability.id,
                    e.exploitability.value,
                    e.injection_path,
                    e.rank_score,
                )
                for e in report.entry_points
            ]
            assert got_rows == expected_rows
            assert list(report.uncovered_components) == expected_uncovered
            nonempty += len(report.entry_points)
        assert nonempty >= 100

    def test_adding_records_never_removes_entry_points(self):
        rng = random.Random(5550123)
        for _ in range(30):
            structure, profiles, base_records = _random_run(rng, max_records=25)
            extra = [
                random_vuln_record(rng, f"CVE-2021-{30000 + i}")
                for i in range(rng.randint(1, 10))
            ]
            before = enumerate_entry_points(structure, profiles, VulnerabilityIndex(base_records))
            after = enumerate_entry_points(
                structure, profiles, VulnerabilityIndex(base_records + extra)
            )

            def key(e):
                return (e.component, e.vulnerability.id, e.technology, e.injection_path, e.rank_score)

            assert {key(e) for e in before.entry_points} <= {key(e) for e in after.entry_points}
            assert set(after.uncovered_components) <= set(before.uncovered_components)

    def test_injection_paths_walk_real_links(self):
        rng = random.Random(9990001)
        checked = 0
        for _ in range(40):
            structure, profiles, records = _random_run(rng)
            report = enumerate_entry_points(structure, profiles, VulnerabilityIndex(records))
            links = {l.id: l for l in structure.links}
            ml_ids = {
                c.id for c in structure.components if c.kind is ComponentKind.MLController
            }
            for entry in report.entry_points:
                node = entry.component
                seen = {node}
                for link_id in entry.injection_path:
                    link = links[link_id]
                    assert link.kind in (LinkKind.ControlAction, LinkKind.DataFlow)
                    assert link.source == node
                    node = link.target
                    assert node not in seen
                    seen.add(node)
                assert node in ml_ids
                checked += 1
        assert checked >= 50

    def test_entries_reproducible_through_search(self):
        rng = random.Random(3141592)
        for _ in range(20):
            structure, profiles, records = _random_run(rng)
            index = VulnerabilityIndex(records)
            report = enumerate_entry_points(structure, profiles, index)
            keywords_by_component = {p.component: derive_search_keywords(p) for p in profiles}
            for entry in report.entry_points:
                keywords = keywords_by_component[entry.component]
                assert keywords
                hits = {m.record.id: m for m in index.search(keywords)}
                assert entry.vulnerability.id in hits
                assert entry.technology == hits[entry.vulnerability.id].matched_terms[0]

    def test_covered_and_uncovered_partition_profiled_set(self):
        rng = random.Random(6660002)
        for _ in range(30):
            structure, profiles, records = _random_run(rng)
            report = enumerate_entry_points(structure, profiles, VulnerabilityIndex(records))
            covered = {e.component for e in report.entry_points}
            uncovered = set(report.uncovered_components)
            assert covered | uncovered == {p.component for p in profiles}
            assert not covered & uncovered


def _synthetic_report(rng):
    entries = []
    for i in range(rng.randint(0, 15)):
        record = random_vuln_record(rng, f"CVE-2022-{1000 + i:04d}")
        entries.append(
            EntryPoint(
                component=f"c{rng.randint(0, 3)}",
                technology=rng.choice(("wifi", "android")),
                vulnerability=record,
                exploitability=record.exploitability,
                injection_path=("l1",),
                rank_score=rng.choice((1.0, 2.0, 3.5)),
            )
        )
    return AttackSurfaceReport("synthetic", tuple(entries), ())


class TestRank:
    def test_idempotent_and_shuffle_invariant(self):
        rng = random.Random(1230045)
        for _ in range(25):
            report = _synthetic_report(rng)
            ranked = rank(report)
            assert rank(ranked) == ranked
            shuffled = list(report.entry_points)
            rng.shuffle(shuffled)
            assert rank(AttackSurfaceReport("synthetic", tuple(shuffled), ())) == ranked

    def test_matches_explicit_comparator(self):
        rng = random.Random(8080808)

        def cmp(a, b):
            if a.rank_score != b.rank_score:
                return -1 if a.rank_score > b.rank_score else 1
            if a.component != b.component:
                return -1 if a.component < b.component else 1
            if a.vulnerability.id != b.vulnerability.id:
                return -1 if a.vulnerability.id < b.vulnerability.id else 1
            return 0

        for _ in range(25):
            report = _synthetic_report(rng)
            expected = sorted(report.entry_points, key=cmp_to_key(cmp))
            assert list(rank(report).entry_points) == expected


class TestTableAndPersistence:
    def test_table_layout(self, cloud_structure, main_index):
        report = enumerate_entry_points(cloud_structure, device_profiles(), main_index)
        table = format_surface_table(report)
        lines = table.splitlines()
        assert lines[0].startswith("Component")
        assert set(lines[1]) <= {"-", " "}
        assert lines[2].startswith("network")
        assert "CVE-2023-35836" in lines[2]
        assert "network_to_cloud -> cloud_to_ml" in lines[2]
        assert table.endswith("\n")
        assert format_surface_table(report) == table

    def test_table_lists_uncovered_components(self, cloud_structure, main_index):
        report = enumerate_entry_points(
            cloud_structure, [profile_of("actuator", protocol="Wi-Fi")], main_index
        )
        table = format_surface_table(report)
        assert "Uncovered components: actuator" in table

    def test_report_round_trip(self, cloud_structure, main_index):
        report = enumerate_entry_points(cloud_structure, device_profiles(), main_index)
        raw = json.dumps(report_to_dict(report))
        assert report_from_dict(json.loads(raw)) == report

    def test_random_report_round_trip(self):
        rng = random.Random(2220077)
        for _ in range(20):
            report = rank(_synthetic_report(rng))
            assert report_from_dict(json.loads(json.dumps(report_to_dict(report)))) == report


class TestInferenceDataFlow:
    def test_cloud_template_full_path(self, cloud_structure):
        assert inference_data_flow(cloud_structure) == (
            "sensor", "network", "cloud", "ml_controller", "actuator", "patient",
        )

    def test_device_template_skips_network(self):
        structure = model.new_from_template("d-Nav", ml_location="device")
        assert inference_data_flow(structure) == (
            "sensor", "ml_controller", "actuator", "patient",
        )

    def test_flow_without_patient_stops_at_controller(self):
        assert inference_data_flow(mini_structure()) == ("probe", "ml")

    def test_smallest_connected_sensor_anchors(self):
        structure = ControlStructure(
            device_name="two-sensors",
            components=(
                Component(id="ml", name="Engine", kind=ComponentKind.MLController),
                Component(id="s_a", name="Disconnected", kind=ComponentKind.Sensor),
                Component(id="s_b", name="Connected", kind=ComponentKind.Sensor),
            ),
            links=(Link(id="bm", source="s_b", target="ml", kind=LinkKind.DataFlow),),
        )
        assert inference_data_flow(structure) == ("s_b", "ml")

    def test_no_feeding_sensor_rejected(self):
        structure = ControlStructure(
            device_name="stranded",
            components=(
                Component(id="ml", name="Engine", kind=ComponentKind.MLController),
                Component(id="s1", name="Probe", kind=ComponentKind.Sensor),
            ),
            links=(Link(id="f1", source="ml", target="s1", kind=LinkKind.DataFlow),),
        )
        with pytest.raises(ValidationError):
            inference_data_flow(structure)
