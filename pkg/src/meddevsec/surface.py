"""Attack-surface enumeration over the control structure.

An entry point answers one question for the analyst: through which component,
running which technology, could an adversary use which known vulnerability to
push false data along the modeled links into the ML controller?  Injection
paths follow control-action and data-flow links only; feedback links carry
observations back out of the process and are not an injection direction.

Ranking is a fixed, documented formula rather than a tunable model: the
vulnerability's search score doubled when it is remotely exploitable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .errors import NotFoundError, ValidationError
from .inventory import TechnologyProfile, derive_search_keywords
from .model import ACTION_KINDS, ComponentKind, ControlStructure, shortest_link_path
from .vulnintel import (
    Exploitability,
    VulnerabilityIndex,
    VulnerabilityRecord,
    record_from_dict,
    record_to_dict,
)

REMOTE_RANK_MULTIPLIER = 2.0


@dataclass(frozen=True)
class EntryPoint:
    component: str
    technology: str
    vulnerability: VulnerabilityRecord
    exploitability: Exploitability
    injection_path: tuple[str, ...]
    rank_score: float

    def __post_init__(self) -> None:
        if not self.injection_path:
            raise ValueError("injection_path must be nonempty")


@dataclass(frozen=True)
class AttackSurfaceReport:
    device_name: str
    entry_points: tuple[EntryPoint, ...]
    uncovered_components: tuple[str, ...]


def reachability(structure: ControlStructure, source: str) -> tuple[str, ...] | None:
    """Shortest injection path from ``source`` to any ML controller.

    Walks ControlAction and DataFlow links only; the path has at least one
    link, so an ML controller reaches itself only through another one.  Among
    equal-length paths the lexicographically smallest link-id sequence wins.
    Returns None when no ML controller is reachable.
    """
    known = {c.id for c in structure.components}
    if source not in known:
        raise NotFoundError(f"unknown component {source!r}")
    targets = [
        c.id
        for c in structure.components
        if c.kind is ComponentKind.MLController and c.id != source
    ]
    if not targets:
        return None
    return shortest_link_path(structure, source, targets, ACTION_KINDS)


def inference_data_flow(structure: ControlStructure) -> tuple[str, ...]:
    """Component path inference data travels, sensor to patient.

    Sensors are tried in id order; the first with an injection path to an ML
    controller anchors the flow.  When a patient is reachable onward from
    that controller the flow continues to the patient, otherwise it stops at
    the controller.  Raises when no sensor feeds any ML controller, because
    then there is no false-data-injection story to tell.
    """
    sensors = sorted(c.id for c in structure.components_by_kind(ComponentKind.Sensor))
    for sensor in sensors:
        inbound = reachability(structure, sensor)
        if inbound is None:
            continue
        flow = [sensor]
        flow.extend(structure.link(link_id).target for link_id in inbound)
        patients = [c.id for c in structure.components_by_kind(ComponentKind.Patient)]
        onward = shortest_link_path(structure, flow[-1], patients, ACTION_KINDS)
        if onward is not None:
            flow.extend(structure.link(link_id).target for link_id in onward)
        return tuple(flow)
    raise ValidationError("no sensor feeds an ML controller in this structure")


def enumerate_entry_points(
    structure: ControlStructure,
    profiles: Sequence[TechnologyProfile],
    index: VulnerabilityIndex,
) -> AttackSurfaceReport:
    """Ranked attack surface for every profiled component.

    Per profiled component: derive its search keywords, query the index, and
    emit one entry point per matched vulnerability when an injection path to
    an ML controller exists.  The entry point's technology is the first of
    the component's keywords that matched that record.  Profiled components
    that yield no entry point at all (nothing matched, no keywords, or no
    path) are reported as uncovered so the analyst sees the gap.
    """
    known = {c.id for c in structure.components}
    for profile in profiles:
        if profile.component not in known:
            raise NotFoundError(f"profiled component {profile.component!r} not in structure")
    entry_points: list[EntryPoint] = []
    uncovered: list[str] = []
    for profile in sorted(profiles, key=lambda p: p.component):
        keywords = derive_search_keywords(profile)
        hits = index.search(keywords) if keywords else []
        path = reachability(structure, profile.component) if hits else None
        if not hits or path is None:
            uncovered.append(profile.component)
            continue
        for hit in hits:
            entry_points.append(
                EntryPoint(
                    component=profile.component,
                    technology=hit.matched_terms[0],
                    vulnerability=hit.record,
                    exploitability=hit.record.exploitability,
                    injection_path=path,
                    rank_score=_rank_score(hit.score, hit.record.exploitability),
                )
            )
    report = AttackSurfaceReport(
        device_name=structure.device_name,
        entry_points=tuple(entry_points),
        uncovered_components=tuple(uncovered),
    )
    return rank(report)


def _rank_score(search_score: float, exploitability: Exploitability) -> float:
    if exploitability is Exploitability.Remote:
        return search_score * REMOTE_RANK_MULTIPLIER
    return search_score


def rank(report: AttackSurfaceReport) -> AttackSurfaceReport:
    """Sort entry points by rank score, then component id, then record id."""
    ordered = tuple(
        sorted(
            report.entry_points,
            key=lambda e: (-e.rank_score, e.component, e.vulnerability.id),
        )
    )
    return replace(report, entry_points=ordered)


def format_surface_table(report: AttackSurfaceReport) -> str:
    """Aligned-column text table of the ranked attack surface."""
    header = ("Component", "Technology", "Vulnerability", "Exploitability", "Score", "Path")
    rows = [header]
    for entry in report.entry_points:
        rows.append(
            (
                entry.component,
                entry.technology,
                entry.vulnerability.id,
                entry.exploitability.value,
                f"{entry.rank_score:.3f}",
                " -> ".join(entry.injection_path),
            )
        )
    widths = [max(len(row[col]) for row in rows) for col in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[col]) for col, cell in enumerate(row)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * widths[col] for col in range(len(header))))
    if report.uncovered_components:
        lines.append("")
        lines.append("Uncovered components: " + ", ".join(report.uncovered_components))
    return "\n".join(lines) + "\n"


# --- persistence ---------------------------------------------------------


def entry_point_to_dict(entry: EntryPoint) -> dict[str, object]:
    return {
        "component": entry.component,
        "technology": entry.technology,
        "vulnerability": record_to_dict(entry.vulnerability),
        "exploitability": entry.exploitability.value,
        "injection_path": list(entry.injection_path),
        "rank_score": entry.rank_score,
    }


def entry_point_from_dict(raw: Mapping[str, object]) -> EntryPoint:
    return EntryPoint(
        component=str(raw["component"]),
        technology=str(raw["technology"]),
        vulnerability=record_from_dict(raw["vulnerability"]),
        exploitability=Exploitability(str(raw["exploitability"])),
        injection_path=tuple(str(l) for l in raw["injection_path"]),
        rank_score=float(raw["rank_score"]),
    )


def report_to_dict(report: AttackSurfaceReport) -> dict[str, object]:
    return {
        "device_name": report.device_name,
        "entry_points": [entry_point_to_dict(e) for e in report.entry_points],
        "uncovered_components": list(report.uncovered_components),
    }


def report_from_dict(raw: Mapping[str, object]) -> AttackSurfaceReport:
    return AttackSurfaceReport(
        device_name=str(raw["device_name"]),
        entry_points=tuple(entry_point_from_dict(e) for e in raw["entry_points"]),
        uncovered_components=tuple(str(c) for c in raw["uncovered_components"]),
    )
