"""Deterministic assessment reports: text, JSON, CSV tables, SVG charts.

Renderers are pure functions of the project value; rendering the same
project twice produces byte-identical output.  No timestamps, hostnames,
or absolute paths appear anywhere, and the SVG writer pins matplotlib's
hash salt so element ids do not drift between runs.  Every table row
carries the id of the project element it was derived from.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from pathlib import Path

from .cast import FactorClass
from .errors import ValidationError
from .model import ComponentKind
from .project import Project
from .regulatory import round_percent
from .scenario import Disposition

REPORT_FORMATS = ("structured", "text")

TEXT_FILE = "report.txt"
JSON_FILE = "report.json"
SURFACE_CSV = "surface.csv"
SCENARIOS_CSV = "scenarios.csv"
CAST_CSV = "cast_classes.csv"
SURFACE_FIGURE = "surface_ranking.svg"
CAST_FIGURE = "cast_classes.svg"

_SVG_HASHSALT = "meddevsec-report"
_PATH_SEP = ">"


def _executive_summary(project: Project) -> dict[str, object]:
    structure = project.structure
    ml_count = len(structure.components_by_kind(ComponentKind.MLController))
    entries = () if project.attack_surface is None else project.attack_surface.entry_points
    remote = sum(1 for e in entries if e.exploitability.value == "Remote")
    dispositions = Counter(s.disposition for s in project.scenarios)
    factor_total = sum(len(c.analysis.factors) for c in project.cast_results)
    return {
        "device": structure.device_name,
        "project": project.id,
        "revision": project.revision,
        "components": len(structure.components),
        "ml_controllers": ml_count,
        "links": len(structure.links),
        "profiles": len(project.profiles),
        "snapshots": len(project.snapshots),
        "snapshot_records": sum(s.records for s in project.snapshots),
        "entry_points": len(entries),
        "remote_entry_points": remote,
        "scenarios": len(project.scenarios),
        "scenarios_open": dispositions[Disposition.Open],
        "scenarios_mitigated": dispositions[Disposition.Mitigated],
        "scenarios_rejected": dispositions[Disposition.Rejected],
        "causal_analyses": len(project.cast_results),
        "causal_factors": factor_total,
    }


def _surface_rows(project: Project) -> list[dict[str, object]]:
    if project.attack_surface is None:
        return []
    rows = []
    for position, entry in enumerate(project.attack_surface.entry_points, start=1):
        rows.append(
            {
                "rank": position,
                "component": entry.component,
                "technology": entry.technology,
                "vulnerability": entry.vulnerability.id,
                "exploitability": entry.exploitability.value,
                "score": entry.rank_score,
                "injection_path": list(entry.injection_path),
            }
        )
    return rows


def _scenario_rows(project: Project) -> list[dict[str, object]]:
    rows = []
    for stored in project.scenarios:
        scenario = stored.scenario
        request = scenario.request
        rows.append(
            {
                "id": stored.id,
                "disposition": stored.disposition.value,
                "note": stored.note,
                "provenance": scenario.provenance.value,
                "attack": request.ml_attack.id,
                "target_component": request.target_component,
                "target_technology": request.target_technology,
                "vulnerability": request.vulnerability.id,
                "hazard": request.hazard.id,
                "uca": request.uca.id,
                "data_flow": list(request.data_flow),
                "steps": [
                    {
                        "category": step.category.value,
                        "name": step.name,
                        "description": step.description,
                    }
                    for step in scenario.steps
                ],
            }
        )
    return rows


def _cast_rows(project: Project) -> list[dict[str, object]]:
    rows = []
    for stored in project.cast_results:
        analysis = stored.analysis
        rows.append(
            {
                "id": stored.id,
                "provenance": analysis.provenance.value,
                "segments": len(analysis.segments),
                "assigned": sum(1 for a in analysis.assignments if a.assigned),
                "factors": len(analysis.factors),
                "by_class": [
                    {"label": stat.label, "count": stat.count, "percent": stat.percent}
                    for stat in analysis.stats.by_class
                ],
                "by_loop": [
                    {"label": stat.label, "count": stat.count, "percent": stat.percent}
                    for stat in analysis.stats.by_loop
                ],
            }
        )
    return rows


def _provenance_rows(project: Project) -> list[dict[str, object]]:
    return [
        {
            "file": info.file,
            "dataset": info.dataset,
            "declared_date": info.declared_date,
            "records": info.records,
        }
        for info in project.snapshots
    ]


def render_structured(project: Project) -> dict[str, object]:
    """Whole report as one JSON-serializable dictionary."""

    uncovered: list[str] = []
    if project.attack_surface is not None:
        uncovered = list(project.attack_surface.uncovered_components)
    return {
        "executive_summary": _executive_summary(project),
        "attack_surface": {
            "rows": _surface_rows(project),
            "uncovered_components": uncovered,
        },
        "scenarios": _scenario_rows(project),
        "cast": _cast_rows(project),
        "provenance": {"snapshots": _provenance_rows(project)},
    }


def render_json(project: Project) -> str:
    return json.dumps(render_structured(project), indent=2, sort_keys=True) + "\n"


def _heading(title: str, underline: str) -> list[str]:
    return [title, underline * len(title)]


def render_text(project: Project) -> str:
    """Plain-text report; identical input always yields identical bytes."""

    summary = _executive_summary(project)
    lines: list[str] = []
    title = f"Security assessment report: {summary['device']}"
    lines += _heading(title, "=")
    lines.append(f"Project {summary['project']}, revision {summary['revision']}")
    lines.append("")

    lines += _heading("Executive summary", "-")
    lines.append(
        f"Control structure: {summary['components']} components"
        f" ({summary['ml_controllers']} ML), {summary['links']} links"
    )
    lines.append(f"Technology profiles: {summary['profiles']}")
    lines.append(
        f"Evidence snapshots: {summary['snapshots']}"
        f" ({summary['snapshot_records']} records)"
    )
    lines.append(
        f"Attack surface: {summary['entry_points']} entry points"
        f" ({summary['remote_entry_points']} remote)"
    )
    lines.append(
        f"Scenarios: {summary['scenarios']}"
        f" (open {summary['scenarios_open']},"
        f" mitigated {summary['scenarios_mitigated']},"
        f" rejected {summary['scenarios_rejected']})"
    )
    lines.append(
        f"Causal analyses: {summary['causal_analyses']}"
        f" ({summary['causal_factors']} factors)"
    )
    lines.append("")

    lines += _heading("Attack surface", "-")
    surface_rows = _surface_rows(project)
    if surface_rows:
        for row in surface_rows:
            path = _PATH_SEP.join(row["injection_path"]) or "(direct)"
            lines.append(
                f"{row['rank']:>3}. {row['component']} via {row['technology']}:"
                f" {row['vulnerability']} [{row['exploitability']}]"
                f" score {row['score']:.2f} path {path}"
            )
        if project.attack_surface is not None and project.attack_surface.uncovered_components:
            uncovered = ", ".join(project.attack_surface.uncovered_components)
            lines.append(f"No path to the ML controller: {uncovered}")
    else:
        lines.append("(no entry points recorded)")
    lines.append("")

    lines += _heading("Scenarios", "-")
    scenario_rows = _scenario_rows(project)
    if scenario_rows:
        for row in scenario_rows:
            lines.append(
                f"{row['id']} [{row['disposition']}] {row['attack']}"
                f" via {row['vulnerability']} on {row['target_component']}"
            )
            lines.append(
                f"  hazard {row['hazard']}, unsafe action {row['uca']},"
                f" provenance {row['provenance']}"
            )
            if row["note"]:
                lines.append(f"  note: {row['note']}")
            for position, step in enumerate(row["steps"], start=1):
                lines.append(f"  {position}. {step['category']}: {step['name']}")
    else:
        lines.append("(no scenarios drafted)")
    lines.append("")

    lines += _heading("Causal analyses", "-")
    cast_rows = _cast_rows(project)
    if cast_rows:
        for row in cast_rows:
            lines.append(
                f"{row['id']} [{row['provenance']}] {row['segments']} segments,"
                f" {row['assigned']} assigned, {row['factors']} factors"
            )
            for stat in row["by_class"]:
                lines.append(
                    f"  {stat['label']}: {stat['count']} ({stat['percent']}%)"
                )
    else:
        lines.append("(no causal analyses recorded)")
    lines.append("")

    lines += _heading("Data sources", "-")
    provenance_rows = _provenance_rows(project)
    if provenance_rows:
        for row in provenance_rows:
            declared = row["declared_date"] or "undated"
            lines.append(
                f"{row['file']} [{row['dataset']}] snapshot {declared},"
                f" {row['records']} records"
            )
    else:
        lines.append("(no snapshots ingested)")
    lines.append("")
    return "\n".join(lines)


def render_report(project: Project, format: str = "structured") -> str:
    """Render to the named format; structured output is the JSON document."""

    if format == "structured":
        return render_json(project)
    if format == "text":
        return render_text(project)
    raise ValidationError(f"unknown report format {format!r}")


# --- delimited tables -------------------------------------------------------


def _csv_text(header: list[str], rows: list[list[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def surface_csv(project: Project) -> str:
    rows = [
        [
            row["rank"],
            row["component"],
            row["technology"],
            row["vulnerability"],
            row["exploitability"],
            f"{row['score']:.2f}",
            _PATH_SEP.join(row["injection_path"]),
        ]
        for row in _surface_rows(project)
    ]
    return _csv_text(
        ["rank", "component", "technology", "vulnerability", "exploitability",
         "score", "injection_path"],
        rows,
    )


def scenarios_csv(project: Project) -> str:
    rows = [
        [
            row["id"],
            row["disposition"],
            row["provenance"],
            row["attack"],
            row["target_component"],
            row["vulnerability"],
            row["hazard"],
            row["uca"],
            len(row["steps"]),
        ]
        for row in _scenario_rows(project)
    ]
    return _csv_text(
        ["id", "disposition", "provenance", "attack", "target_component",
         "vulnerability", "hazard", "uca", "steps"],
        rows,
    )


def cast_csv(project: Project) -> str:
    rows = []
    for cast_row in _cast_rows(project):
        for stat in cast_row["by_class"]:
            rows.append([cast_row["id"], stat["label"], stat["count"], stat["percent"]])
    return _csv_text(["analysis", "factor_class", "count", "percent"], rows)


# --- figures ----------------------------------------------------------------


def _save_svg(fig, path: Path) -> None:
    # Date: None drops the render timestamp so bytes stay reproducible.
    fig.savefig(path, format="svg", metadata={"Date": None})


def _figure_context():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def write_surface_figure(project: Project, path: Path) -> bool:
    """Bar chart of entry point scores; skipped when there are none."""

    rows = _surface_rows(project)[:10]
    if not rows:
        return False
    plt = _figure_context()
    with plt.rc_context({"svg.hashsalt": _SVG_HASHSALT}):
        fig, ax = plt.subplots(figsize=(8, 4.5))
        labels = [f"{row['component']}: {row['vulnerability']}" for row in rows]
        scores = [row["score"] for row in rows]
        positions = range(len(rows))
        ax.barh(positions, scores, color="#3b6ea5")
        ax.set_yticks(list(positions))
        ax.set_yticklabels(labels, fontsize=8)
        ax.invert_yaxis()
        ax.set_xlabel("rank score")
        ax.set_title(f"Attack surface ranking: {project.structure.device_name}")
        fig.tight_layout()
        _save_svg(fig, path)
        plt.close(fig)
    return True


def write_cast_figure(project: Project, path: Path) -> bool:
    """Factor class counts across every stored causal analysis."""

    totals: Counter[str] = Counter()
    for stored in project.cast_results:
        for stat in stored.analysis.stats.by_class:
            totals[stat.label] += stat.count
    if sum(totals.values()) == 0:
        return False
    plt = _figure_context()
    with plt.rc_context({"svg.hashsalt": _SVG_HASHSALT}):
        fig, ax = plt.subplots(figsize=(8, 4.5))
        labels = [f.value for f in FactorClass]
        counts = [totals[label] for label in labels]
        total = sum(counts)
        ax.bar(range(len(labels)), counts, color="#a5503b")
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
        ax.set_ylabel("factors")
        percents = [round_percent(c, total) for c in counts]
        for x, (count, percent) in enumerate(zip(counts, percents)):
            ax.annotate(f"{percent}%", (x, count), ha="center", va="bottom", fontsize=8)
        ax.set_title(f"Causal factor classes: {project.structure.device_name}")
        fig.tight_layout()
        _save_svg(fig, path)
        plt.close(fig)
    return True


def write_report_files(project: Project, out_dir: Path) -> list[str]:
    """Write every report artifact into ``out_dir``; returns file names.

    Always writes the text report, the JSON report, and the three CSV
    tables; writes an SVG chart next to each table that has data.
    """

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    def emit(name: str, text: str) -> None:
        (out_dir / name).write_text(text, encoding="utf-8")
        written.append(name)

    emit(TEXT_FILE, render_text(project))
    emit(JSON_FILE, render_json(project))
    emit(SURFACE_CSV, surface_csv(project))
    emit(SCENARIOS_CSV, scenarios_csv(project))
    emit(CAST_CSV, cast_csv(project))
    if write_surface_figure(project, out_dir / SURFACE_FIGURE):
        written.append(SURFACE_FIGURE)
    if write_cast_figure(project, out_dir / CAST_FIGURE):
        written.append(CAST_FIGURE)
    return written
