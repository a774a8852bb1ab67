/**
 * Plain-text renderers for workbench views.
 *
 * These produce strings for the DOM layer to place, which keeps them easy to
 * test: contract tests compare the rendered numbers against the recorded
 * service payloads.  No renderer computes a value; each one echoes fields.
 */

import type {
  FindingDto,
  ProfileDto,
  StatsEnvelope,
  StoredScenarioDto,
  StructuredReport,
} from "./api.js";
import type { EditOperation } from "./api.js";
import type { ConflictReport } from "./structureEditor.js";
import type { TriageRow } from "./triage.js";

export function renderSurfaceTable(rows: readonly TriageRow[], uncovered: readonly string[]): string {
  const lines = ["rank | component | technology | vulnerability | exploitability | score | path"];
  for (const { rank, entry } of rows) {
    lines.push(
      [
        String(rank),
        entry.component,
        entry.technology,
        entry.vulnerability.id,
        entry.exploitability,
        String(entry.rank_score),
        entry.injection_path.join(" > "),
      ].join(" | "),
    );
  }
  if (uncovered.length > 0) {
    lines.push(`uncovered: ${uncovered.join(", ")}`);
  }
  return lines.join("\n");
}

export function renderScenario(stored: StoredScenarioDto): string {
  const scenario = stored.scenario;
  const lines = [
    `${stored.id} [${stored.disposition}] (${scenario.provenance})`,
    `target: ${scenario.request.target_component} via ${scenario.request.target_technology}` +
      ` using ${scenario.request.vulnerability.id}`,
    `hazard: ${scenario.request.hazard.id}`,
  ];
  if (stored.note) {
    lines.push(`note: ${stored.note}`);
  }
  scenario.steps.forEach((step, index) => {
    lines.push(`${index + 1}. ${step.category}: ${step.description}`);
  });
  for (const warning of scenario.warnings) {
    lines.push(`warning: ${warning}`);
  }
  return lines.join("\n");
}

export function describeEdit(edit: EditOperation): string {
  switch (edit.op) {
    case "add_component":
      return `add component '${edit.component.id}' (${edit.component.kind})`;
    case "remove_component":
      return `remove component '${edit.component_id}'`;
    case "add_link":
      return `add link '${edit.link.id}' ${edit.link.source} -> ${edit.link.target}`;
    case "remove_link":
      return `remove link '${edit.link_id}'`;
    case "rename":
      return `rename '${edit.component_id}' to '${edit.new_name}'`;
  }
}

export function renderConflictDialog(report: ConflictReport): string {
  const lines = [
    report.detail,
    `the project moved to revision ${report.freshRevision} while you were editing`,
  ];
  if (report.replayable.length > 0) {
    lines.push("edits that still apply:");
    for (const edit of report.replayable) {
      lines.push(`  - ${describeEdit(edit)}`);
    }
  }
  if (report.dropped.length > 0) {
    lines.push("edits that no longer apply:");
    for (const { edit, reason } of report.dropped) {
      lines.push(`  - ${describeEdit(edit)}: ${reason}`);
    }
  }
  lines.push(
    report.replayable.length > 0
      ? "replay the remaining edits at the current revision?"
      : "nothing can be replayed; the staged edits will be discarded",
  );
  return lines.join("\n");
}

export function renderFindings(findings: readonly FindingDto[]): string {
  if (findings.length === 0) return "(no findings)";
  return findings.map((f) => `${f.element}: ${f.message} [${f.rule}]`).join("\n");
}

function tristate(value: boolean | "unknown"): string {
  return value === "unknown" ? "unknown" : value ? "yes" : "no";
}

export function renderProfile(profile: ProfileDto): string {
  const hi = profile.human_interaction;
  const comm = profile.communication;
  const em = profile.em_susceptibility;
  const deps = profile.dependencies;
  const depLine = (label: string, entries: { name: string; version: string }[]): string =>
    `  ${label}: ` +
    (entries.length === 0
      ? "(none)"
      : entries.map((d) => (d.version ? `${d.name} ${d.version}` : d.name)).join(", "));
  return [
    `profile: ${profile.component}`,
    "human interaction:",
    `  data entry: ${tristate(hi.data_entry)}`,
    `  authentication: ${tristate(hi.authentication)}`,
    `  validation: ${tristate(hi.validation)}`,
    `  anomaly detection: ${tristate(hi.anomaly_detection)}`,
    "communication:",
    `  protocol: ${comm.protocol || "(none)"}`,
    `  version: ${comm.version || "(none)"}`,
    `  encrypted: ${tristate(comm.encrypted)}`,
    "em susceptibility:",
    `  susceptible: ${tristate(em.susceptible)}`,
    "dependencies:",
    depLine("operating system", deps.operating_system),
    depLine("libraries", deps.libraries),
    depLine("firmware", deps.firmware),
    depLine("hardware", deps.hardware),
  ].join("\n");
}

export function renderExecutiveSummary(summary: Record<string, number | string>): string {
  return Object.entries(summary)
    .map(([key, value]) => `${key.replace(/_/g, " ")}: ${String(value)}`)
    .join("\n");
}

export function renderStatsTable(stats: StatsEnvelope): string {
  const lines = [`grouped by ${stats.table.group_by}`];
  for (const row of stats.table.rows) {
    lines.push(`${row.key} | ${String(row.count)} | ${String(row.share)}`);
  }
  lines.push(`total: ${String(stats.table.total)}`);
  for (const snapshot of stats.snapshots) {
    lines.push(
      `snapshot ${snapshot.file} (${snapshot.dataset}, ${snapshot.declared_date}):` +
        ` ${String(snapshot.records)} records`,
    );
  }
  return lines.join("\n");
}

export function renderReportSummary(report: StructuredReport): string {
  const lines = [renderExecutiveSummary(report.executive_summary), "", "attack surface:"];
  for (const row of report.attack_surface.rows) {
    lines.push(
      `${String(row.rank)}. ${row.component} ${row.technology} ${row.vulnerability}` +
        ` ${row.exploitability} score=${String(row.score)}`,
    );
  }
  if (report.attack_surface.uncovered_components.length > 0) {
    lines.push(`uncovered: ${report.attack_surface.uncovered_components.join(", ")}`);
  }
  return lines.join("\n");
}
