/**
 * Attack surface triage and scenario generation.
 *
 * The entry point table is the service's ranked list shown as-is: filters
 * only hide rows, they never reorder or rescore.  Generation needs an entry
 * point, a hazard, and an unsafe control action; the resulting scenario's
 * provenance and any degradation warnings are surfaced verbatim.
 */

import { ApiClient } from "./api.js";
import type {
  Disposition,
  EntryPointDto,
  ScenarioDto,
  ScenarioEnvelope,
  SurfaceDto,
} from "./api.js";
import { noteRevision } from "./state.js";
import type { TriageFilters, TriageSelection, ViewState } from "./state.js";

/** A table row; rank is the 1-based position in the service's ordering. */
export interface TriageRow {
  rank: number;
  entry: EntryPointDto;
}

export function rankedRows(surface: SurfaceDto): TriageRow[] {
  return surface.entry_points.map((entry, index) => ({ rank: index + 1, entry }));
}

/** Hide rows that do not match the filters; order and content untouched. */
export function applyFilters(rows: readonly TriageRow[], filters: TriageFilters): TriageRow[] {
  return rows.filter((row) => {
    if (filters.exploitability !== "All" && row.entry.exploitability !== filters.exploitability) {
      return false;
    }
    if (filters.component !== "All" && row.entry.component !== filters.component) {
      return false;
    }
    return true;
  });
}

/** Generate stays disabled until an entry point, hazard, and UCA are picked. */
export function canGenerate(selection: TriageSelection): boolean {
  return selection.entryPoint !== null && selection.hazard !== null && selection.uca !== null;
}

export type ProvenanceBadge = "Gateway" | "Fallback";

export function provenanceBadge(scenario: ScenarioDto): ProvenanceBadge {
  return scenario.provenance;
}

/**
 * Toast text for a degraded generation, straight from the scenario's
 * warnings; null when the generation went through cleanly.  Degradation is
 * never a dead end: the scenario below the toast is fully usable.
 */
export function degradationToast(scenario: ScenarioDto): string | null {
  if (scenario.warnings.length === 0) return null;
  return scenario.warnings.join("\n");
}

export interface GenerateOptions {
  attack: string;
  fallback?: boolean;
  gateway?: string;
}

/**
 * Create a scenario for the selected entry point, hazard, and UCA.
 * The attack pattern id comes from the generation form; fallback or a
 * gateway URL pass through to the service untouched.
 */
export async function generateScenario(
  client: ApiClient,
  state: ViewState,
  options: GenerateOptions,
): Promise<ScenarioEnvelope> {
  const selection = state.triageSelection;
  if (!canGenerate(selection)) {
    throw new Error("select an entry point, a hazard, and an unsafe control action first");
  }
  if (state.revision === null) throw new Error("no project loaded");
  const body: Parameters<ApiClient["createScenario"]>[0] = {
    revision: state.revision,
    op_id: state.nextOpId(),
    entry_point: selection.entryPoint as number,
    attack: options.attack,
    hazard: selection.hazard as string,
    uca: selection.uca as string,
  };
  if (options.fallback !== undefined) body.fallback = options.fallback;
  if (options.gateway !== undefined) body.gateway = options.gateway;
  const envelope = await client.createScenario(body);
  noteRevision(state, envelope.revision);
  state.selectedScenario = envelope.stored.id;
  return envelope;
}

/** Record the analyst's disposition for a stored scenario. */
export async function setDisposition(
  client: ApiClient,
  state: ViewState,
  scenarioId: string,
  disposition: Disposition,
  note = "",
): Promise<ScenarioEnvelope> {
  if (state.revision === null) throw new Error("no project loaded");
  const envelope = await client.patchScenario(scenarioId, {
    revision: state.revision,
    op_id: state.nextOpId(),
    disposition,
    note,
  });
  noteRevision(state, envelope.revision);
  return envelope;
}
