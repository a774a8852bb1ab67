/**
 * Client-side view state.
 *
 * Holds which project is open, what the analyst has selected, and any edits
 * staged locally but not yet submitted.  The revision always mirrors the last
 * server response; nothing here recomputes a value the service already owns.
 */

import type {
  ComponentKind,
  EditOperation,
  Exploitability,
  LinkKind,
  StructureDto,
} from "./api.js";

export type OpIdSource = () => string;

/** Sequential op ids, "op-1", "op-2", ...; injectable so tests are deterministic. */
export function sequentialOpIds(prefix = "op"): OpIdSource {
  let counter = 0;
  return () => {
    counter += 1;
    return `${prefix}-${counter}`;
  };
}

export interface TriageFilters {
  exploitability: Exploitability | "All";
  component: string | "All";
}

export interface TriageSelection {
  entryPoint: number | null;
  hazard: string | null;
  uca: string | null;
}

export interface ViewState {
  projectId: string | null;
  revision: number | null;
  selectedComponent: string | null;
  selectedLoop: string | null;
  selectedScenario: string | null;
  pendingAnswers: Record<string, unknown>;
  triageFilters: TriageFilters;
  triageSelection: TriageSelection;
  stagedEdits: EditOperation[];
  nextOpId: OpIdSource;
}

export function createViewState(opIds: OpIdSource = sequentialOpIds()): ViewState {
  return {
    projectId: null,
    revision: null,
    selectedComponent: null,
    selectedLoop: null,
    selectedScenario: null,
    pendingAnswers: {},
    triageFilters: { exploitability: "All", component: "All" },
    triageSelection: { entryPoint: null, hazard: null, uca: null },
    stagedEdits: [],
    nextOpId: opIds,
  };
}

/** Record the revision carried by the latest server response. */
export function noteRevision(state: ViewState, revision: number): void {
  state.revision = revision;
}

// --- staged edits ---------------------------------------------------------------

export class StageError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "StageError";
  }
}

const COMPONENT_KINDS: readonly ComponentKind[] = [
  "Patient",
  "HumanOperator",
  "Sensor",
  "InterfaceDevice",
  "MLController",
  "NonMLController",
  "CloudService",
  "Actuator",
  "NetworkElement",
];

const LINK_KINDS: readonly LinkKind[] = ["ControlAction", "Feedback", "DataFlow"];

interface EffectiveIds {
  components: Set<string>;
  links: Set<string>;
}

/** Component and link ids as they would stand after the staged edits apply. */
function effectiveIds(structure: StructureDto, staged: readonly EditOperation[]): EffectiveIds {
  const components = new Set(structure.components.map((c) => c.id));
  const links = new Set(structure.links.map((l) => l.id));
  for (const edit of staged) {
    switch (edit.op) {
      case "add_component":
        components.add(edit.component.id);
        break;
      case "remove_component":
        components.delete(edit.component_id);
        break;
      case "add_link":
        links.add(edit.link.id);
        break;
      case "remove_link":
        links.delete(edit.link_id);
        break;
      case "rename":
        break;
    }
  }
  return { components, links };
}

/**
 * Check one edit against the structure with earlier staged edits applied.
 * Throws StageError with the reason when the edit cannot be staged; the
 * editor uses this to block invalid input before it ever reaches the wire.
 */
export function checkEdit(
  structure: StructureDto,
  staged: readonly EditOperation[],
  edit: EditOperation,
): void {
  const ids = effectiveIds(structure, staged);
  switch (edit.op) {
    case "add_component": {
      const { id, name, kind } = edit.component;
      if (!id.trim()) throw new StageError("component id must be nonempty");
      if (!name.trim()) throw new StageError("component name must be nonempty");
      if (!COMPONENT_KINDS.includes(kind)) {
        throw new StageError(`unknown component kind '${kind}'`);
      }
      if (ids.components.has(id)) {
        throw new StageError(`component id '${id}' already exists`);
      }
      return;
    }
    case "remove_component": {
      if (!ids.components.has(edit.component_id)) {
        throw new StageError(`component '${edit.component_id}' does not exist`);
      }
      return;
    }
    case "add_link": {
      const { id, source, target, kind } = edit.link;
      if (!id.trim()) throw new StageError("link id must be nonempty");
      if (!LINK_KINDS.includes(kind)) {
        throw new StageError(`unknown link kind '${kind}'`);
      }
      if (ids.links.has(id)) {
        throw new StageError(`link id '${id}' already exists`);
      }
      if (!ids.components.has(source)) {
        throw new StageError(`link source '${source}' does not exist`);
      }
      if (!ids.components.has(target)) {
        throw new StageError(`link target '${target}' does not exist`);
      }
      return;
    }
    case "remove_link": {
      if (!ids.links.has(edit.link_id)) {
        throw new StageError(`link '${edit.link_id}' does not exist`);
      }
      return;
    }
    case "rename": {
      if (!edit.new_name.trim()) throw new StageError("new name must be nonempty");
      if (!ids.components.has(edit.component_id)) {
        throw new StageError(`component '${edit.component_id}' does not exist`);
      }
      return;
    }
  }
}

/** Stage an edit after validating it; returns the grown staged list. */
export function stageEdit(
  structure: StructureDto,
  staged: readonly EditOperation[],
  edit: EditOperation,
): EditOperation[] {
  checkEdit(structure, staged, edit);
  return [...staged, edit];
}

/** Structure as it would look with the staged edits applied, for previews. */
export function applyStaged(
  structure: StructureDto,
  staged: readonly EditOperation[],
): StructureDto {
  let components = structure.components.map((c) => ({ ...c }));
  let links = structure.links.map((l) => ({ ...l }));
  for (const edit of staged) {
    switch (edit.op) {
      case "add_component":
        components.push({
          id: edit.component.id,
          name: edit.component.name,
          kind: edit.component.kind,
          notes: edit.component.notes ?? "",
        });
        break;
      case "remove_component":
        components = components.filter((c) => c.id !== edit.component_id);
        links = links.filter(
          (l) => l.source !== edit.component_id && l.target !== edit.component_id,
        );
        break;
      case "add_link":
        links.push({
          id: edit.link.id,
          source: edit.link.source,
          target: edit.link.target,
          kind: edit.link.kind,
          channel: edit.link.channel ?? null,
        });
        break;
      case "remove_link":
        links = links.filter((l) => l.id !== edit.link_id);
        break;
      case "rename":
        for (const component of components) {
          if (component.id === edit.component_id) component.name = edit.new_name;
        }
        break;
    }
  }
  return { ...structure, components, links };
}
