import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import type { EditOperation, StructureDto } from "../src/api.js";
import {
  StageError,
  applyStaged,
  createViewState,
  noteRevision,
  sequentialOpIds,
  stageEdit,
} from "../src/state.js";
import { StructureEditor, classifyStagedEdits } from "../src/structureEditor.js";
import { renderConflictDialog } from "../src/render.js";
import { loadCassette } from "./cassette.js";
import { foreignNumbers } from "./helpers.js";

const ADD_RELAY: EditOperation = {
  op: "add_component",
  component: { id: "relay", name: "Edge relay", kind: "NetworkElement", notes: "" },
};
const LINK_RELAY: EditOperation = {
  op: "add_link",
  link: { id: "sensor_to_relay", source: "sensor", target: "relay", kind: "DataFlow", channel: "wifi" },
};
const RENAME_RELAY: EditOperation = {
  op: "rename",
  component_id: "relay",
  new_name: "Edge relay unit",
};

function sortedById(structure: StructureDto): StructureDto {
  return {
    ...structure,
    components: [...structure.components].sort((a, b) => a.id.localeCompare(b.id)),
    links: [...structure.links].sort((a, b) => a.id.localeCompare(b.id)),
  };
}

describe("staged edit validation", () => {
  async function fixtureStructure(): Promise<StructureDto> {
    const cassette = loadCassette("structure_edit");
    const client = new ApiClient(cassette.transport);
    const envelope = await client.getStructure("dnav");
    return envelope.structure;
  }

  it("blocks a link whose source or target does not exist", async () => {
    const structure = await fixtureStructure();
    expect(() =>
      stageEdit(structure, [], {
        op: "add_link",
        link: { id: "x", source: "ghost", target: "sensor", kind: "DataFlow" },
      }),
    ).toThrow(StageError);
    expect(() =>
      stageEdit(structure, [], {
        op: "add_link",
        link: { id: "x", source: "sensor", target: "ghost", kind: "DataFlow" },
      }),
    ).toThrow("link target 'ghost' does not exist");
  });

  it("blocks duplicate component and link ids, existing or staged", async () => {
    const structure = await fixtureStructure();
    expect(() =>
      stageEdit(structure, [], {
        op: "add_component",
        component: { id: "sensor", name: "Again", kind: "Sensor" },
      }),
    ).toThrow("component id 'sensor' already exists");
    const staged = stageEdit(structure, [], ADD_RELAY);
    expect(() => stageEdit(structure, staged, ADD_RELAY)).toThrow(
      "component id 'relay' already exists",
    );
    expect(() =>
      stageEdit(structure, [], {
        op: "add_link",
        link: { id: "sensor_to_network", source: "sensor", target: "network", kind: "DataFlow" },
      }),
    ).toThrow("link id 'sensor_to_network' already exists");
  });

  it("blocks rename and removal of unknown elements", async () => {
    const structure = await fixtureStructure();
    expect(() =>
      stageEdit(structure, [], { op: "rename", component_id: "ghost", new_name: "X" }),
    ).toThrow("component 'ghost' does not exist");
    expect(() =>
      stageEdit(structure, [], { op: "remove_component", component_id: "ghost" }),
    ).toThrow(StageError);
    expect(() => stageEdit(structure, [], { op: "remove_link", link_id: "ghost" })).toThrow(
      StageError,
    );
  });

  it("lets a staged component be linked and renamed before submission", async () => {
    const structure = await fixtureStructure();
    let staged = stageEdit(structure, [], ADD_RELAY);
    staged = stageEdit(structure, staged, LINK_RELAY);
    staged = stageEdit(structure, staged, RENAME_RELAY);
    expect(staged).toHaveLength(3);
  });
});

describe("structure edit round trip", () => {
  it("applies staged edits and matches the service's resulting structure", async () => {
    const cassette = loadCassette("structure_edit");
    const client = new ApiClient(cassette.transport);
    const state = createViewState(sequentialOpIds());
    state.projectId = "dnav";
    const editor = new StructureEditor(client, state);

    const initial = await client.getStructure("dnav");
    noteRevision(state, initial.revision);
    expect(initial.revision).toBe(7);
    expect(initial.structure.components).toHaveLength(8);
    expect(initial.structure.links).toHaveLength(11);

    editor.stage(initial.structure, ADD_RELAY);
    editor.stage(initial.structure, LINK_RELAY);
    editor.stage(initial.structure, RENAME_RELAY);
    const preview = applyStaged(initial.structure, state.stagedEdits);

    const result = await editor.submit();
    expect(result.kind).toBe("applied");
    if (result.kind !== "applied") return;
    const applied = result.envelope;
    expect(applied.revision).toBe(initial.revision + 1);
    expect(state.revision).toBe(applied.revision);
    expect(state.stagedEdits).toHaveLength(0);

    expect(sortedById(preview)).toEqual(applied.structure);
    const relay = applied.structure.components.find((c) => c.id === "relay");
    expect(relay?.name).toBe("Edge relay unit");
    const link = applied.structure.links.find((l) => l.id === "sensor_to_relay");
    expect(link?.channel).toBe("wifi");

    expect(cassette.remaining()).toBe(3);
  });
});

describe("stale revision conflict", () => {
  it("reloads, offers a replay, and resubmits under the original op id", async () => {
    const cassette = loadCassette("structure_edit");
    const client = new ApiClient(cassette.transport);
    const state = createViewState(sequentialOpIds());
    state.projectId = "dnav";
    const editor = new StructureEditor(client, state);

    const initial = await client.getStructure("dnav");
    noteRevision(state, initial.revision);
    editor.stage(initial.structure, ADD_RELAY);
    editor.stage(initial.structure, LINK_RELAY);
    editor.stage(initial.structure, RENAME_RELAY);
    const first = await editor.submit();
    expect(first.kind).toBe("applied");
    if (first.kind !== "applied") return;

    // A second view of the project is still at revision 7 and edits there.
    state.revision = 7;
    editor.stage(first.envelope.structure, {
      op: "rename",
      component_id: "sensor",
      new_name: "Glucose probe",
    });
    const result = await editor.submit();
    expect(result.kind).toBe("conflict");
    if (result.kind !== "conflict") return;

    const report = result.report;
    expect(report.detail).toBe("stale revision: client has 7, project is at 8");
    expect(report.staleRevision).toBe(7);
    expect(report.freshRevision).toBe(8);
    expect(report.replayable).toHaveLength(1);
    expect(report.dropped).toHaveLength(0);
    expect(state.revision).toBe(8);

    const dialog = renderConflictDialog(report);
    expect(dialog).toContain(report.detail);
    expect(dialog).toContain("rename 'sensor' to 'Glucose probe'");
    expect(dialog).toContain("replay the remaining edits at the current revision?");
    expect(foreignNumbers(dialog, report)).toEqual([]);

    const replayed = await editor.confirmReplay(report);
    expect(replayed.revision).toBe(9);
    expect(state.revision).toBe(9);
    expect(state.stagedEdits).toHaveLength(0);
    const sensor = replayed.structure.components.find((c) => c.id === "sensor");
    expect(sensor?.name).toBe("Glucose probe");

    cassette.assertDone();
  });

  it("drops edits the concurrent change invalidated and says why", async () => {
    const cassette = loadCassette("structure_edit");
    const client = new ApiClient(cassette.transport);
    const fresh = await client.getStructure("dnav");

    const staged: EditOperation[] = [
      { op: "rename", component_id: "ghost", new_name: "Gone" },
      { op: "remove_link", link_id: "sensor_to_network" },
      { op: "add_component", component: { id: "sensor", name: "Dup", kind: "Sensor" } },
    ];
    const report = classifyStagedEdits(fresh, staged, {
      detail: "stale revision: client has 6, project is at 7",
      staleRevision: 6,
      opId: "op-9",
    });
    expect(report.replayable).toEqual([{ op: "remove_link", link_id: "sensor_to_network" }]);
    expect(report.dropped).toHaveLength(2);
    expect(report.dropped[0]?.reason).toBe("component 'ghost' does not exist");
    expect(report.dropped[1]?.reason).toBe("component id 'sensor' already exists");

    const dialog = renderConflictDialog(report);
    expect(dialog).toContain("edits that no longer apply:");
    expect(dialog).toContain("component 'ghost' does not exist");
  });
});
