/**
 * Staged control structure editing.
 *
 * Edits accumulate client side and go to the service as one operation list.
 * A stale-revision conflict triggers a reload: staged edits still valid
 * against the fresh structure are offered for replay, the rest are reported
 * as dropped, and nothing is resubmitted until the analyst confirms.
 */

import { ApiClient, ApiError } from "./api.js";
import type { EditOperation, StructureEnvelope } from "./api.js";
import { checkEdit, noteRevision, stageEdit } from "./state.js";
import type { ViewState } from "./state.js";

export interface DroppedEdit {
  edit: EditOperation;
  reason: string;
}

/** Data behind the conflict dialog shown after a 409. */
export interface ConflictReport {
  detail: string;
  staleRevision: number;
  freshRevision: number;
  fresh: StructureEnvelope;
  replayable: EditOperation[];
  dropped: DroppedEdit[];
  opId: string;
}

export type SubmitResult =
  | { kind: "applied"; envelope: StructureEnvelope }
  | { kind: "conflict"; report: ConflictReport };

export class StructureEditor {
  constructor(
    private readonly client: ApiClient,
    private readonly state: ViewState,
  ) {}

  /** Validate and stage one edit; throws StageError when it cannot apply. */
  stage(structure: StructureEnvelope["structure"], edit: EditOperation): void {
    this.state.stagedEdits = stageEdit(structure, this.state.stagedEdits, edit);
  }

  discard(): void {
    this.state.stagedEdits = [];
  }

  /**
   * Submit the staged edits at the revision last seen from the server.
   * On success the staged list clears.  On a stale-revision conflict the
   * fresh structure is fetched and the staged edits are classified; the
   * caller decides whether to replay via confirmReplay.
   */
  async submit(): Promise<SubmitResult> {
    const { projectId, revision } = this.state;
    if (projectId === null || revision === null) {
      throw new Error("no project loaded");
    }
    if (this.state.stagedEdits.length === 0) {
      throw new Error("nothing staged");
    }
    const opId = this.state.nextOpId();
    const operations = [...this.state.stagedEdits];
    try {
      const envelope = await this.client.putStructureOperations(projectId, {
        revision,
        op_id: opId,
        operations,
      });
      this.state.stagedEdits = [];
      noteRevision(this.state, envelope.revision);
      return { kind: "applied", envelope };
    } catch (error) {
      if (!(error instanceof ApiError) || error.status !== 409) throw error;
      const fresh = await this.client.getStructure(projectId);
      noteRevision(this.state, fresh.revision);
      const report = classifyStagedEdits(fresh, operations, {
        detail: error.detail,
        staleRevision: revision,
        opId,
      });
      return { kind: "conflict", report };
    }
  }

  /**
   * Replay the surviving edits at the fresh revision after the analyst
   * confirms the conflict dialog.  The original op id is reused so a retry
   * of a submission the server already applied cannot apply twice.
   */
  async confirmReplay(report: ConflictReport): Promise<StructureEnvelope> {
    const { projectId } = this.state;
    if (projectId === null) throw new Error("no project loaded");
    if (report.replayable.length === 0) {
      this.state.stagedEdits = [];
      return report.fresh;
    }
    const envelope = await this.client.putStructureOperations(projectId, {
      revision: report.freshRevision,
      op_id: report.opId,
      operations: report.replayable,
    });
    this.state.stagedEdits = [];
    noteRevision(this.state, envelope.revision);
    return envelope;
  }
}

/**
 * Split staged edits into those still valid against the fresh structure and
 * those invalidated by the concurrent change, each with the reason.
 */
export function classifyStagedEdits(
  fresh: StructureEnvelope,
  staged: readonly EditOperation[],
  context: { detail: string; staleRevision: number; opId: string },
): ConflictReport {
  const replayable: EditOperation[] = [];
  const dropped: DroppedEdit[] = [];
  for (const edit of staged) {
    try {
      checkEdit(fresh.structure, replayable, edit);
      replayable.push(edit);
    } catch (error) {
      dropped.push({ edit, reason: error instanceof Error ? error.message : String(error) });
    }
  }
  return {
    detail: context.detail,
    staleRevision: context.staleRevision,
    freshRevision: fresh.revision,
    fresh,
    replayable,
    dropped,
    opId: context.opId,
  };
}
