/**
 * Four-step technology questionnaire wizard.
 *
 * One step per factor group, in the same order the service canonicalizes.
 * Submission is blocked locally while groups are unanswered, with the exact
 * message the service would return, so the analyst sees identical wording
 * whether the check runs client or server side.  Marking a whole group
 * "unknown" answers it.
 */

import { ApiClient, ApiError } from "./api.js";
import type { ProfileEnvelope } from "./api.js";
import { noteRevision } from "./state.js";
import type { ViewState } from "./state.js";

export const GROUP_ORDER = [
  "human_interaction",
  "communication",
  "em_susceptibility",
  "dependencies",
] as const;

export type FactorGroup = (typeof GROUP_ORDER)[number];

/** Titles for the wizard's step header, indexed like GROUP_ORDER. */
export const STEP_TITLES: Record<FactorGroup, string> = {
  human_interaction: "Human interaction",
  communication: "Communication",
  em_susceptibility: "Electromagnetic susceptibility",
  dependencies: "Dependencies",
};

export type GroupAnswer = "unknown" | Record<string, unknown>;

export interface Wizard {
  component: string;
  step: number;
  answers: Partial<Record<FactorGroup, GroupAnswer>>;
}

export function createWizard(component: string): Wizard {
  return { component, step: 0, answers: {} };
}

export function currentGroup(wizard: Wizard): FactorGroup {
  const group = GROUP_ORDER[wizard.step];
  if (group === undefined) throw new Error(`no step ${wizard.step}`);
  return group;
}

export function answerGroup(wizard: Wizard, group: FactorGroup, answer: GroupAnswer): void {
  wizard.answers[group] = answer;
}

export function markUnknown(wizard: Wizard, group: FactorGroup): void {
  wizard.answers[group] = "unknown";
}

export function nextStep(wizard: Wizard): void {
  if (wizard.step < GROUP_ORDER.length - 1) wizard.step += 1;
}

export function previousStep(wizard: Wizard): void {
  if (wizard.step > 0) wizard.step -= 1;
}

/** Unanswered groups in canonical order. */
export function missingGroups(wizard: Wizard): FactorGroup[] {
  return GROUP_ORDER.filter((group) => wizard.answers[group] === undefined);
}

/** The service's wording for an incomplete questionnaire, reproduced. */
export function blockMessage(missing: readonly string[]): string {
  return "questionnaire incomplete; missing groups: " + missing.join(", ");
}

export function stepForGroup(group: string): number {
  return GROUP_ORDER.indexOf(group as FactorGroup);
}

/** Wire payload: answered groups only, unknown kept as the literal string. */
export function toResponses(wizard: Wizard): Record<string, unknown> {
  const responses: Record<string, unknown> = {};
  for (const group of GROUP_ORDER) {
    const answer = wizard.answers[group];
    if (answer !== undefined) responses[group] = answer;
  }
  return responses;
}

export type SubmitOutcome =
  | { kind: "saved"; envelope: ProfileEnvelope }
  | { kind: "blocked"; message: string; missing: string[]; steps: number[] };

/**
 * Submit the wizard's answers as the component's profile.
 *
 * Unanswered groups block the submission before any request is made; the
 * block carries the affected step indices so the form can jump there.  A
 * service-side incompleteness rejection (possible when answers were staged
 * on another tab) maps back onto steps the same way.
 */
export async function submitProfile(
  client: ApiClient,
  state: ViewState,
  wizard: Wizard,
): Promise<SubmitOutcome> {
  const missing = missingGroups(wizard);
  if (missing.length > 0) {
    return {
      kind: "blocked",
      message: blockMessage(missing),
      missing,
      steps: missing.map(stepForGroup),
    };
  }
  if (state.revision === null) throw new Error("no project loaded");
  try {
    const envelope = await client.putProfile(wizard.component, {
      revision: state.revision,
      op_id: state.nextOpId(),
      responses: toResponses(wizard),
    });
    noteRevision(state, envelope.revision);
    return { kind: "saved", envelope };
  } catch (error) {
    if (error instanceof ApiError && error.status === 422 && error.missingGroups.length > 0) {
      return {
        kind: "blocked",
        message: error.detail,
        missing: error.missingGroups,
        steps: error.missingGroups.map(stepForGroup),
      };
    }
    throw error;
  }
}
