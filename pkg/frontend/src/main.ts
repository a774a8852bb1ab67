/**
 * DOM bootstrap.  Everything interesting lives in the other modules; this
 * file only moves strings between them and the page.
 */

import { ApiClient, ApiError, fetchTransport } from "./api.js";
import type { Disposition, EditOperation, StructureEnvelope } from "./api.js";
import { createViewState } from "./state.js";
import { StructureEditor } from "./structureEditor.js";
import {
  GROUP_ORDER,
  STEP_TITLES,
  answerGroup,
  createWizard,
  currentGroup,
  markUnknown,
  missingGroups,
  nextStep,
  previousStep,
  submitProfile,
  type Wizard,
} from "./questionnaire.js";
import {
  applyFilters,
  canGenerate,
  degradationToast,
  generateScenario,
  provenanceBadge,
  rankedRows,
  setDisposition,
} from "./triage.js";
import {
  renderConflictDialog,
  renderFindings,
  renderProfile,
  renderReportSummary,
  renderScenario,
  renderStatsTable,
  renderSurfaceTable,
} from "./render.js";

const client = new ApiClient(fetchTransport(""));
const state = createViewState();
const editor = new StructureEditor(client, state);

function view(): HTMLElement {
  const element = document.getElementById("view");
  if (!element) throw new Error("missing #view container");
  return element;
}

function toast(message: string): void {
  const host = document.getElementById("toasts");
  if (!host) return;
  const node = document.createElement("div");
  node.className = "toast";
  node.textContent = message;
  host.appendChild(node);
  setTimeout(() => node.remove(), 8000);
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  text = "",
  className = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (text) node.textContent = text;
  if (className) node.className = className;
  return node;
}

function pre(text: string): HTMLPreElement {
  const node = el("pre");
  node.textContent = text;
  return node;
}

function errorText(error: unknown): string {
  if (error instanceof ApiError) return `${error.status}: ${error.detail}`;
  return error instanceof Error ? error.message : String(error);
}

// --- structure view -----------------------------------------------------------

async function showStructure(): Promise<void> {
  if (state.projectId === null) return;
  const envelope = await client.getStructure(state.projectId);
  state.revision = envelope.revision;
  renderStructure(envelope);
}

function renderStructure(envelope: StructureEnvelope): void {
  const root = view();
  root.replaceChildren();
  root.appendChild(el("h2", `Structure (revision ${envelope.revision})`));
  const rows = envelope.structure.components
    .map((c) => `${c.id} [${c.kind}] ${c.name}`)
    .concat(
      envelope.structure.links.map(
        (l) =>
          `${l.id}: ${l.source} -> ${l.target} [${l.kind}]` +
          (l.channel ? ` via ${l.channel}` : ""),
      ),
    );
  root.appendChild(pre(rows.join("\n")));
  root.appendChild(el("h3", "Validation"));
  root.appendChild(pre(renderFindings(envelope.findings)));

  root.appendChild(el("h3", `Staged edits (${state.stagedEdits.length})`));
  const staged = pre(
    state.stagedEdits.length === 0
      ? "(none)"
      : state.stagedEdits.map((edit) => JSON.stringify(edit)).join("\n"),
  );
  root.appendChild(staged);

  const editBox = el("textarea");
  editBox.rows = 4;
  editBox.cols = 80;
  editBox.placeholder =
    '{"op": "rename", "component_id": "sensor", "new_name": "Glucose probe"}';
  root.appendChild(editBox);
  const problem = el("div", "", "error");
  root.appendChild(problem);

  const stageButton = el("button", "Stage edit");
  stageButton.onclick = () => {
    problem.textContent = "";
    try {
      const edit = JSON.parse(editBox.value) as EditOperation;
      editor.stage(envelope.structure, edit);
      renderStructure(envelope);
    } catch (error) {
      problem.textContent = errorText(error);
    }
  };
  root.appendChild(stageButton);

  const submitButton = el("button", "Submit staged edits");
  submitButton.onclick = async () => {
    problem.textContent = "";
    try {
      const result = await editor.submit();
      if (result.kind === "applied") {
        renderStructure(result.envelope);
        return;
      }
      const replay = window.confirm(renderConflictDialog(result.report));
      if (replay) {
        const envelope = await editor.confirmReplay(result.report);
        renderStructure(envelope);
      } else {
        editor.discard();
        renderStructure(result.report.fresh);
      }
    } catch (error) {
      problem.textContent = errorText(error);
    }
  };
  root.appendChild(submitButton);
}

// --- questionnaire view ---------------------------------------------------------

let wizard: Wizard | null = null;

function showQuestionnaire(): void {
  const root = view();
  root.replaceChildren();
  root.appendChild(el("h2", "Technology questionnaire"));
  const componentInput = el("input");
  componentInput.placeholder = "component id";
  root.appendChild(componentInput);
  const startButton = el("button", "Start");
  startButton.onclick = () => {
    wizard = createWizard(componentInput.value.trim());
    renderWizard();
  };
  root.appendChild(startButton);
  if (wizard) renderWizard();
}

function renderWizard(): void {
  if (!wizard) return;
  const active = wizard;
  const root = view();
  root.replaceChildren();
  const group = currentGroup(active);
  root.appendChild(
    el("h2", `${active.component}: step ${active.step + 1} of ${GROUP_ORDER.length}`),
  );
  root.appendChild(el("h3", STEP_TITLES[group]));

  const answerBox = el("textarea");
  answerBox.rows = 6;
  answerBox.cols = 80;
  const existing = active.answers[group];
  answerBox.value =
    existing === undefined || existing === "unknown" ? "" : JSON.stringify(existing, null, 2);
  root.appendChild(answerBox);
  const problem = el("div", "", "error");
  root.appendChild(problem);

  const saveButton = el("button", "Save answers");
  saveButton.onclick = () => {
    try {
      answerGroup(active, group, JSON.parse(answerBox.value || "{}"));
      renderWizard();
    } catch (error) {
      problem.textContent = errorText(error);
    }
  };
  root.appendChild(saveButton);

  const unknownButton = el("button", "Mark group unknown");
  unknownButton.onclick = () => {
    markUnknown(active, group);
    renderWizard();
  };
  root.appendChild(unknownButton);

  const backButton = el("button", "Back");
  backButton.onclick = () => {
    previousStep(active);
    renderWizard();
  };
  root.appendChild(backButton);

  const forwardButton = el("button", "Next");
  forwardButton.onclick = () => {
    nextStep(active);
    renderWizard();
  };
  root.appendChild(forwardButton);

  const submitButton = el("button", "Submit profile");
  submitButton.onclick = async () => {
    problem.textContent = "";
    try {
      const outcome = await submitProfile(client, state, active);
      if (outcome.kind === "blocked") {
        problem.textContent = outcome.message;
        const firstStep = outcome.steps[0];
        if (firstStep !== undefined && firstStep >= 0) active.step = firstStep;
        renderWizard();
        return;
      }
      root.replaceChildren();
      root.appendChild(el("h2", `Profile saved (revision ${outcome.envelope.revision})`));
      root.appendChild(pre(renderProfile(outcome.envelope.profile)));
      wizard = null;
    } catch (error) {
      problem.textContent = errorText(error);
    }
  };
  root.appendChild(submitButton);

  const missing = missingGroups(active);
  if (missing.length > 0) {
    root.appendChild(el("div", `unanswered groups: ${missing.join(", ")}`));
  }
}

// --- triage view ----------------------------------------------------------------

async function showTriage(): Promise<void> {
  const envelope = await client.getSurface();
  state.revision = envelope.revision;
  const root = view();
  root.replaceChildren();
  root.appendChild(el("h2", `Attack surface (revision ${envelope.revision})`));

  const exploitabilityFilter = el("select");
  for (const option of ["All", "Remote", "Local", "Unknown"]) {
    exploitabilityFilter.appendChild(new Option(option, option));
  }
  exploitabilityFilter.value = state.triageFilters.exploitability;
  root.appendChild(exploitabilityFilter);

  const componentFilter = el("select");
  componentFilter.appendChild(new Option("All", "All"));
  for (const component of new Set(envelope.surface.entry_points.map((e) => e.component))) {
    componentFilter.appendChild(new Option(component, component));
  }
  componentFilter.value = state.triageFilters.component;
  root.appendChild(componentFilter);

  const table = pre("");
  root.appendChild(table);
  const redrawTable = () => {
    state.triageFilters = {
      exploitability: exploitabilityFilter.value as typeof state.triageFilters.exploitability,
      component: componentFilter.value,
    };
    const rows = applyFilters(rankedRows(envelope.surface), state.triageFilters);
    table.textContent = renderSurfaceTable(rows, envelope.surface.uncovered_components);
  };
  exploitabilityFilter.onchange = redrawTable;
  componentFilter.onchange = redrawTable;
  redrawTable();

  const rankInput = el("input");
  rankInput.placeholder = "entry point rank";
  const hazardInput = el("input");
  hazardInput.placeholder = "hazard id";
  const ucaInput = el("input");
  ucaInput.placeholder = "uca id";
  const attackInput = el("input");
  attackInput.placeholder = "attack pattern id";
  const gatewayInput = el("input");
  gatewayInput.placeholder = "gateway url (blank for fallback)";
  for (const input of [rankInput, hazardInput, ucaInput, attackInput, gatewayInput]) {
    root.appendChild(input);
  }
  const problem = el("div", "", "error");
  root.appendChild(problem);
  const scenarioPanel = el("div");

  const generateButton = el("button", "Generate scenario");
  generateButton.onclick = async () => {
    problem.textContent = "";
    state.triageSelection = {
      entryPoint: rankInput.value ? Number(rankInput.value) : null,
      hazard: hazardInput.value || null,
      uca: ucaInput.value || null,
    };
    if (!canGenerate(state.triageSelection)) {
      problem.textContent = "select an entry point, a hazard, and an unsafe control action first";
      return;
    }
    try {
      const result = await generateScenario(client, state, {
        attack: attackInput.value,
        ...(gatewayInput.value ? { gateway: gatewayInput.value } : { fallback: true }),
      });
      const scenario = result.stored.scenario;
      scenarioPanel.replaceChildren();
      const badge = provenanceBadge(scenario);
      scenarioPanel.appendChild(
        el("span", badge, badge === "Gateway" ? "badge badge-gateway" : "badge badge-fallback"),
      );
      const degraded = degradationToast(scenario);
      if (degraded) toast(degraded);
      scenarioPanel.appendChild(pre(renderScenario(result.stored)));

      const dispositionSelect = el("select");
      for (const option of ["Open", "Mitigated", "Rejected"]) {
        dispositionSelect.appendChild(new Option(option, option));
      }
      const noteInput = el("input");
      noteInput.placeholder = "disposition note";
      const applyButton = el("button", "Apply disposition");
      applyButton.onclick = async () => {
        try {
          const patched = await setDisposition(
            client,
            state,
            result.stored.id,
            dispositionSelect.value as Disposition,
            noteInput.value,
          );
          scenarioPanel.replaceChildren(pre(renderScenario(patched.stored)));
        } catch (error) {
          problem.textContent = errorText(error);
        }
      };
      scenarioPanel.appendChild(dispositionSelect);
      scenarioPanel.appendChild(noteInput);
      scenarioPanel.appendChild(applyButton);
    } catch (error) {
      problem.textContent = errorText(error);
    }
  };
  root.appendChild(generateButton);
  root.appendChild(scenarioPanel);
}

// --- report view ----------------------------------------------------------------

async function showReport(): Promise<void> {
  const report = await client.getReport();
  const stats = await client.getStats("event_type");
  state.revision = stats.revision;
  const root = view();
  root.replaceChildren();
  root.appendChild(el("h2", "Report"));
  root.appendChild(pre(renderReportSummary(report)));
  root.appendChild(el("h3", "Adverse event statistics"));
  root.appendChild(pre(renderStatsTable(stats)));
}

// --- boot -----------------------------------------------------------------------

async function boot(): Promise<void> {
  const nav = document.getElementById("nav");
  if (!nav) return;
  const views: [string, () => void | Promise<void>][] = [
    ["Structure", showStructure],
    ["Questionnaire", showQuestionnaire],
    ["Triage", showTriage],
    ["Report", showReport],
  ];
  for (const [label, show] of views) {
    const button = el("button", label);
    button.onclick = () => {
      void Promise.resolve(show()).catch((error) => toast(errorText(error)));
    };
    nav.appendChild(button);
  }
  try {
    const projects = await client.listProjects();
    const first = projects[0];
    if (first === undefined) {
      view().appendChild(el("p", "no project found; create one via the API"));
      return;
    }
    state.projectId = first.id;
    state.revision = first.revision;
    await showStructure();
  } catch (error) {
    toast(errorText(error));
  }
}

void boot();
