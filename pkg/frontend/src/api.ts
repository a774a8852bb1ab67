/**
 * Typed HTTP client for the risk assessment service.
 *
 * The workbench performs no domain computation: every value it shows comes
 * out of a response body defined here.  The transport is injectable so tests
 * can replay recorded service responses instead of opening sockets.
 */

export interface HttpRequest {
  method: string;
  path: string;
  body?: unknown;
}

export interface HttpResponse {
  status: number;
  json: unknown;
}

export type Transport = (request: HttpRequest) => Promise<HttpResponse>;

/** Service error decoded from a non-2xx response body. */
export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;
  readonly missingGroups: string[];
  readonly context: unknown;

  constructor(status: number, body: unknown) {
    const record = (body ?? {}) as Record<string, unknown>;
    const detail = typeof record["detail"] === "string" ? record["detail"] : `HTTP ${status}`;
    super(detail);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
    this.missingGroups = Array.isArray(record["missing_groups"])
      ? record["missing_groups"].map(String)
      : [];
    this.context = record["context"];
  }
}

// --- wire shapes ------------------------------------------------------------

export type ComponentKind =
  | "Patient"
  | "HumanOperator"
  | "Sensor"
  | "InterfaceDevice"
  | "MLController"
  | "NonMLController"
  | "CloudService"
  | "Actuator"
  | "NetworkElement";

export type LinkKind = "ControlAction" | "Feedback" | "DataFlow";

export type Exploitability = "Local" | "Remote" | "Unknown";

export type Provenance = "Gateway" | "Fallback";

export type Disposition = "Open" | "Mitigated" | "Rejected";

export interface ComponentDto {
  id: string;
  name: string;
  kind: ComponentKind;
  notes: string;
}

export interface LinkDto {
  id: string;
  source: string;
  target: string;
  kind: LinkKind;
  channel: string | null;
}

export interface StructureDto {
  schema_version: number;
  device_name: string;
  components: ComponentDto[];
  links: LinkDto[];
  metadata: Record<string, string>;
}

export interface FindingDto {
  element: string;
  rule: string;
  message: string;
}

export interface StructureEnvelope {
  revision: number;
  structure: StructureDto;
  findings: FindingDto[];
}

export interface ProjectSummary {
  id: string;
  revision: number;
  device: string;
  schema_version: number;
}

export type Tristate = boolean | "unknown";

export interface ProfileDto {
  component: string;
  human_interaction: {
    data_entry: Tristate;
    authentication: Tristate;
    validation: Tristate;
    anomaly_detection: Tristate;
    notes: string;
  };
  communication: {
    protocol: string;
    version: string;
    encrypted: Tristate;
  };
  em_susceptibility: {
    susceptible: Tristate;
    impact: string;
    mitigation: string;
  };
  dependencies: {
    operating_system: { name: string; version: string }[];
    libraries: { name: string; version: string }[];
    firmware: { name: string; version: string }[];
    hardware: { name: string; version: string }[];
  };
}

export interface ProfilesEnvelope {
  revision: number;
  profiles: ProfileDto[];
}

export interface ProfileEnvelope {
  revision: number;
  profile: ProfileDto;
}

export interface VulnerabilityDto {
  id: string;
  source: string;
  summary: string;
  published: string;
  severity: number | null;
  exploitability: Exploitability;
  attack_vector: string | null;
  public_exploit: boolean;
  affected_terms: string[];
  related_ids: string[];
}

export interface EntryPointDto {
  component: string;
  technology: string;
  vulnerability: VulnerabilityDto;
  exploitability: Exploitability;
  injection_path: string[];
  rank_score: number;
}

export interface SurfaceDto {
  device_name: string;
  entry_points: EntryPointDto[];
  uncovered_components: string[];
}

export interface SurfaceEnvelope {
  revision: number;
  surface: SurfaceDto;
}

export interface ScenarioStepDto {
  category: string;
  name: string;
  description: string;
}

export interface ScenarioDto {
  provenance: Provenance;
  steps: ScenarioStepDto[];
  warnings: string[];
  raw_gateway_output: string;
  request: {
    system_description: string;
    data_flow: string[];
    target_component: string;
    target_technology: string;
    ml_attack: Record<string, unknown>;
    vulnerability: VulnerabilityDto;
    hazard: { id: string; description: string; linked_losses: string[] };
    uca: Record<string, unknown>;
  };
}

export interface StoredScenarioDto {
  id: string;
  scenario: ScenarioDto;
  disposition: Disposition;
  note: string;
}

export interface ScenarioEnvelope {
  revision: number;
  stored: StoredScenarioDto;
}

export interface StatsEnvelope {
  revision: number;
  table: {
    group_by: string;
    rows: { key: string; count: number; share: number }[];
    total: number;
  };
  snapshots: SnapshotInfo[];
}

export interface SnapshotInfo {
  file: string;
  dataset: string;
  declared_date: string;
  records: number;
}

export interface StructuredReport {
  executive_summary: Record<string, number | string>;
  attack_surface: {
    rows: {
      rank: number;
      component: string;
      technology: string;
      vulnerability: string;
      exploitability: string;
      score: number;
      injection_path: string[];
    }[];
    uncovered_components: string[];
  };
  scenarios: unknown[];
  cast: unknown[];
  provenance: { snapshots: SnapshotInfo[] };
}

// --- edit operations ----------------------------------------------------------

export type EditOperation =
  | { op: "add_component"; component: { id: string; name: string; kind: ComponentKind; notes?: string } }
  | { op: "remove_component"; component_id: string }
  | { op: "add_link"; link: { id: string; source: string; target: string; kind: LinkKind; channel?: string } }
  | { op: "remove_link"; link_id: string }
  | { op: "rename"; component_id: string; new_name: string };

// --- client -------------------------------------------------------------------

async function expectJson<T>(transport: Transport, request: HttpRequest): Promise<T> {
  const response = await transport(request);
  if (response.status >= 400) {
    throw new ApiError(response.status, response.json);
  }
  return response.json as T;
}

export class ApiClient {
  constructor(private readonly transport: Transport) {}

  listProjects(): Promise<ProjectSummary[]> {
    return expectJson(this.transport, { method: "GET", path: "/projects" });
  }

  createProject(body: {
    device: string;
    id?: string;
    ml_location?: string;
    description?: string;
  }): Promise<ProjectSummary> {
    return expectJson(this.transport, { method: "POST", path: "/projects", body });
  }

  getStructure(projectId: string): Promise<StructureEnvelope> {
    return expectJson(this.transport, {
      method: "GET",
      path: `/projects/${projectId}/structure`,
    });
  }

  putStructureOperations(
    projectId: string,
    body: { revision: number; op_id: string; operations: EditOperation[] },
  ): Promise<StructureEnvelope> {
    return expectJson(this.transport, {
      method: "PUT",
      path: `/projects/${projectId}/structure`,
      body,
    });
  }

  listProfiles(): Promise<ProfilesEnvelope> {
    return expectJson(this.transport, { method: "GET", path: "/profiles" });
  }

  putProfile(
    component: string,
    body: { revision: number; op_id: string; responses: Record<string, unknown> },
  ): Promise<ProfileEnvelope> {
    return expectJson(this.transport, {
      method: "PUT",
      path: `/profiles/${component}`,
      body,
    });
  }

  searchVulns(keywords: string[], limit?: number): Promise<{ results: VulnerabilityDto[] }> {
    const body: Record<string, unknown> = { keywords };
    if (limit !== undefined) body["limit"] = limit;
    return expectJson(this.transport, { method: "POST", path: "/vulns/search", body });
  }

  getSurface(): Promise<SurfaceEnvelope> {
    return expectJson(this.transport, { method: "GET", path: "/surface" });
  }

  computeSurface(body: { revision: number; op_id: string }): Promise<SurfaceEnvelope> {
    return expectJson(this.transport, { method: "POST", path: "/surface", body });
  }

  listScenarios(): Promise<{ revision: number; scenarios: StoredScenarioDto[] }> {
    return expectJson(this.transport, { method: "GET", path: "/scenarios" });
  }

  createScenario(body: {
    revision: number;
    op_id: string;
    entry_point: number;
    attack: string;
    hazard: string;
    uca: string;
    fallback?: boolean;
    gateway?: string;
  }): Promise<ScenarioEnvelope> {
    return expectJson(this.transport, { method: "POST", path: "/scenarios", body });
  }

  patchScenario(
    scenarioId: string,
    body: { revision: number; op_id: string; disposition: Disposition; note?: string },
  ): Promise<ScenarioEnvelope> {
    return expectJson(this.transport, {
      method: "PATCH",
      path: `/scenarios/${scenarioId}`,
      body,
    });
  }

  listCast(): Promise<{ revision: number; analyses: unknown[] }> {
    return expectJson(this.transport, { method: "GET", path: "/cast" });
  }

  createCast(body: {
    revision: number;
    op_id: string;
    narrative: string;
    id?: string;
  }): Promise<{ revision: number; stored: unknown }> {
    return expectJson(this.transport, { method: "POST", path: "/cast", body });
  }

  getStats(groupBy: string): Promise<StatsEnvelope> {
    return expectJson(this.transport, {
      method: "GET",
      path: `/stats?group_by=${encodeURIComponent(groupBy)}`,
    });
  }

  getReport(): Promise<StructuredReport> {
    return expectJson(this.transport, { method: "GET", path: "/report?format=structured" });
  }
}

/** Transport backed by the browser fetch API. */
export function fetchTransport(baseUrl: string): Transport {
  const root = baseUrl.replace(/\/$/, "");
  return async (request) => {
    const response = await fetch(root + request.path, {
      method: request.method,
      headers: request.body === undefined ? {} : { "content-type": "application/json" },
      body: request.body === undefined ? undefined : JSON.stringify(request.body),
    });
    return { status: response.status, json: await response.json() };
  };
}
