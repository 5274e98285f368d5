import type {
  AnalysisReport,
  ApiErrorBody,
  CasesResponse,
  ImportResponse,
  Priority,
  Project,
  ProjectRef,
  Requirement,
  StoriesResponse,
  TestCase,
} from "./types.js";

/** Non-2xx response: the service always answers with an ApiError JSON body. */
export class ApiError extends Error {
  readonly body: ApiErrorBody;

  constructor(body: ApiErrorBody) {
    super(body.message);
    this.name = "ApiError";
    this.body = body;
  }

  get status(): number {
    return this.body.status;
  }

  get code(): string {
    return this.body.code;
  }
}

/**
 * Typed client for the generation service. The base URL is the single piece
 * of configuration; every call goes through the JSON API, never to an LLM.
 */
export class ApiClient {
  readonly baseUrl: string;

  constructor(baseUrl = "") {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(method: string, path: string, payload?: unknown): Promise<T> {
    const response = await globalThis.fetch(this.baseUrl + path, {
      method,
      headers: payload === undefined ? undefined : { "Content-Type": "application/json" },
      body: payload === undefined ? undefined : JSON.stringify(payload),
    });
    if (!response.ok) {
      throw new ApiError((await response.json()) as ApiErrorBody);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/api/health");
  }

  listProjects(): Promise<ProjectRef[]> {
    return this.request("GET", "/api/projects");
  }

  createProject(name: string): Promise<Project> {
    return this.request("POST", "/api/projects", { name });
  }

  getProject(projectId: string): Promise<Project> {
    return this.request("GET", `/api/projects/${projectId}`);
  }

  addRequirement(projectId: string, text: string): Promise<Requirement> {
    return this.request("POST", `/api/projects/${projectId}/requirements`, { text });
  }

  importStories(projectId: string, text: string, format: "json" | "csv"): Promise<ImportResponse> {
    return this.request("POST", `/api/projects/${projectId}/stories:import`, { text, format });
  }

  generateStories(projectId: string): Promise<StoriesResponse> {
    return this.request("POST", `/api/projects/${projectId}/stories:generate`, {});
  }

  generateTestcases(storyId: string): Promise<CasesResponse> {
    return this.request("POST", `/api/stories/${storyId}/testcases:generate`, {});
  }

  setCasePriority(caseId: string, priority: Priority): Promise<TestCase> {
    return this.request("PATCH", `/api/testcases/${caseId}`, { priority });
  }

  analysis(projectId: string): Promise<AnalysisReport> {
    return this.request("GET", `/api/projects/${projectId}/analysis`);
  }

  /** CSV bytes exactly as the server produced them; no reshaping client-side. */
  async exportCsv(projectId: string): Promise<string> {
    const response = await globalThis.fetch(
      `${this.baseUrl}/api/projects/${projectId}/export.csv`,
    );
    if (!response.ok) {
      throw new ApiError((await response.json()) as ApiErrorBody);
    }
    return response.text();
  }
}
