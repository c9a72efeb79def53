/** Typed fetch client for the cinescore HTTP API. */

import type {
  EvaluationView,
  JobView,
  ProjectView,
  RegistryView,
  SpotsPayload,
  TranscriptsView,
} from "./types.js";

/** Header carrying the optimistic-concurrency precondition. */
export const REVISION_HEADER = "If-Match-Revision";

/** A non-2xx response, with whatever structured detail the body carried. */
export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;
  /** Parser diagnostics, one string per problem (422 responses). */
  readonly diagnostics: readonly string[];
  /** Revision the precondition named (409 conflict responses). */
  readonly expected: number | null;
  /** Revision the server actually holds (409 conflict responses). */
  readonly actual: number | null;

  constructor(status: number, body: unknown) {
    const record = (typeof body === "object" && body !== null ? body : {}) as Record<
      string,
      unknown
    >;
    const detail = typeof record.detail === "string" ? record.detail : `HTTP ${status}`;
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
    this.diagnostics = Array.isArray(record.diagnostics)
      ? record.diagnostics.filter((d): d is string => typeof d === "string")
      : [];
    this.expected = typeof record.expected === "number" ? record.expected : null;
    this.actual = typeof record.actual === "number" ? record.actual : null;
  }

  get isRevisionConflict(): boolean {
    return this.status === 409 && this.actual !== null;
  }
}

export interface ClientOptions {
  baseUrl: string;
  /** Injectable for tests; defaults to the global fetch. */
  fetchImpl?: typeof fetch;
}

interface RequestOptions {
  /** JSON body, serialized with JSON.stringify. */
  json?: unknown;
  /** Raw request body, sent as-is (scheme documents). */
  text?: string;
  /** Value for the If-Match-Revision header, when a precondition applies. */
  revision?: number;
}

export class StudioClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: typeof fetch;

  constructor(options: ClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/+$/, "");
    this.fetchImpl = options.fetchImpl ?? fetch;
  }

  private async request<T>(method: string, path: string, options: RequestOptions = {}): Promise<T> {
    const response = await this.send(method, path, options);
    return (await response.json()) as T;
  }

  private async send(method: string, path: string, options: RequestOptions = {}): Promise<Response> {
    const headers: Record<string, string> = {};
    let body: string | undefined;
    if (options.json !== undefined) {
      headers["Content-Type"] = "application/json";
      body = JSON.stringify(options.json);
    } else if (options.text !== undefined) {
      headers["Content-Type"] = "application/json";
      body = options.text;
    }
    if (options.revision !== undefined) {
      headers[REVISION_HEADER] = String(options.revision);
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, { method, headers, body });
    if (!response.ok) {
      let payload: unknown = null;
      try {
        payload = await response.json();
      } catch {
        // non-JSON error body; ApiError falls back to the status line
      }
      throw new ApiError(response.status, payload);
    }
    return response;
  }

  listProjects(): Promise<{ projects: string[] }> {
    return this.request("GET", "/projects");
  }

  createProject(body: { demo?: boolean; clip?: string; id?: string }): Promise<ProjectView> {
    return this.request("POST", "/projects", { json: body });
  }

  getProject(id: string): Promise<ProjectView> {
    return this.request("GET", `/projects/${encodeURIComponent(id)}`);
  }

  registry(): Promise<RegistryView> {
    return this.request("GET", "/registry");
  }

  putSpots(id: string, spots: SpotsPayload, revision?: number): Promise<ProjectView> {
    return this.request("PUT", `/projects/${encodeURIComponent(id)}/spots`, {
      json: spots,
      revision,
    });
  }

  putDescription(id: string, description: string, revision?: number): Promise<ProjectView> {
    return this.request("PUT", `/projects/${encodeURIComponent(id)}/description`, {
      json: { description },
      revision,
    });
  }

  putAbc(id: string, abc: string, revision?: number): Promise<ProjectView> {
    return this.request("PUT", `/projects/${encodeURIComponent(id)}/abc`, {
      json: { abc },
      revision,
    });
  }

  /** The body is the scheme JSON document itself, not a wrapper object. */
  putScheme(id: string, schemeText: string, revision?: number): Promise<ProjectView> {
    return this.request("PUT", `/projects/${encodeURIComponent(id)}/scheme`, {
      text: schemeText,
      revision,
    });
  }

  spot(id: string, revision?: number): Promise<ProjectView> {
    return this.request("POST", `/projects/${encodeURIComponent(id)}/spot`, { revision });
  }

  describe(id: string, revision?: number): Promise<ProjectView> {
    return this.request("POST", `/projects/${encodeURIComponent(id)}/describe`, { revision });
  }

  /** Accepted as a background job; poll the returned job to completion. */
  async generate(id: string, revision?: number): Promise<JobView> {
    const body = await this.request<{ job: JobView }>(
      "POST",
      `/projects/${encodeURIComponent(id)}/generate`,
      { revision },
    );
    return body.job;
  }

  assess(id: string, revision?: number): Promise<ProjectView> {
    return this.request("POST", `/projects/${encodeURIComponent(id)}/assess`, { revision });
  }

  arrange(id: string, revision?: number): Promise<ProjectView> {
    return this.request("POST", `/projects/${encodeURIComponent(id)}/arrange`, { revision });
  }

  /** Accepted as a background job; poll the returned job to completion. */
  async render(id: string, revision?: number): Promise<JobView> {
    const body = await this.request<{ job: JobView }>(
      "POST",
      `/projects/${encodeURIComponent(id)}/render`,
      { revision },
    );
    return body.job;
  }

  getJob(jobId: string): Promise<JobView> {
    return this.request("GET", `/jobs/${encodeURIComponent(jobId)}`);
  }

  /** Poll until the job leaves the running state; rejects on timeout. */
  async pollJob(
    jobId: string,
    options: { intervalMs?: number; timeoutMs?: number } = {},
  ): Promise<JobView> {
    const interval = options.intervalMs ?? 150;
    const deadline = Date.now() + (options.timeoutMs ?? 115_000);
    for (;;) {
      const job = await this.getJob(jobId);
      if (job.status !== "running") {
        return job;
      }
      if (Date.now() >= deadline) {
        throw new Error(`job ${jobId} still running after timeout`);
      }
      await new Promise((resolve) => setTimeout(resolve, interval));
    }
  }

  latestRenderUrl(id: string): string {
    return `${this.baseUrl}/projects/${encodeURIComponent(id)}/render/latest`;
  }

  /** The newest master WAV; rejects with a 404 ApiError when none exists. */
  async fetchLatestRender(id: string): Promise<ArrayBuffer> {
    const response = await this.send("GET", `/projects/${encodeURIComponent(id)}/render/latest`);
    return response.arrayBuffer();
  }

  transcripts(id: string): Promise<TranscriptsView> {
    return this.request("GET", `/projects/${encodeURIComponent(id)}/transcripts`);
  }

  evaluate(id: string): Promise<EvaluationView> {
    return this.request("POST", `/projects/${encodeURIComponent(id)}/evaluate`);
  }
}
