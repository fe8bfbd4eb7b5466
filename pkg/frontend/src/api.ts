/**
 * Typed client for the toolkit's HTTP API.
 *
 * Every number the UI shows comes through here; nothing is recomputed
 * client-side. The fetch implementation is injectable so tests can run
 * without a server.
 */

export interface QuestionSummary {
  question_id: string;
  text: string;
  category: string;
  lecture_number: number;
  poll_kind: string;
  responses: number;
  unique_responses: number;
}

export interface ResponsePage {
  question_id: string;
  page: number;
  page_size: number;
  total: number;
  items: { normalized_text: string; count: number }[];
}

export interface SampleMetrics {
  centroid_distance: number;
  frequency: number;
  edit_distance_to_mode: number;
  char_length: number;
}

export interface SampleItem {
  normalized_text: string;
  metrics: SampleMetrics;
}

export interface SamplePayload {
  question_id: string;
  seed: number;
  items: SampleItem[];
}

export interface LabelRecord {
  annotator_id: string;
  question_id: string;
  normalized_text: string;
  score: number;
  labeled_at: string;
}

export interface AgreementPayload {
  pairwise_percent: number;
  fleiss_kappa: number;
  n_items: number;
  n_annotators: number;
}

export interface RunSummary {
  run_id: string;
  question_id: string;
  config: Record<string, unknown>;
  fingerprint: string;
  created_at: string;
}

export interface NeighborEvidence {
  text: string;
  label: string;
  distance: number;
}

export interface ClassRecord {
  class: string;
  margin: number;
  neighbors: NeighborEvidence[];
}

export interface RunClasses {
  run_id: string;
  classes: Record<string, ClassRecord>;
}

export interface AtRiskEntry {
  student_id: string;
  window_fraction: number;
  evidence: {
    window_lectures: number[];
    responses: number;
    non_earnest: number;
  };
}

export interface JobRecord {
  job_id: string;
  kind: string;
  question_id: string;
  status: "queued" | "running" | "done" | "failed";
  result?: Record<string, unknown>;
  error?: string;
}

export interface ProjectedPoint {
  normalized_text: string;
  x: number;
  y: number;
  class_hint: string | null;
}

export interface AtRiskParams {
  threshold?: number;
  window?: number;
  min_responses?: number;
}

/** Non-2xx response; `status` drives the UI's login/inline-error split. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: unknown,
  ) {
    super(typeof detail === "string" ? detail : JSON.stringify(detail));
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private token: string | null = null,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  hasToken(): boolean {
    return this.token !== null && this.token !== "";
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    const payload = text === "" ? null : JSON.parse(text);
    if (!response.ok) {
      throw new ApiError(response.status, payload?.detail ?? payload);
    }
    return payload as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  questions(): Promise<QuestionSummary[]> {
    return this.request("GET", "/questions");
  }

  responses(questionId: string, page = 0): Promise<ResponsePage> {
    return this.request(
      "GET",
      `/questions/${encodeURIComponent(questionId)}/responses?page=${page}`,
    );
  }

  sample(questionId: string, n: number, seed: number): Promise<SamplePayload> {
    return this.request(
      "GET",
      `/questions/${encodeURIComponent(questionId)}/sample?n=${n}&seed=${seed}`,
    );
  }

  labels(questionId?: string): Promise<LabelRecord[]> {
    const query = questionId ? `?question=${encodeURIComponent(questionId)}` : "";
    return this.request("GET", `/labels${query}`);
  }

  postLabel(
    annotator: string,
    question: string,
    text: string,
    score: number,
  ): Promise<LabelRecord> {
    return this.request("POST", "/labels", { annotator, question, text, score });
  }

  agreement(questionId?: string): Promise<AgreementPayload> {
    const query = questionId ? `?question=${encodeURIComponent(questionId)}` : "";
    return this.request("GET", `/labels/agreement${query}`);
  }

  runs(): Promise<RunSummary[]> {
    return this.request("GET", "/runs");
  }

  runClasses(runId: string): Promise<RunClasses> {
    return this.request("GET", `/runs/${encodeURIComponent(runId)}/classes`);
  }

  atRisk(params: AtRiskParams = {}): Promise<AtRiskEntry[]> {
    const query = new URLSearchParams();
    if (params.threshold !== undefined) query.set("threshold", String(params.threshold));
    if (params.window !== undefined) query.set("window", String(params.window));
    if (params.min_responses !== undefined) {
      query.set("min_responses", String(params.min_responses));
    }
    const suffix = query.toString() ? `?${query}` : "";
    return this.request("GET", `/atrisk${suffix}`);
  }

  submitClassify(body: {
    question: string;
    seed?: number;
    pool_fraction?: number;
    earnest_seeds?: number;
    k?: number;
    space?: string;
    distance?: string;
  }): Promise<JobRecord> {
    return this.request("POST", "/jobs/classify", body);
  }

  submitProject(body: {
    question: string;
    seed?: number;
    perplexity?: number;
    iterations?: number;
  }): Promise<JobRecord> {
    return this.request("POST", "/jobs/project", body);
  }

  job(jobId: string): Promise<JobRecord> {
    return this.request("GET", `/jobs/${encodeURIComponent(jobId)}`);
  }

  /** Poll until the job is terminal; rejects on `failed` or timeout. */
  async waitForJob(
    jobId: string,
    pollMs = 500,
    timeoutMs = 120_000,
  ): Promise<JobRecord> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const record = await this.job(jobId);
      if (record.status === "done") return record;
      if (record.status === "failed") {
        throw new ApiError(500, record.error ?? "job failed");
      }
      if (Date.now() > deadline) {
        throw new ApiError(504, `job ${jobId} did not finish in ${timeoutMs}ms`);
      }
      await new Promise((resolve) => setTimeout(resolve, pollMs));
    }
  }
}
