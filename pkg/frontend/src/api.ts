/**
 * Typed client for the planner service.
 *
 * The fetch implementation is injected so tests can drive the client
 * with canned responses; only a narrow structural slice of the fetch
 * API is required.
 */
import type { InlineError, JobStatus, PairRow, ScenarioDoc } from "./state.js";

export interface ResponseLike {
  status: number;
  headers: { get(name: string): string | null };
  json(): Promise<unknown>;
  text(): Promise<string>;
  arrayBuffer(): Promise<ArrayBuffer>;
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<ResponseLike>;

export class ApiError extends Error {
  override name = "ApiError";

  constructor(
    readonly status: number,
    message: string,
    readonly detail?: unknown,
  ) {
    super(message);
  }
}

/** 409: the edit was based on an outdated scenario version. */
export class StaleVersionError extends Error {
  override name = "StaleVersionError";

  constructor(readonly currentVersion: number) {
    super(`stale version (server is at ${currentVersion})`);
  }
}

/** 422: the edit violates a scenario invariant. */
export class ValidationError extends Error {
  override name = "ValidationError";

  constructor(readonly violations: InlineError[]) {
    super(violations.map((v) => `${v.entity}: ${v.message}`).join("; "));
  }
}

export interface ScenarioResponse {
  version: number;
  scenario_sha256: string;
  scenario: ScenarioDoc;
  job: JobStatus;
}

export interface StatusResponse {
  version: number;
  grid_version: number | null;
  job: JobStatus;
}

export interface GridResponse {
  bytes: ArrayBuffer;
  gridVersion: number;
  /** Verbatim X-Coverage-Metrics header text. */
  metricsText: string;
}

export interface CameraPatch {
  position_m?: [number, number, number];
  yaw_rad?: number;
  pitch_rad?: number;
  roll_rad?: number;
  max_range_m?: number;
}

async function errorFrom(resp: ResponseLike): Promise<ApiError> {
  let detail: unknown;
  try {
    detail = ((await resp.json()) as { detail?: unknown }).detail;
  } catch {
    detail = undefined;
  }
  return new ApiError(resp.status, `request failed with status ${resp.status}`, detail);
}

export class ApiClient {
  constructor(
    private readonly fetchFn: FetchLike,
    private readonly base = "",
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.base + path);
    if (resp.status !== 200) throw await errorFrom(resp);
    return (await resp.json()) as T;
  }

  getScenario(): Promise<ScenarioResponse> {
    return this.getJson("/api/scenario");
  }

  getStatus(): Promise<StatusResponse> {
    return this.getJson("/api/coverage/status");
  }

  /**
   * Stereo pairs, parsed and as the verbatim response body (the panel
   * displays angle/overlap digits exactly as the service wrote them).
   */
  async getPairs(): Promise<{ version: number; pairs: PairRow[]; bodyText: string }> {
    const resp = await this.fetchFn(`${this.base}/api/pairs`);
    if (resp.status !== 200) throw await errorFrom(resp);
    const bodyText = await resp.text();
    const parsed = JSON.parse(bodyText) as { version: number; pairs: PairRow[] };
    return { version: parsed.version, pairs: parsed.pairs, bodyText };
  }

  async putCamera(
    cameraId: number,
    patch: CameraPatch & { version: number },
  ): Promise<{ version: number }> {
    const resp = await this.fetchFn(`${this.base}/api/cameras/${cameraId}`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(patch),
    });
    if (resp.status === 409) {
      const body = (await resp.json()) as { detail?: { current_version?: number } };
      throw new StaleVersionError(body.detail?.current_version ?? -1);
    }
    if (resp.status === 422) {
      const body = (await resp.json()) as { detail?: InlineError[] };
      throw new ValidationError(body.detail ?? []);
    }
    if (resp.status !== 200) throw await errorFrom(resp);
    return (await resp.json()) as { version: number };
  }

  async recompute(): Promise<{ accepted: boolean; version: number }> {
    const resp = await this.fetchFn(`${this.base}/api/coverage/recompute`, { method: "POST" });
    if (resp.status !== 202) throw await errorFrom(resp);
    return (await resp.json()) as { accepted: boolean; version: number };
  }

  /** The current grid, or null when none has been computed yet. */
  async getGrid(): Promise<GridResponse | null> {
    const resp = await this.fetchFn(`${this.base}/api/coverage/grid`);
    if (resp.status === 404) return null;
    if (resp.status !== 200) throw await errorFrom(resp);
    const gridVersion = Number(resp.headers.get("X-Grid-Version"));
    const metricsText = resp.headers.get("X-Coverage-Metrics") ?? "{}";
    return { bytes: await resp.arrayBuffer(), gridVersion, metricsText };
  }
}
