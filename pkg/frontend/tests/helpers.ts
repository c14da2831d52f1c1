/**
 * Shared test utilities: fixture loading, canned responses, and a fake
 * planner server that mirrors the real service's version/validation
 * semantics behind the injectable fetch interface.
 */
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { FetchLike, ResponseLike } from "../src/api.js";
import type { JobStatus, ScenarioDoc } from "../src/state.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

export function fixtureText(name: string): string {
  return readFileSync(join(FIXTURES, name), "utf8");
}

export function fixtureJson<T>(name: string): T {
  return JSON.parse(fixtureText(name)) as T;
}

export function fixtureArrayBuffer(name: string): ArrayBuffer {
  const buf = readFileSync(join(FIXTURES, name));
  return buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength);
}

export interface ScenarioResponseFixture {
  version: number;
  scenario_sha256: string;
  scenario: ScenarioDoc;
  job: JobStatus;
}

export function jsonResponse(status: number, body: unknown): ResponseLike {
  const text = JSON.stringify(body);
  return {
    status,
    headers: { get: () => null },
    json: () => Promise.resolve(JSON.parse(text) as unknown),
    text: () => Promise.resolve(text),
    arrayBuffer: () => Promise.reject(new Error("not a binary response")),
  };
}

export function textResponse(status: number, text: string): ResponseLike {
  return {
    status,
    headers: { get: () => null },
    json: () => Promise.resolve(JSON.parse(text) as unknown),
    text: () => Promise.resolve(text),
    arrayBuffer: () => Promise.reject(new Error("not a binary response")),
  };
}

export function bytesResponse(
  status: number,
  bytes: ArrayBuffer,
  headers: Record<string, string>,
): ResponseLike {
  return {
    status,
    headers: { get: (name) => headers[name] ?? null },
    json: () => Promise.reject(new Error("binary response")),
    text: () => Promise.reject(new Error("binary response")),
    arrayBuffer: () => Promise.resolve(bytes.slice(0)),
  };
}

/**
 * In-memory stand-in for the planner service. Implements the same
 * optimistic-concurrency and validation behaviour the real API exposes
 * (409 with current_version, 422 with entity paths, monotonically
 * increasing version) so controller tests exercise realistic flows.
 */
export class FakeServer {
  scenario: ScenarioDoc;
  version: number;
  sha: string;
  job: JobStatus = { status: "idle" };
  gridBytes: ArrayBuffer | null = null;
  gridVersion: number | null = null;
  metricsText: string;
  pairsBody: string;
  maxHeightM = 8;
  calls: string[] = [];

  constructor() {
    const sc = fixtureJson<ScenarioResponseFixture>("scenario_response.json");
    this.scenario = sc.scenario;
    this.version = sc.version;
    this.sha = sc.scenario_sha256;
    this.metricsText = fixtureText("metrics_header.txt");
    this.pairsBody = fixtureText("pairs_body.txt");
  }

  serveGrid(bytes: ArrayBuffer, version: number): void {
    this.gridBytes = bytes;
    this.gridVersion = version;
  }

  count(route: string): number {
    return this.calls.filter((c) => c === route).length;
  }

  readonly fetch: FetchLike = (url, init) => {
    const method = init?.method ?? "GET";
    this.calls.push(`${method} ${url}`);

    if (method === "GET" && url === "/api/scenario") {
      return Promise.resolve(
        jsonResponse(200, {
          version: this.version,
          scenario_sha256: this.sha,
          scenario: this.scenario,
          job: this.job,
        }),
      );
    }
    if (method === "GET" && url === "/api/pairs") {
      return Promise.resolve(textResponse(200, this.pairsBody));
    }
    if (method === "GET" && url === "/api/coverage/status") {
      return Promise.resolve(
        jsonResponse(200, {
          version: this.version,
          grid_version: this.gridVersion,
          job: this.job,
        }),
      );
    }
    if (method === "GET" && url === "/api/coverage/grid") {
      if (this.gridBytes === null) {
        return Promise.resolve(jsonResponse(404, { detail: "no coverage computed yet" }));
      }
      return Promise.resolve(
        bytesResponse(200, this.gridBytes, {
          "X-Grid-Version": String(this.gridVersion),
          "X-Coverage-Metrics": this.metricsText,
        }),
      );
    }
    if (method === "POST" && url === "/api/coverage/recompute") {
      return Promise.resolve(jsonResponse(202, { accepted: true, version: this.version }));
    }
    const putMatch = /^\/api\/cameras\/(\d+)$/.exec(url);
    if (method === "PUT" && putMatch !== null) {
      return Promise.resolve(this.putCamera(Number(putMatch[1]), init?.body ?? ""));
    }
    return Promise.resolve(jsonResponse(404, { detail: `no route ${method} ${url}` }));
  };

  private putCamera(cameraId: number, bodyText: string): ResponseLike {
    const body = JSON.parse(bodyText) as {
      version?: number;
      position_m?: [number, number, number];
      yaw_rad?: number;
    };
    if (body.version === undefined) {
      return jsonResponse(422, {
        detail: [{ entity: "version", message: "version is required" }],
      });
    }
    if (body.version !== this.version) {
      return jsonResponse(409, {
        detail: { message: "stale version", current_version: this.version },
      });
    }
    const index = this.scenario.cameras.findIndex((c) => c.id === cameraId);
    if (index === -1) {
      return jsonResponse(404, { detail: `no camera with id ${cameraId}` });
    }
    if (body.position_m !== undefined && body.position_m[2] > this.maxHeightM) {
      return jsonResponse(422, {
        detail: [
          {
            entity: `cameras[${index}]`,
            rule: "camera_height_max",
            message: `camera height ${body.position_m[2]} m exceeds ${this.maxHeightM} m`,
          },
        ],
      });
    }
    const cam = this.scenario.cameras[index]!;
    if (body.position_m !== undefined) cam.position_m = [...body.position_m];
    if (body.yaw_rad !== undefined) cam.yaw_rad = body.yaw_rad;
    this.version += 1;
    return jsonResponse(200, { version: this.version });
  }
}
