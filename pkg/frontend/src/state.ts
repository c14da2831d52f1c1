/**
 * Client-side session state and the derived view model.
 *
 * Everything the UI shows derives from (scenario version, grid
 * version, job status); a reconnect rebuilds this store from plain
 * GETs. The view model enforces the display invariants: the version
 * label always names the version of the grid actually on screen, and
 * a grid older than the scenario renders dimmed with a "recomputing"
 * badge.
 */
import type { CoverageGrid } from "./cgrd.js";
import type { PlannerEvent } from "./events.js";
import { rawScalars } from "./format.js";
import type { HeatmapMode } from "./heatmap.js";
import { metricsRows, type MetricRow } from "./metrics.js";

export interface IntrinsicsDoc {
  width_px: number;
  height_px: number;
  fx_px: number;
  fy_px: number;
  cx_px: number;
  cy_px: number;
}

export interface CameraDoc {
  id: number;
  intrinsics: IntrinsicsDoc;
  position_m: [number, number, number];
  yaw_rad: number;
  pitch_rad: number;
  roll_rad: number;
  max_range_m: number;
}

export interface LaneDoc {
  centerline: [number, number][];
  width_m: number;
  kind: string;
}

export interface CrosswalkDoc {
  index: number;
  polygon: [number, number][];
}

export interface ApproachDoc {
  direction: string;
  polyline: [number, number][];
  length_m: number;
}

export interface OccluderDoc {
  footprint: [number, number][];
  height_m: number;
  kind: string;
}

export interface ScenarioDoc {
  schema_version: number;
  layout: {
    lanes: LaneDoc[];
    crosswalks: CrosswalkDoc[];
    roi_inner: [number, number][];
    approaches: ApproachDoc[];
  };
  occluders: OccluderDoc[];
  cameras: CameraDoc[];
  duration_s: number;
  frame_rate_hz: number;
  seed: number;
}

export type JobStatus =
  | { status: "idle" }
  | { status: "running"; progress: number; version: number }
  | { status: "done" | "cancelled"; version: number };

export interface PairRow {
  cam_a: number;
  cam_b: number;
  axis_angle_deg: number;
  overlap_m2: number;
}

export interface GridBundle {
  grid: CoverageGrid;
  version: number;
  /** Verbatim X-Coverage-Metrics header text. */
  metricsText: string;
}

export interface InlineError {
  entity: string;
  message: string;
  rule?: string;
}

/** Optimistic, not-yet-committed camera pose override. */
export interface CameraPreview {
  cameraId: number;
  position_m?: [number, number, number];
  yaw_rad?: number;
}

export interface CameraGlyph {
  id: number;
  x: number;
  y: number;
  heightM: number;
  yawRad: number;
  hfovRad: number;
  rangeM: number;
  preview: boolean;
}

export interface HeatmapView {
  gridVersion: number;
  stale: boolean;
  dimmed: boolean;
  badge: string | null;
}

export interface PairView {
  camA: number;
  camB: number;
  /** Verbatim digits from the service response. */
  axisAngleDeg: string;
  overlapM2: string;
}

export interface ViewModel {
  scenarioVersion: number;
  /** Names the version of the grid on screen, or the absence of one. */
  versionLabel: string;
  heatmap: HeatmapView | null;
  heatmapMode: HeatmapMode;
  jobProgress: number | null;
  cameras: CameraGlyph[];
  pairs: PairView[];
  metrics: MetricRow[];
  inlineError: InlineError | null;
}

export function horizontalFovRad(intr: IntrinsicsDoc): number {
  return 2 * Math.atan(intr.width_px / (2 * intr.fx_px));
}

export class PlannerStore {
  scenario: ScenarioDoc | null = null;
  version = 0;
  scenarioSha = "";
  job: JobStatus = { status: "idle" };
  gridBundle: GridBundle | null = null;
  pairs: PairRow[] = [];
  /** Verbatim /api/pairs response body backing the pair panel. */
  pairsText: string | null = null;
  heatmapMode: HeatmapMode = "stereo";
  inlineError: InlineError | null = null;
  preview: CameraPreview | null = null;

  setScenario(doc: ScenarioDoc, version: number, sha: string): void {
    this.scenario = doc;
    this.version = version;
    this.scenarioSha = sha;
  }

  setGrid(grid: CoverageGrid, version: number, metricsText: string): void {
    if (this.gridBundle !== null && version < this.gridBundle.version) return;
    this.gridBundle = { grid, version, metricsText };
  }

  /** Apply an accepted camera patch to the local scenario copy. */
  patchCamera(
    cameraId: number,
    patch: { position_m?: [number, number, number]; yaw_rad?: number },
  ): void {
    if (this.scenario === null) return;
    const cam = this.scenario.cameras.find((c) => c.id === cameraId);
    if (cam === undefined) return;
    if (patch.position_m !== undefined) cam.position_m = [...patch.position_m];
    if (patch.yaw_rad !== undefined) cam.yaw_rad = patch.yaw_rad;
  }

  applyEvent(ev: PlannerEvent): void {
    switch (ev.type) {
      case "version_changed":
        this.version = Math.max(this.version, ev.version);
        break;
      case "job_progress":
        this.job = { status: "running", progress: ev.progress, version: ev.version };
        break;
      case "job_done":
        this.job = { status: ev.status, version: ev.version };
        break;
    }
  }

  viewModel(): ViewModel {
    const grid = this.gridBundle;
    let heatmap: HeatmapView | null = null;
    if (grid !== null) {
      const stale = grid.version < this.version;
      heatmap = {
        gridVersion: grid.version,
        stale,
        dimmed: stale,
        badge: stale ? "recomputing" : null,
      };
    }
    const cameras: CameraGlyph[] = (this.scenario?.cameras ?? []).map((cam) => {
      const p = this.preview?.cameraId === cam.id ? this.preview : null;
      const pos = p?.position_m ?? cam.position_m;
      return {
        id: cam.id,
        x: pos[0],
        y: pos[1],
        heightM: pos[2],
        yawRad: p?.yaw_rad ?? cam.yaw_rad,
        hfovRad: horizontalFovRad(cam.intrinsics),
        rangeM: cam.max_range_m,
        preview: p !== null,
      };
    });
    return {
      scenarioVersion: this.version,
      versionLabel: grid === null ? "no coverage yet" : `grid v${grid.version}`,
      heatmap,
      heatmapMode: this.heatmapMode,
      jobProgress: this.job.status === "running" ? this.job.progress : null,
      cameras,
      pairs: this.pairViews(),
      metrics: grid === null ? [] : metricsRows(grid.metricsText),
      inlineError: this.inlineError,
    };
  }

  private pairViews(): PairView[] {
    if (this.pairsText === null) return [];
    const raw = rawScalars(this.pairsText);
    return this.pairs.map((pair, i) => ({
      camA: pair.cam_a,
      camB: pair.cam_b,
      axisAngleDeg: raw.get(`pairs[${i}].axis_angle_deg`) ?? String(pair.axis_angle_deg),
      overlapM2: raw.get(`pairs[${i}].overlap_m2`) ?? String(pair.overlap_m2),
    }));
  }
}
