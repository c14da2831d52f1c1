/**
 * Glue between the API client, the store, and the event stream.
 *
 * Edit flow: pointer moves preview a camera locally (optimistic wedge,
 * no network); releasing commits one PUT carrying the current version.
 * Each accepted edit arms a trailing debounce so a whole drag gesture
 * triggers exactly one recompute request. A 409 means someone else
 * moved the scenario: the client reloads state from GETs and replays
 * nothing. A 422 keeps the server state and surfaces the violation
 * inline.
 */
import { ApiClient, StaleVersionError, ValidationError, type CameraPatch } from "./api.js";
import { decodeGrid, type CoverageGrid } from "./cgrd.js";
import { Debouncer } from "./debounce.js";
import type { PlannerEvent } from "./events.js";
import type { HeatmapMode } from "./heatmap.js";
import { PlannerStore } from "./state.js";

export interface ControllerOptions {
  debounceMs?: number;
  /** Called after every store mutation so the host can re-render. */
  onChange?: () => void;
  /** Grid decoder; the browser injects a worker-backed one. */
  decode?: (bytes: ArrayBuffer) => CoverageGrid | Promise<CoverageGrid>;
}

export class PlannerController {
  private readonly recomputeDebounce: Debouncer;
  private readonly onChange: () => void;
  private readonly decode: (bytes: ArrayBuffer) => CoverageGrid | Promise<CoverageGrid>;

  constructor(
    private readonly api: ApiClient,
    readonly store: PlannerStore,
    options: ControllerOptions = {},
  ) {
    this.onChange = options.onChange ?? (() => {});
    this.decode = options.decode ?? decodeGrid;
    this.recomputeDebounce = new Debouncer(options.debounceMs ?? 300, () => {
      void this.api.recompute().catch(() => {});
    });
  }

  /** Rebuild the whole store from GETs (initial load and reconnects). */
  async hydrate(): Promise<void> {
    const sc = await this.api.getScenario();
    this.store.setScenario(sc.scenario, sc.version, sc.scenario_sha256);
    this.store.job = sc.job;
    this.store.preview = null;
    this.store.inlineError = null;
    const pairs = await this.api.getPairs();
    this.store.pairs = pairs.pairs;
    this.store.pairsText = pairs.bodyText;
    const grid = await this.api.getGrid();
    if (grid !== null) {
      this.store.setGrid(await this.decode(grid.bytes), grid.gridVersion, grid.metricsText);
    }
    this.onChange();
  }

  /** Optimistic local pose override while a drag is in flight. */
  previewCamera(
    cameraId: number,
    patch: { position_m?: [number, number, number]; yaw_rad?: number },
  ): void {
    this.store.preview = { cameraId, ...patch };
    this.onChange();
  }

  /**
   * Commit a camera edit. Resolves true when the server accepted it.
   */
  async commitCamera(cameraId: number, patch: CameraPatch): Promise<boolean> {
    try {
      const result = await this.api.putCamera(cameraId, {
        ...patch,
        version: this.store.version,
      });
      this.store.version = result.version;
      this.store.patchCamera(cameraId, patch);
      this.store.preview = null;
      this.store.inlineError = null;
      const pairs = await this.api.getPairs();
      this.store.pairs = pairs.pairs;
      this.store.pairsText = pairs.bodyText;
      this.recomputeDebounce.trigger();
      this.onChange();
      return true;
    } catch (err) {
      this.store.preview = null;
      if (err instanceof StaleVersionError) {
        await this.hydrate();
        return false;
      }
      if (err instanceof ValidationError) {
        this.store.inlineError = err.violations[0] ?? {
          entity: `cameras[${cameraId}]`,
          message: err.message,
        };
        this.onChange();
        return false;
      }
      throw err;
    }
  }

  handleEvent(ev: PlannerEvent): void {
    this.store.applyEvent(ev);
    if (ev.type === "job_done" && ev.status === "done") {
      void this.refreshGrid();
    }
    this.onChange();
  }

  /** Pull the latest grid + metrics (after job_done or on demand). */
  async refreshGrid(): Promise<void> {
    const grid = await this.api.getGrid();
    if (grid !== null) {
      this.store.setGrid(await this.decode(grid.bytes), grid.gridVersion, grid.metricsText);
      this.onChange();
    }
  }

  /** Swap heatmap layers locally; never refetches the grid. */
  setHeatmapMode(mode: HeatmapMode): void {
    this.store.heatmapMode = mode;
    this.onChange();
  }
}
