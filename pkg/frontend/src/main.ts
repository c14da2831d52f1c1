/**
 * Browser bootstrap: wires the store/controller to the DOM, canvas,
 * pointer gestures, and the event WebSocket. All planner logic lives
 * in the imported modules; this file is glue.
 */
import { ApiClient } from "./api.js";
import { decodeGrid, type CoverageGrid } from "./cgrd.js";
import { PlannerController } from "./controller.js";
import { parseEvent } from "./events.js";
import { renderHeatmap, type HeatmapMode, type RasterImage } from "./heatmap.js";
import { buildSceneView, drawScene, type Canvas2DLike, type SceneView } from "./render.js";
import { PlannerStore } from "./state.js";

function element<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing #${id}`);
  return el as T;
}

/** Decode CGRD buffers in a worker so large grids never block the UI. */
class WorkerGridDecoder {
  private readonly worker: Worker;
  private readonly queue: {
    resolve: (grid: CoverageGrid) => void;
    reject: (err: Error) => void;
  }[] = [];

  constructor(url: URL) {
    this.worker = new Worker(url, { type: "module" });
    this.worker.onmessage = (
      ev: MessageEvent<{ ok: boolean; grid?: CoverageGrid; error?: string }>,
    ) => {
      const job = this.queue.shift();
      if (job === undefined) return;
      if (ev.data.ok && ev.data.grid !== undefined) job.resolve(ev.data.grid);
      else job.reject(new Error(ev.data.error ?? "grid decode failed"));
    };
  }

  decode(bytes: ArrayBuffer): Promise<CoverageGrid> {
    return new Promise((resolve, reject) => {
      this.queue.push({ resolve, reject });
      this.worker.postMessage(bytes, [bytes]);
    });
  }
}

/** Real canvas context extended with the raster-blit hook. */
function browserCtx(real: CanvasRenderingContext2D): Canvas2DLike {
  const holder = document.createElement("canvas");
  const blit = (img: RasterImage, dx: number, dy: number, dw: number, dh: number): void => {
    if (holder.width !== img.width) holder.width = img.width;
    if (holder.height !== img.height) holder.height = img.height;
    const hctx = holder.getContext("2d");
    if (hctx === null) return;
    hctx.putImageData(new ImageData(new Uint8ClampedArray(img.data), img.width, img.height), 0, 0);
    real.imageSmoothingEnabled = false;
    real.drawImage(holder, dx, dy, dw, dh);
  };
  return Object.assign(real, { drawRasterImage: blit }) as unknown as Canvas2DLike;
}

function boot(): void {
  const canvas = element<HTMLCanvasElement>("scene");
  const ctx2d = canvas.getContext("2d");
  if (ctx2d === null) throw new Error("canvas 2d context unavailable");
  const ctx = browserCtx(ctx2d);

  const store = new PlannerStore();
  const api = new ApiClient((url, init) => fetch(url, init));
  const decoder =
    typeof Worker === "undefined"
      ? undefined
      : new WorkerGridDecoder(new URL("./gridWorker.js", import.meta.url));
  const controller = new PlannerController(api, store, {
    decode: decoder === undefined ? decodeGrid : (b) => decoder.decode(b),
    onChange: scheduleRender,
  });

  let selectedCameraId: number | null = null;
  let lastView: SceneView | null = null;
  let heatmapCache: { version: number; mode: HeatmapMode; image: RasterImage } | null = null;
  let renderQueued = false;

  function scheduleRender(): void {
    if (renderQueued) return;
    renderQueued = true;
    requestAnimationFrame(() => {
      renderQueued = false;
      render();
    });
  }

  function cachedHeatmap(): RasterImage | undefined {
    const bundle = store.gridBundle;
    if (bundle === null) return undefined;
    if (
      heatmapCache === null ||
      heatmapCache.version !== bundle.version ||
      heatmapCache.mode !== store.heatmapMode
    ) {
      heatmapCache = {
        version: bundle.version,
        mode: store.heatmapMode,
        image: renderHeatmap(bundle.grid, store.heatmapMode),
      };
    }
    return heatmapCache.image;
  }

  function render(): void {
    if (store.scenario === null) return;
    const vm = store.viewModel();
    lastView = buildSceneView(store, canvas.width, canvas.height, {
      selectedCameraId,
      heatmapImage: cachedHeatmap(),
    });
    drawScene(ctx, lastView);

    element("scenario-version").textContent = `scenario v${vm.scenarioVersion}`;
    element("grid-version").textContent = vm.versionLabel;

    const progress = element("progress");
    const bar = element("progress-bar");
    if (vm.jobProgress === null) {
      progress.classList.add("hidden");
    } else {
      progress.classList.remove("hidden");
      bar.style.width = `${(vm.jobProgress * 100).toFixed(1)}%`;
    }

    const errorBox = element("error");
    if (vm.inlineError === null) {
      errorBox.classList.add("hidden");
      errorBox.textContent = "";
    } else {
      errorBox.classList.remove("hidden");
      errorBox.textContent = `${vm.inlineError.entity}: ${vm.inlineError.message}`;
    }

    const metrics = element("metrics");
    metrics.replaceChildren(
      ...vm.metrics.map((row) => {
        const div = document.createElement("div");
        div.className = "metric";
        const label = document.createElement("span");
        label.textContent = row.label;
        const value = document.createElement("code");
        value.textContent = row.value;
        div.append(label, value);
        return div;
      }),
    );

    const pairs = element("pairs");
    pairs.replaceChildren(
      ...vm.pairs.map((pair) => {
        const tr = document.createElement("tr");
        for (const text of [
          `${pair.camA} ↔ ${pair.camB}`,
          `${pair.axisAngleDeg}°`,
          `${pair.overlapM2} m²`,
        ]) {
          const td = document.createElement("td");
          td.textContent = text;
          tr.append(td);
        }
        return tr;
      }),
    );

    const slider = element<HTMLInputElement>("height");
    const camLabel = element("cam-label");
    const selected = vm.cameras.find((c) => c.id === selectedCameraId);
    if (selected === undefined) {
      slider.disabled = true;
      camLabel.textContent = "select a camera";
    } else {
      slider.disabled = false;
      if (document.activeElement !== slider) slider.value = selected.heightM.toFixed(1);
      camLabel.textContent = `camera ${selected.id} height ${selected.heightM.toFixed(1)} m`;
    }

    element("mode-stereo").classList.toggle("active", vm.heatmapMode === "stereo");
    element("mode-mono").classList.toggle("active", vm.heatmapMode === "mono");
  }

  // --- pointer gestures -------------------------------------------------
  type Drag = { cameraId: number; kind: "move" | "yaw" };
  let drag: Drag | null = null;

  function canvasPoint(ev: PointerEvent): [number, number] {
    const rect = canvas.getBoundingClientRect();
    return [
      ((ev.clientX - rect.left) / rect.width) * canvas.width,
      ((ev.clientY - rect.top) / rect.height) * canvas.height,
    ];
  }

  canvas.addEventListener("pointerdown", (ev) => {
    if (lastView === null) return;
    const [px, py] = canvasPoint(ev);
    const t = lastView.transform;
    for (const cam of lastView.cameras) {
      const [sx, sy] = t.toScreen([cam.x, cam.y]);
      const hx = sx + Math.cos(-cam.yawRad) * 20;
      const hy = sy + Math.sin(-cam.yawRad) * 20;
      if (Math.hypot(px - hx, py - hy) < 8) {
        drag = { cameraId: cam.id, kind: "yaw" };
      } else if (Math.hypot(px - sx, py - sy) < 10) {
        drag = { cameraId: cam.id, kind: "move" };
      } else {
        continue;
      }
      selectedCameraId = cam.id;
      canvas.setPointerCapture(ev.pointerId);
      scheduleRender();
      return;
    }
    selectedCameraId = null;
    scheduleRender();
  });

  canvas.addEventListener("pointermove", (ev) => {
    if (drag === null || lastView === null || store.scenario === null) return;
    const [wx, wy] = lastView.transform.toWorld(canvasPoint(ev));
    const cam = store.scenario.cameras.find((c) => c.id === drag?.cameraId);
    if (cam === undefined) return;
    if (drag.kind === "move") {
      controller.previewCamera(drag.cameraId, { position_m: [wx, wy, cam.position_m[2]] });
    } else {
      controller.previewCamera(drag.cameraId, {
        yaw_rad: Math.atan2(wy - cam.position_m[1], wx - cam.position_m[0]),
      });
    }
  });

  canvas.addEventListener("pointerup", () => {
    if (drag === null) return;
    const preview = store.preview;
    drag = null;
    if (preview !== null && preview.cameraId !== null) {
      const patch: { position_m?: [number, number, number]; yaw_rad?: number } = {};
      if (preview.position_m !== undefined) patch.position_m = preview.position_m;
      if (preview.yaw_rad !== undefined) patch.yaw_rad = preview.yaw_rad;
      if (patch.position_m !== undefined || patch.yaw_rad !== undefined) {
        void controller.commitCamera(preview.cameraId, patch);
      }
    }
  });

  // --- panel controls ---------------------------------------------------
  const slider = element<HTMLInputElement>("height");
  slider.addEventListener("input", () => {
    const cam = store.scenario?.cameras.find((c) => c.id === selectedCameraId);
    if (cam === undefined) return;
    controller.previewCamera(cam.id, {
      position_m: [cam.position_m[0], cam.position_m[1], Number(slider.value)],
    });
  });
  slider.addEventListener("change", () => {
    const cam = store.scenario?.cameras.find((c) => c.id === selectedCameraId);
    if (cam === undefined) return;
    void controller.commitCamera(cam.id, {
      position_m: [cam.position_m[0], cam.position_m[1], Number(slider.value)],
    });
  });

  element("mode-stereo").addEventListener("click", () => controller.setHeatmapMode("stereo"));
  element("mode-mono").addEventListener("click", () => controller.setHeatmapMode("mono"));
  element("recompute").addEventListener("click", () => {
    void api.recompute().catch(() => {});
  });

  // --- event stream -----------------------------------------------------
  function connectEvents(): void {
    const proto = location.protocol === "https:" ? "wss" : "ws";
    const ws = new WebSocket(`${proto}://${location.host}/api/events`);
    ws.onopen = () => {
      // reconnects rebuild the whole view from GETs
      void controller.hydrate();
    };
    ws.onmessage = (ev) => {
      try {
        controller.handleEvent(parseEvent(String(ev.data)));
      } catch {
        // ignore unknown events
      }
    };
    ws.onclose = () => {
      setTimeout(connectEvents, 1000);
    };
  }

  connectEvents();
}

boot();
