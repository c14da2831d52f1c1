/**
 * Top-down scene rendering: lanes, crosswalks, occluders, coverage
 * heatmap, FOV wedges, camera glyphs.
 *
 * Drawing targets a narrow structural slice of the 2D canvas API plus
 * one extension, `drawRasterImage`, so the same code drives a real
 * canvas in the browser and a recording fake in tests. All inputs are
 * plain data; rendering is deterministic.
 */
import type { RasterImage } from "./heatmap.js";
import { renderHeatmap } from "./heatmap.js";
import type { CameraGlyph, PlannerStore, ScenarioDoc } from "./state.js";
import { fitBounds, type Point, ViewTransform } from "./transform.js";

export interface Canvas2DLike {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  globalAlpha: number;
  font: string;
  textAlign: string;
  textBaseline: string;
  save(): void;
  restore(): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  stroke(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  setLineDash(segments: number[]): void;
  fillText(text: string, x: number, y: number): void;
  drawRasterImage(image: RasterImage, dx: number, dy: number, dw: number, dh: number): void;
}

export interface HeatmapLayer {
  image: RasterImage;
  originM: [number, number];
  cellM: number;
  cols: number;
  rows: number;
  dimmed: boolean;
  badge: string | null;
}

export interface SceneView {
  widthPx: number;
  heightPx: number;
  scenario: ScenarioDoc;
  transform: ViewTransform;
  heatmap: HeatmapLayer | null;
  cameras: CameraGlyph[];
  selectedCameraId: number | null;
}

const LANE_COLORS: Record<string, string> = {
  bicycle: "#3b5a44",
  minor: "#383e45",
};
const LANE_DEFAULT = "#3d444c";

/** Assemble everything drawScene needs from the store. */
export function buildSceneView(
  store: PlannerStore,
  widthPx: number,
  heightPx: number,
  options: { selectedCameraId?: number | null; heatmapImage?: RasterImage } = {},
): SceneView {
  const scenario = store.scenario;
  if (scenario === null) throw new Error("no scenario loaded");
  const vm = store.viewModel();
  const bundle = store.gridBundle;
  let transform: ViewTransform;
  let heatmap: HeatmapLayer | null = null;
  if (bundle !== null && vm.heatmap !== null) {
    const g = bundle.grid;
    const min: Point = [g.originM[0], g.originM[1]];
    const max: Point = [g.originM[0] + g.cols * g.cellM, g.originM[1] + g.rows * g.cellM];
    transform = fitBounds(min, max, widthPx, heightPx);
    heatmap = {
      image: options.heatmapImage ?? renderHeatmap(g, store.heatmapMode),
      originM: [g.originM[0], g.originM[1]],
      cellM: g.cellM,
      cols: g.cols,
      rows: g.rows,
      dimmed: vm.heatmap.dimmed,
      badge: vm.heatmap.badge,
    };
  } else {
    const xs = scenario.layout.roi_inner.map((p) => p[0]);
    const ys = scenario.layout.roi_inner.map((p) => p[1]);
    transform = fitBounds(
      [Math.min(...xs) - 30, Math.min(...ys) - 30],
      [Math.max(...xs) + 30, Math.max(...ys) + 30],
      widthPx,
      heightPx,
    );
  }
  return {
    widthPx,
    heightPx,
    scenario,
    transform,
    heatmap,
    cameras: vm.cameras,
    selectedCameraId: options.selectedCameraId ?? null,
  };
}

function tracePath(ctx: Canvas2DLike, t: ViewTransform, points: readonly Point[], close: boolean): void {
  ctx.beginPath();
  points.forEach((p, i) => {
    const [x, y] = t.toScreen(p);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  if (close) ctx.closePath();
}

function drawBaseMap(ctx: Canvas2DLike, view: SceneView): void {
  const { scenario, transform: t } = view;
  ctx.fillStyle = "#23272b";
  ctx.fillRect(0, 0, view.widthPx, view.heightPx);

  ctx.save();
  ctx.strokeStyle = "#5a646e";
  ctx.lineWidth = 1;
  ctx.setLineDash([6, 6]);
  for (const approach of scenario.layout.approaches) {
    tracePath(ctx, t, approach.polyline, false);
    ctx.stroke();
  }
  ctx.restore();

  for (const lane of scenario.layout.lanes) {
    ctx.strokeStyle = LANE_COLORS[lane.kind] ?? LANE_DEFAULT;
    ctx.lineWidth = lane.width_m * t.scale;
    tracePath(ctx, t, lane.centerline, false);
    ctx.stroke();
  }

  ctx.save();
  ctx.fillStyle = "#e6e6e6";
  ctx.globalAlpha = 0.55;
  ctx.font = "11px sans-serif";
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  for (const crosswalk of scenario.layout.crosswalks) {
    tracePath(ctx, t, crosswalk.polygon, true);
    ctx.fill();
    const cx = crosswalk.polygon.reduce((acc, p) => acc + p[0], 0) / crosswalk.polygon.length;
    const cy = crosswalk.polygon.reduce((acc, p) => acc + p[1], 0) / crosswalk.polygon.length;
    const [sx, sy] = t.toScreen([cx, cy]);
    ctx.globalAlpha = 0.9;
    ctx.fillText(String(crosswalk.index), sx, sy);
    ctx.globalAlpha = 0.55;
  }
  ctx.restore();

  ctx.save();
  ctx.strokeStyle = "#8fd0ff";
  ctx.lineWidth = 1.5;
  ctx.setLineDash([4, 4]);
  tracePath(ctx, t, scenario.layout.roi_inner, true);
  ctx.stroke();
  ctx.restore();
}

function drawHeatmap(ctx: Canvas2DLike, view: SceneView): void {
  const layer = view.heatmap;
  if (layer === null) return;
  const t = view.transform;
  const [left, top] = t.toScreen([layer.originM[0], layer.originM[1] + layer.rows * layer.cellM]);
  const w = layer.cols * layer.cellM * t.scale;
  const h = layer.rows * layer.cellM * t.scale;
  ctx.save();
  ctx.globalAlpha = layer.dimmed ? 0.35 : 0.85;
  ctx.drawRasterImage(layer.image, left, top, w, h);
  ctx.restore();
}

function drawOccluders(ctx: Canvas2DLike, view: SceneView): void {
  const t = view.transform;
  ctx.save();
  for (const occluder of view.scenario.occluders) {
    tracePath(ctx, t, occluder.footprint, true);
    ctx.fillStyle = "#453e35";
    ctx.globalAlpha = 0.9;
    ctx.fill();
    ctx.strokeStyle = "#6b5f4f";
    ctx.lineWidth = 1;
    ctx.globalAlpha = 1;
    ctx.stroke();
  }
  ctx.restore();
}

function drawCameras(ctx: Canvas2DLike, view: SceneView): void {
  const t = view.transform;
  for (const cam of view.cameras) {
    const [sx, sy] = t.toScreen([cam.x, cam.y]);
    const selected = cam.id === view.selectedCameraId;
    const radius = cam.rangeM * t.scale;
    // screen y points down, so world CCW angles negate
    const a1 = -(cam.yawRad + cam.hfovRad / 2);
    const a2 = -(cam.yawRad - cam.hfovRad / 2);

    ctx.save();
    ctx.beginPath();
    ctx.moveTo(sx, sy);
    ctx.arc(sx, sy, radius, a1, a2);
    ctx.closePath();
    ctx.fillStyle = "#f0c850";
    ctx.globalAlpha = cam.preview ? 0.16 : 0.08;
    ctx.fill();
    ctx.strokeStyle = cam.preview ? "#ffd24d" : "#c8a43c";
    ctx.globalAlpha = selected || cam.preview ? 0.9 : 0.5;
    ctx.lineWidth = selected ? 2 : 1;
    ctx.stroke();
    ctx.restore();

    ctx.save();
    const handle = 20;
    const hx = sx + Math.cos(-cam.yawRad) * handle;
    const hy = sy + Math.sin(-cam.yawRad) * handle;
    ctx.strokeStyle = "#f5f0e6";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(sx, sy);
    ctx.lineTo(hx, hy);
    ctx.stroke();
    ctx.beginPath();
    ctx.arc(hx, hy, 4, 0, 2 * Math.PI);
    ctx.fillStyle = "#f5f0e6";
    ctx.fill();

    ctx.beginPath();
    ctx.arc(sx, sy, selected ? 8 : 6, 0, 2 * Math.PI);
    ctx.fillStyle = "#e8534a";
    ctx.fill();
    ctx.strokeStyle = selected ? "#ffffff" : "#1d1f22";
    ctx.lineWidth = 1.5;
    ctx.stroke();
    ctx.fillStyle = "#ffffff";
    ctx.font = "10px sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillText(String(cam.id), sx, sy);
    ctx.restore();
  }
}

function drawBadge(ctx: Canvas2DLike, view: SceneView): void {
  const badge = view.heatmap?.badge;
  if (badge === undefined || badge === null) return;
  ctx.save();
  ctx.fillStyle = "rgba(20, 22, 24, 0.85)";
  ctx.fillRect(10, 10, 8 * badge.length + 18, 22);
  ctx.fillStyle = "#ffd24d";
  ctx.font = "12px sans-serif";
  ctx.textAlign = "left";
  ctx.textBaseline = "middle";
  ctx.fillText(badge, 19, 21);
  ctx.restore();
}

export function drawScene(ctx: Canvas2DLike, view: SceneView): void {
  drawBaseMap(ctx, view);
  drawHeatmap(ctx, view);
  drawOccluders(ctx, view);
  drawCameras(ctx, view);
  drawBadge(ctx, view);
}
