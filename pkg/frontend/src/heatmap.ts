/**
 * Coverage heatmap rasterization: one RGBA pixel per grid cell.
 *
 * Pure integer pixel math so renders are byte-reproducible. The image
 * is flipped vertically relative to grid storage (grid row 0 is the
 * southernmost; image row 0 is the top of the screen).
 *
 * Stereo-covered cells get a warm tint clearly distinct from the cool
 * mono-only shade, with alpha ramping by pair/camera count.
 */
import type { CoverageGrid } from "./cgrd.js";

export type HeatmapMode = "mono" | "stereo";

export interface RasterImage {
  readonly width: number;
  readonly height: number;
  /** RGBA, row-major from the top-left. */
  readonly data: Uint8ClampedArray;
}

export const STEREO_RGB: readonly [number, number, number] = [235, 140, 20];
export const MONO_RGB: readonly [number, number, number] = [70, 120, 200];

/** Alpha for a stereo-covered cell, saturating at 7 pairs. */
export function stereoAlpha(pairs: number): number {
  return pairs <= 0 ? 0 : 96 + 20 * Math.min(pairs, 7);
}

/** Alpha for a camera-visible cell, saturating at 6 cameras. */
export function monoAlpha(count: number): number {
  return count <= 0 ? 0 : 64 + 28 * Math.min(count, 6);
}

export function renderHeatmap(grid: CoverageGrid, mode: HeatmapMode): RasterImage {
  const { cols, rows } = grid;
  const data = new Uint8ClampedArray(cols * rows * 4);
  for (let row = 0; row < rows; row++) {
    const imgRow = rows - 1 - row;
    for (let col = 0; col < cols; col++) {
      const cell = row * cols + col;
      const mono = grid.monoCount[cell]!;
      const stereo = grid.stereoPairs[cell]!;
      let rgb: readonly [number, number, number];
      let alpha: number;
      if (mode === "stereo" && stereo > 0) {
        rgb = STEREO_RGB;
        alpha = stereoAlpha(stereo);
      } else if (mode === "stereo" && mono > 0) {
        // mono-only fringe, kept faint so the stereo area reads as the highlight
        rgb = MONO_RGB;
        alpha = 40;
      } else if (mode === "mono" && mono > 0) {
        rgb = MONO_RGB;
        alpha = monoAlpha(mono);
      } else {
        rgb = [0, 0, 0];
        alpha = 0;
      }
      const px = (imgRow * cols + col) * 4;
      data[px] = rgb[0];
      data[px + 1] = rgb[1];
      data[px + 2] = rgb[2];
      data[px + 3] = alpha;
    }
  }
  return { width: cols, height: rows, data };
}
