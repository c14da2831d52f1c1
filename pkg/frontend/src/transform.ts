/**
 * World (metres, y north/up) ↔ screen (pixels, y down) mapping.
 */

export type Point = readonly [number, number];

export class ViewTransform {
  /** Pixels per metre. */
  readonly scale: number;

  constructor(
    readonly centerM: Point,
    readonly extentM: number,
    readonly widthPx: number,
    readonly heightPx: number,
  ) {
    if (!(extentM > 0)) throw new RangeError("extentM must be positive");
    this.scale = Math.min(widthPx, heightPx) / extentM;
  }

  toScreen(p: Point): [number, number] {
    return [
      this.widthPx / 2 + (p[0] - this.centerM[0]) * this.scale,
      this.heightPx / 2 - (p[1] - this.centerM[1]) * this.scale,
    ];
  }

  toWorld(p: Point): [number, number] {
    return [
      this.centerM[0] + (p[0] - this.widthPx / 2) / this.scale,
      this.centerM[1] - (p[1] - this.heightPx / 2) / this.scale,
    ];
  }
}

/** Transform fitting the axis-aligned box [min, max] with a margin. */
export function fitBounds(
  minM: Point,
  maxM: Point,
  widthPx: number,
  heightPx: number,
  marginFrac = 0.05,
): ViewTransform {
  const center: Point = [(minM[0] + maxM[0]) / 2, (minM[1] + maxM[1]) / 2];
  const extent = Math.max(maxM[0] - minM[0], maxM[1] - minM[1]) * (1 + 2 * marginFrac);
  return new ViewTransform(center, extent, widthPx, heightPx);
}
