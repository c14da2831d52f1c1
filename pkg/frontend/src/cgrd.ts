/**
 * Binary coverage-grid (CGRD) decoding.
 *
 * Layout (all little-endian):
 *
 *   header   40 B  "CGRD" magic, u16 version, u16 reserved,
 *                  f64 origin x, f64 origin y, f64 cell size [m],
 *                  u32 cols, u32 rows
 *   cells    12 B × cols·rows, row-major starting at the south-west
 *                  corner: u64 visible_mask, u16 mono_count,
 *                  u16 stereo_pairs
 *   trailer   4 B  CRC-32 (IEEE, zlib-compatible) of header + cells
 *
 * Cell (row, col) covers world x ∈ [ox + col·cell, ox + (col+1)·cell),
 * y ∈ [oy + row·cell, oy + (row+1)·cell). Bit i of visible_mask is set
 * iff camera id i+1 sees the cell centre.
 */

export const GRID_MAGIC = "CGRD";
export const GRID_FORMAT_VERSION = 1;

const HEADER_BYTES = 40;
const CELL_BYTES = 12;

export class GridFormatError extends Error {
  override name = "GridFormatError";
}

export interface CoverageGrid {
  readonly originM: readonly [number, number];
  readonly cellM: number;
  readonly cols: number;
  readonly rows: number;
  readonly visibleMask: BigUint64Array;
  readonly monoCount: Uint16Array;
  readonly stereoPairs: Uint16Array;
}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]!) & 0xff]! ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

/** Index into the cell arrays for grid coordinates. */
export function cellIndex(grid: CoverageGrid, row: number, col: number): number {
  return row * grid.cols + col;
}

export function decodeGrid(buffer: ArrayBuffer): CoverageGrid {
  const bytes = new Uint8Array(buffer);
  if (bytes.length < HEADER_BYTES + 4) {
    throw new GridFormatError(`truncated grid: ${bytes.length} bytes`);
  }
  const view = new DataView(buffer);
  const magic = String.fromCharCode(bytes[0]!, bytes[1]!, bytes[2]!, bytes[3]!);
  if (magic !== GRID_MAGIC) {
    throw new GridFormatError(`bad magic ${JSON.stringify(magic)}`);
  }
  const version = view.getUint16(4, true);
  if (version !== GRID_FORMAT_VERSION) {
    throw new GridFormatError(
      `grid format version ${version} unsupported (expected ${GRID_FORMAT_VERSION})`,
    );
  }
  const ox = view.getFloat64(8, true);
  const oy = view.getFloat64(16, true);
  const cellM = view.getFloat64(24, true);
  const cols = view.getUint32(32, true);
  const rows = view.getUint32(36, true);
  const expected = HEADER_BYTES + rows * cols * CELL_BYTES + 4;
  if (bytes.length !== expected) {
    throw new GridFormatError(
      `expected ${expected} bytes for ${cols}x${rows} cells, found ${bytes.length}`,
    );
  }
  const stored = view.getUint32(bytes.length - 4, true);
  const actual = crc32(bytes.subarray(0, bytes.length - 4));
  if (stored !== actual) {
    throw new GridFormatError(
      `CRC mismatch (stored 0x${stored.toString(16)}, computed 0x${actual.toString(16)})`,
    );
  }
  const n = rows * cols;
  const visibleMask = new BigUint64Array(n);
  const monoCount = new Uint16Array(n);
  const stereoPairs = new Uint16Array(n);
  let offset = HEADER_BYTES;
  for (let i = 0; i < n; i++) {
    visibleMask[i] = view.getBigUint64(offset, true);
    monoCount[i] = view.getUint16(offset + 8, true);
    stereoPairs[i] = view.getUint16(offset + 10, true);
    offset += CELL_BYTES;
  }
  return { originM: [ox, oy], cellM, cols, rows, visibleMask, monoCount, stereoPairs };
}
