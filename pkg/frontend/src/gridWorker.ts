/**
 * Worker entry: decodes CGRD buffers off the UI thread.
 *
 * Receives an ArrayBuffer, posts back either {ok: true, grid} or
 * {ok: false, error}. Typed arrays travel via structured clone.
 */
import { decodeGrid } from "./cgrd.js";

interface WorkerScope {
  onmessage: ((ev: { data: ArrayBuffer }) => void) | null;
  postMessage(message: unknown): void;
}

const scope = globalThis as unknown as WorkerScope;

scope.onmessage = (ev) => {
  try {
    scope.postMessage({ ok: true, grid: decodeGrid(ev.data) });
  } catch (err) {
    scope.postMessage({ ok: false, error: String(err) });
  }
};
