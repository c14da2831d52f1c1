/**
 * Metrics panel rows from the X-Coverage-Metrics header.
 *
 * Values are verbatim slices of the header text — the panel never
 * reformats a number, so what the user reads is string-equal to what
 * the API reported.
 */
import { rawScalars } from "./format.js";

export interface MetricRow {
  /** Dotted path inside the metrics document. */
  key: string;
  label: string;
  /** Raw source text of the value, exactly as the API wrote it. */
  value: string;
}

const TOP_LEVEL: readonly { key: string; label: string }[] = [
  { key: "stereo_fraction_inner", label: "Stereo fraction (inner ROI)" },
  { key: "mono_fraction_inner", label: "Mono fraction (inner ROI)" },
  { key: "bicycle_stereo_fraction", label: "Stereo fraction (bicycle lanes)" },
];

export function metricsRows(headerText: string): MetricRow[] {
  const raw = rawScalars(headerText);
  const rows: MetricRow[] = [];
  for (const { key, label } of TOP_LEVEL) {
    const value = raw.get(key);
    if (value !== undefined) rows.push({ key, label, value });
  }
  const crosswalks: MetricRow[] = [];
  const approaches: MetricRow[] = [];
  for (const [path, value] of raw) {
    const cw = /^crosswalk_stereo_fractions\.(.+)$/.exec(path);
    if (cw !== null) {
      crosswalks.push({ key: path, label: `Crosswalk ${cw[1]} stereo fraction`, value });
      continue;
    }
    const ap = /^approach_covered_m\.(.+)$/.exec(path);
    if (ap !== null) {
      approaches.push({ key: path, label: `Approach ${ap[1]} covered (m)`, value });
    }
  }
  crosswalks.sort((a, b) => a.key.localeCompare(b.key, undefined, { numeric: true }));
  approaches.sort((a, b) => a.key.localeCompare(b.key));
  return [...rows, ...crosswalks, ...approaches];
}
