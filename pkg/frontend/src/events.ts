/**
 * Typed events from the planner's WebSocket stream.
 */

export type PlannerEvent =
  | { type: "version_changed"; version: number }
  | { type: "job_progress"; version: number; progress: number }
  | { type: "job_done"; version: number; status: "done" | "cancelled" };

export class EventParseError extends Error {
  override name = "EventParseError";
}

export function parseEvent(text: string): PlannerEvent {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new EventParseError(`event is not JSON: ${text}`);
  }
  if (typeof raw !== "object" || raw === null) {
    throw new EventParseError(`event is not an object: ${text}`);
  }
  const ev = raw as Record<string, unknown>;
  const version = ev["version"];
  if (typeof version !== "number") {
    throw new EventParseError(`event has no numeric version: ${text}`);
  }
  switch (ev["type"]) {
    case "version_changed":
      return { type: "version_changed", version };
    case "job_progress": {
      const progress = ev["progress"];
      if (typeof progress !== "number") {
        throw new EventParseError(`job_progress has no numeric progress: ${text}`);
      }
      return { type: "job_progress", version, progress };
    }
    case "job_done": {
      const status = ev["status"];
      if (status !== "done" && status !== "cancelled") {
        throw new EventParseError(`job_done has invalid status: ${text}`);
      }
      return { type: "job_done", version, status };
    }
    default:
      throw new EventParseError(`unknown event type: ${text}`);
  }
}
