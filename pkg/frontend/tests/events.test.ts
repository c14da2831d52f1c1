import { describe, expect, it } from "vitest";

import { EventParseError, parseEvent } from "../src/events.js";

describe("parseEvent", () => {
  it("parses the three event kinds", () => {
    expect(parseEvent('{"type": "version_changed", "version": 4}')).toEqual({
      type: "version_changed",
      version: 4,
    });
    expect(parseEvent('{"type": "job_progress", "version": 2, "progress": 0.25}')).toEqual({
      type: "job_progress",
      version: 2,
      progress: 0.25,
    });
    expect(parseEvent('{"type": "job_done", "version": 2, "status": "done"}')).toEqual({
      type: "job_done",
      version: 2,
      status: "done",
    });
    expect(parseEvent('{"type": "job_done", "version": 1, "status": "cancelled"}')).toEqual({
      type: "job_done",
      version: 1,
      status: "cancelled",
    });
  });

  it("rejects malformed payloads", () => {
    expect(() => parseEvent("nonsense")).toThrow(EventParseError);
    expect(() => parseEvent("42")).toThrow(/not an object/);
    expect(() => parseEvent('{"type": "version_changed"}')).toThrow(/version/);
    expect(() => parseEvent('{"type": "job_progress", "version": 1}')).toThrow(/progress/);
    expect(() => parseEvent('{"type": "job_done", "version": 1, "status": "maybe"}')).toThrow(
      /status/,
    );
    expect(() => parseEvent('{"type": "reboot", "version": 1}')).toThrow(/unknown event/);
  });
});
