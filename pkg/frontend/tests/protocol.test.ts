import { describe, expect, it } from "vitest";

import {
  PROTOCOL_VERSION,
  helloMessage,
  parseServerMessage,
  startMessage,
} from "../src/protocol.js";

describe("parseServerMessage", () => {
  it("accepts every known server type", () => {
    for (const type of ["welcome", "started", "snapshot", "ended", "error"]) {
      const msg = parseServerMessage(JSON.stringify({ type }));
      expect(msg).not.toBeNull();
      expect(msg!.type).toBe(type);
    }
  });

  it("rejects frames that are not JSON objects", () => {
    expect(parseServerMessage("not json")).toBeNull();
    expect(parseServerMessage("42")).toBeNull();
    expect(parseServerMessage('"snapshot"')).toBeNull();
    expect(parseServerMessage("null")).toBeNull();
    expect(parseServerMessage("[1, 2]")).toBeNull();
  });

  it("rejects unknown and missing types", () => {
    expect(parseServerMessage('{"type": "telemetry"}')).toBeNull();
    expect(parseServerMessage('{"tick": 5}')).toBeNull();
    expect(parseServerMessage('{"type": 7}')).toBeNull();
  });

  it("keeps payload fields intact", () => {
    const raw = { type: "ended", reason: "hit", final_score: 300 };
    const msg = parseServerMessage(JSON.stringify(raw));
    expect(msg).toEqual(raw);
  });
});

describe("helloMessage", () => {
  it("always carries the protocol version", () => {
    expect(helloMessage("").protocol_version).toBe(PROTOCOL_VERSION);
  });

  it("includes the participant label only when set", () => {
    expect(helloMessage("p-07").participant_label).toBe("p-07");
    expect("participant_label" in helloMessage("")).toBe(false);
  });
});

describe("startMessage", () => {
  it("passes a valid seed through as a number", () => {
    expect(startMessage(1, "42").seed).toBe(42);
    expect(startMessage(1, "  7 ").seed).toBe(7);
    expect(startMessage(1, "0").seed).toBe(0);
  });

  it("omits the seed when the field is empty or invalid", () => {
    for (const text of ["", "   ", "abc", "-3", "1.5", "1e400"]) {
      expect("seed" in startMessage(1, text)).toBe(false);
    }
  });

  it("keeps numeric and string scenario refs as given", () => {
    expect(startMessage(3, "").scenario).toBe(3);
    expect(startMessage("custom-night", "").scenario).toBe("custom-night");
  });
});
