import { describe, expect, it } from "vitest";

import {
  COMMAND_TYPES,
  encodeFrame,
  FrameDecoder,
  LEGALITY,
} from "../src/protocol.js";

describe("encodeFrame", () => {
  it("prefixes the JSON payload with a little-endian u32 length", () => {
    const frame = encodeFrame({ type: "Pause" });
    const payload = new TextEncoder().encode(JSON.stringify({ type: "Pause" }));
    const n = new DataView(frame.buffer).getUint32(0, true);
    expect(n).toBe(payload.length);
    expect(Array.from(frame.subarray(4))).toEqual(Array.from(payload));
  });

  it("handles multi-byte UTF-8 text by byte length, not code points", () => {
    const frame = encodeFrame({ type: "Generate", prompt: "hélloé" });
    const n = new DataView(frame.buffer).getUint32(0, true);
    expect(n).toBe(frame.length - 4);
  });
});

describe("FrameDecoder", () => {
  it("reassembles a frame delivered one byte at a time", () => {
    const decoder = new FrameDecoder();
    const frame = encodeFrame({ type: "StateChanged", phase: "training" });
    const events = [];
    for (const byte of frame) {
      events.push(...decoder.feed(new Uint8Array([byte])));
    }
    expect(events).toEqual([{ type: "StateChanged", phase: "training" }]);
  });

  it("splits multiple frames arriving in one chunk", () => {
    const decoder = new FrameDecoder();
    const a = encodeFrame({ type: "GenerationDone" });
    const b = encodeFrame({ type: "StateChanged", phase: "idle" });
    const merged = new Uint8Array(a.length + b.length);
    merged.set(a);
    merged.set(b, a.length);
    expect(decoder.feed(merged)).toEqual([
      { type: "GenerationDone" },
      { type: "StateChanged", phase: "idle" },
    ]);
  });

  it("keeps partial trailing bytes for the next feed", () => {
    const decoder = new FrameDecoder();
    const frame = encodeFrame({ type: "GenerationDone" });
    expect(decoder.feed(frame.subarray(0, 6))).toEqual([]);
    expect(decoder.feed(frame.subarray(6))).toEqual([{ type: "GenerationDone" }]);
  });
});

describe("LEGALITY mirror", () => {
  it("covers every command in at least one phase", () => {
    for (const cmd of COMMAND_TYPES) {
      const phases = (["idle", "training", "paused"] as const).filter((p) =>
        LEGALITY[p].has(cmd),
      );
      expect(phases.length).toBeGreaterThan(0);
    }
  });

  it("gates training transitions by phase", () => {
    expect(LEGALITY.idle.has("StartTraining")).toBe(true);
    expect(LEGALITY.idle.has("Pause")).toBe(false);
    expect(LEGALITY.idle.has("Resume")).toBe(false);
    expect(LEGALITY.training.has("Pause")).toBe(true);
    expect(LEGALITY.training.has("Resume")).toBe(false);
    expect(LEGALITY.training.has("StartTraining")).toBe(false);
    expect(LEGALITY.paused.has("Resume")).toBe(true);
    expect(LEGALITY.paused.has("Pause")).toBe(false);
  });

  it("keeps Generate, Evaluate, and Export live during training", () => {
    for (const cmd of ["Generate", "Evaluate", "Export"] as const) {
      expect(LEGALITY.training.has(cmd)).toBe(true);
      expect(LEGALITY.paused.has(cmd)).toBe(true);
    }
  });
});
