/**
 * Wire protocol shared with the engine: 4-byte little-endian length prefix
 * followed by a JSON document with a "type" field. Also mirrors the
 * phase/command legality table the engine publishes, so controls can be
 * disabled client-side without a round trip.
 */

export const PROTOCOL_VERSION = 1;

export type Phase = "idle" | "training" | "paused";

export type CommandType =
  | "ListCorpora"
  | "UploadCorpus"
  | "SelectCorpus"
  | "ListPresets"
  | "ConfigureModel"
  | "StartTraining"
  | "Pause"
  | "Resume"
  | "Generate"
  | "Evaluate"
  | "Export"
  | "Import"
  | "Shutdown";

export const COMMAND_TYPES: CommandType[] = [
  "ListCorpora", "UploadCorpus", "SelectCorpus", "ListPresets",
  "ConfigureModel", "StartTraining", "Pause", "Resume", "Generate",
  "Evaluate", "Export", "Import", "Shutdown",
];

/** Mirror of the engine's legality table (phase -> accepted commands). */
export const LEGALITY: Record<Phase, ReadonlySet<CommandType>> = {
  idle: new Set<CommandType>([
    "ListCorpora", "UploadCorpus", "SelectCorpus", "ListPresets",
    "ConfigureModel", "StartTraining", "Generate", "Evaluate",
    "Export", "Import", "Shutdown",
  ]),
  training: new Set<CommandType>([
    "ListCorpora", "UploadCorpus", "ListPresets", "Pause",
    "Generate", "Evaluate", "Export", "Shutdown",
  ]),
  paused: new Set<CommandType>([
    "ListCorpora", "UploadCorpus", "ListPresets", "Resume",
    "Generate", "Evaluate", "Export", "Shutdown",
  ]),
};

export interface Command {
  type: CommandType;
  [key: string]: unknown;
}

export interface EngineEvent {
  type: string;
  [key: string]: unknown;
}

export function encodeFrame(obj: unknown): Uint8Array {
  const payload = new TextEncoder().encode(JSON.stringify(obj));
  const frame = new Uint8Array(4 + payload.length);
  new DataView(frame.buffer).setUint32(0, payload.length, true);
  frame.set(payload, 4);
  return frame;
}

/** Incremental splitter for the length-prefixed frame stream. */
export class FrameDecoder {
  private buf = new Uint8Array(0);

  feed(data: Uint8Array): EngineEvent[] {
    const merged = new Uint8Array(this.buf.length + data.length);
    merged.set(this.buf);
    merged.set(data, this.buf.length);
    this.buf = merged;

    const out: EngineEvent[] = [];
    while (this.buf.length >= 4) {
      const n = new DataView(this.buf.buffer, this.buf.byteOffset).getUint32(0, true);
      if (this.buf.length < 4 + n) break;
      const payload = this.buf.subarray(4, 4 + n);
      out.push(JSON.parse(new TextDecoder().decode(payload)) as EngineEvent);
      this.buf = this.buf.subarray(4 + n);
    }
    return out;
  }
}
