/**
 * UI session view: a pure reducer over the engine's event stream plus the
 * command log the UI has dispatched. Keeping this free of DOM and sockets
 * makes every workflow rule unit-testable.
 */

import { CHART_POINT_CAP, DecimatedSeries } from "./decimate.js";
import { Command, CommandType, EngineEvent, LEGALITY, Phase } from "./protocol.js";

export interface CorpusInfo {
  id: string;
  name: string;
  token_count: number;
  sufficiency?: { tokens_per_parameter: number; verdict: string };
}

export interface PresetInfo {
  name: string;
  param_count: number;
  config: Record<string, number>;
}

export interface EvalReport {
  holdout_loss: number;
  holdout_perplexity: number;
  memorization_rate: number;
  charset_validity: number;
  grade: string;
}

export type SufficiencyBadge = "none" | "warning" | "caution" | "ok";

export class SessionView {
  phase: Phase = "idle";
  connected = false;
  protocolVersion: number | null = null;
  corpora = new Map<string, CorpusInfo>();
  presets: PresetInfo[] = [];
  selectedCorpus: string | null = null;
  modelConfig: Record<string, number> | null = null;
  paramCount: number | null = null;
  modelStep = 0;
  hasModel = false;
  lossSeries = new DecimatedSeries(CHART_POINT_CAP);
  logScale = false;
  tokensPerSec = 0;
  tokensSeen = 0;
  transcript = "";
  generating = false;
  evalReport: EvalReport | null = null;
  lastError: { code: string; message: string } | null = null;
  exportedCheckpoint: string | null = null; // base64 .llmc payload
  /** every command the UI has sent, in order (command-fidelity audit) */
  readonly sentCommands: Command[] = [];

  /** Mirrors the engine's legality table; UI controls disable on false. */
  isEnabled(command: CommandType): boolean {
    if (!this.connected) return false;
    return LEGALITY[this.phase].has(command);
  }

  sufficiencyBadge(): SufficiencyBadge {
    const id = this.selectedCorpus;
    const s = id ? this.corpora.get(id)?.sufficiency : undefined;
    if (!s) return "none";
    if (s.verdict === "insufficient") return "warning";
    if (s.verdict === "marginal") return "caution";
    return "ok";
  }

  apply(event: EngineEvent): void {
    switch (event.type) {
      case "Hello":
        this.connected = true;
        this.protocolVersion = event.protocol_version as number;
        break;
      case "StateChanged":
        this.phase = event.phase as Phase;
        break;
      case "CorpusInfo": {
        const info = event as unknown as CorpusInfo;
        this.corpora.set(info.id, info);
        break;
      }
      case "PresetInfo": {
        const p = event as unknown as PresetInfo;
        this.presets = this.presets.filter((x) => x.name !== p.name).concat(p);
        break;
      }
      case "ModelConfigured":
        this.hasModel = true;
        this.modelConfig = event.config as Record<string, number>;
        this.paramCount = event.param_count as number;
        this.modelStep = event.step as number;
        break;
      case "TrainingMetrics":
        this.lossSeries.push({
          step: event.step as number,
          loss: event.loss as number,
        });
        this.tokensPerSec = event.tokens_per_sec as number;
        this.tokensSeen = event.tokens_seen as number;
        this.modelStep = event.step as number;
        break;
      case "GeneratedToken":
        this.transcript += event.text as string;
        break;
      case "GenerationDone":
        this.generating = false;
        break;
      case "EvalResult":
        this.evalReport = event.report as unknown as EvalReport;
        break;
      case "ExportReady":
        this.exportedCheckpoint = event.data as string;
        break;
      case "Error":
        this.lastError = {
          code: event.code as string,
          message: event.message as string,
        };
        break;
    }
  }

  /** Record a user-triggered command; the client layer sends exactly these. */
  recordCommand(cmd: Command): void {
    this.sentCommands.push(cmd);
    if (cmd.type === "SelectCorpus") {
      this.selectedCorpus = cmd.id as string;
    }
    if (cmd.type === "Generate") {
      this.transcript = "";
      this.generating = true;
    }
  }
}
