/**
 * TCP client for the engine: connects to `charlm serve`, streams commands out
 * and events in, and feeds a SessionView. Runs under node (dev tooling and
 * tests); a browser build would swap this for a WebSocket bridge.
 */

import * as net from "node:net";

import { Command, encodeFrame, EngineEvent, FrameDecoder } from "./protocol.js";
import { SessionView } from "./state.js";

export interface ClientOptions {
  host: string;
  port: number;
  onEvent?: (event: EngineEvent) => void;
  onDisconnect?: (hadError: boolean) => void;
}

export class EngineClient {
  readonly view = new SessionView();
  private socket: net.Socket | null = null;
  private decoder = new FrameDecoder();
  private waiters: Array<(e: EngineEvent) => void> = [];

  constructor(private opts: ClientOptions) {}

  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      const sock = net.createConnection(this.opts.port, this.opts.host);
      sock.once("error", reject);
      sock.once("connect", () => {
        sock.removeListener("error", reject);
        sock.on("error", () => {});
        resolve();
      });
      sock.on("data", (chunk) => {
        for (const event of this.decoder.feed(chunk)) {
          this.view.apply(event);
          this.opts.onEvent?.(event);
          const waiters = this.waiters;
          this.waiters = [];
          for (const w of waiters) w(event);
        }
      });
      sock.on("close", (hadError) => {
        this.view.connected = false;
        this.opts.onDisconnect?.(hadError);
      });
      this.socket = sock;
    });
  }

  send(cmd: Command): void {
    if (!this.socket) throw new Error("not connected");
    this.view.recordCommand(cmd);
    this.socket.write(encodeFrame(cmd));
  }

  /** Resolve with the next event matching `predicate` (bounded wait). */
  nextEvent(
    predicate: (e: EngineEvent) => boolean,
    timeoutMs = 30_000,
  ): Promise<EngineEvent> {
    return new Promise((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new Error("timed out waiting for event")),
        timeoutMs,
      );
      const check = (e: EngineEvent) => {
        if (predicate(e)) {
          clearTimeout(timer);
          resolve(e);
        } else {
          this.waiters.push(check);
        }
      };
      this.waiters.push(check);
    });
  }

  close(): void {
    this.socket?.end();
    this.socket?.destroy();
    this.socket = null;
  }
}
