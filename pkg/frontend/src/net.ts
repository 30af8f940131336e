/**
 * Control-channel client: one WebSocket to the gateway's /ctl endpoint,
 * frames in both directions, automatic reconnect with backoff.
 */

import {
  CommandFrame,
  ProtocolError,
  TelemetryFrame,
  Verb,
  decodeErrorLine,
  decodeTelemetry,
  encodeCommand,
  SEQ_MOD,
} from "./protocol.js";
import { Connection } from "./state.js";

export const BACKOFF_MIN_MS = 500;
export const BACKOFF_MAX_MS = 5000;

export interface CtlEvents {
  onConnection(state: Connection): void;
  onTelemetry(frame: TelemetryFrame): void;
  onErrorLine(code: string): void;
  onDecodeError(): void;
  onSent(seq: number): void;
}

type WsFactory = (url: string) => WebSocket;

export class CtlClient {
  private ws: WebSocket | null = null;
  private seq = 0;
  private backoff = BACKOFF_MIN_MS;
  private closed = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(private url: string, private events: CtlEvents,
              private makeWs: WsFactory = (u) => new WebSocket(u)) {}

  connect(): void {
    this.closed = false;
    this.events.onConnection("Connecting");
    this.open();
  }

  close(): void {
    this.closed = true;
    if (this.retryTimer) clearTimeout(this.retryTimer);
    this.ws?.close();
    this.events.onConnection("Disconnected");
  }

  get live(): boolean {
    return this.ws !== null && this.ws.readyState === 1; // OPEN
  }

  /** Encode and send one command; false when the link is down. */
  send(verb: Verb, arg: number): boolean {
    if (!this.live || this.ws === null) return false;
    this.seq = (this.seq + 1) % SEQ_MOD;
    const frame: CommandFrame = { verb, arg, seq: this.seq };
    try {
      this.ws.send(encodeCommand(frame));
    } catch {
      this.scheduleRetry();
      return false;
    }
    this.events.onSent(this.seq);
    return true;
  }

  private open(): void {
    let ws: WebSocket;
    try {
      ws = this.makeWs(this.url);
    } catch {
      this.scheduleRetry();
      return;
    }
    this.ws = ws;
    ws.onopen = () => {
      this.backoff = BACKOFF_MIN_MS;
      this.events.onConnection("Live");
    };
    ws.onmessage = (ev) => this.onMessage(String(ev.data));
    ws.onclose = () => this.scheduleRetry();
    ws.onerror = () => undefined; // close always follows
  }

  private onMessage(data: string): void {
    const line = data.endsWith("\n") ? data : data + "\n";
    try {
      this.events.onTelemetry(decodeTelemetry(line));
      return;
    } catch (e) {
      if (!(e instanceof ProtocolError)) throw e;
    }
    try {
      this.events.onErrorLine(decodeErrorLine(line));
    } catch {
      this.events.onDecodeError();
    }
  }

  private scheduleRetry(): void {
    this.ws = null;
    if (this.closed) return;
    this.events.onConnection("Connecting");
    if (this.retryTimer) clearTimeout(this.retryTimer);
    this.retryTimer = setTimeout(() => this.open(), this.backoff);
    this.backoff = Math.min(BACKOFF_MAX_MS, this.backoff * 2);
  }
}
