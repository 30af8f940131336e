/**
 * Console session state and its reducer.  All state transitions flow through
 * apply() on the single UI event loop; network callbacks only dispatch.
 */

import { TelemetryFrame, clampArg, seqGap } from "./protocol.js";

export type Connection = "Disconnected" | "Connecting" | "Live";

export interface UiSessionState {
  connection: Connection;
  lastTelemetry: TelemetryFrame | null;
  lastTelemetryAt: number;
  heldKeys: string[];
  speedSetting: number;
  panSetting: number;
  tiltSetting: number;
  lastSentSeq: number;
  decodeErrors: number;
  dropEstimatePct: number;
}

export function initialState(): UiSessionState {
  return {
    connection: "Disconnected",
    lastTelemetry: null,
    lastTelemetryAt: 0,
    heldKeys: [],
    speedSetting: 180,
    panSetting: 0,
    tiltSetting: 0,
    lastSentSeq: 0,
    decodeErrors: 0,
    dropEstimatePct: 0,
  };
}

export type Action =
  | { kind: "connection"; value: Connection }
  | { kind: "telemetry"; frame: TelemetryFrame; at: number }
  | { kind: "decode-error" }
  | { kind: "key-down"; key: string }
  | { kind: "key-up"; key: string }
  | { kind: "clear-keys" }
  | { kind: "speed"; value: number }
  | { kind: "pan"; value: number }
  | { kind: "tilt"; value: number }
  | { kind: "sent"; seq: number };

export function apply(s: UiSessionState, a: Action): UiSessionState {
  switch (a.kind) {
    case "connection":
      return { ...s, connection: a.value, heldKeys: a.value === "Live" ? s.heldKeys : [] };
    case "telemetry": {
      const gap = seqGap(s.lastSentSeq, a.frame.seq);
      // in-flight commands look like a gap of ~1; anything beyond that is loss
      const instant = Math.min(100, Math.max(0, gap - 1) * 10);
      const drop = s.dropEstimatePct * 0.7 + instant * 0.3;
      return { ...s, lastTelemetry: a.frame, lastTelemetryAt: a.at,
               dropEstimatePct: Math.round(drop * 10) / 10 };
    }
    case "decode-error":
      return { ...s, decodeErrors: s.decodeErrors + 1 };
    case "key-down":
      if (s.connection !== "Live" || s.heldKeys.includes(a.key)) return s;
      return { ...s, heldKeys: [...s.heldKeys, a.key] };
    case "key-up":
      return { ...s, heldKeys: s.heldKeys.filter((k) => k !== a.key) };
    case "clear-keys":
      return { ...s, heldKeys: [] };
    case "speed":
      return { ...s, speedSetting: clampArg("SPD", a.value) };
    case "pan":
      return { ...s, panSetting: clampArg("PAN", Math.max(-90, Math.min(90, a.value))) };
    case "tilt":
      return { ...s, tiltSetting: clampArg("TLT", Math.max(-30, Math.min(60, a.value))) };
    case "sent":
      return { ...s, lastSentSeq: a.seq };
  }
}
