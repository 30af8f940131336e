/**
 * Session-state reducer: clamping, Live-only key capture, drop estimation,
 * decode-error counting.
 */

import { describe, expect, it } from "vitest";

import { TelemetryFrame } from "../src/protocol.js";
import { apply, initialState } from "../src/state.js";

function telemetry(seq: number, batteryPct = 100): TelemetryFrame {
  return {
    seq, batteryPct, duty: 0, dirLeft: "B", dirRight: "B",
    panDeg: 0, tiltDeg: 0, leds: 1, rssiDbm: -40, pose: null,
  };
}

describe("settings clamping", () => {
  it("clamps speed to the wire range", () => {
    let s = initialState();
    s = apply(s, { kind: "speed", value: 999 });
    expect(s.speedSetting).toBe(255);
    s = apply(s, { kind: "speed", value: -4 });
    expect(s.speedSetting).toBe(0);
  });

  it("clamps pan and tilt to the rover's mechanical range", () => {
    let s = initialState();
    s = apply(s, { kind: "pan", value: 120 });
    expect(s.panSetting).toBe(90);
    s = apply(s, { kind: "tilt", value: -120 });
    expect(s.tiltSetting).toBe(-30);
    s = apply(s, { kind: "tilt", value: 75 });
    expect(s.tiltSetting).toBe(60);
  });
});

describe("connection gating", () => {
  it("captures keys only in Live state", () => {
    let s = initialState();
    s = apply(s, { kind: "key-down", key: "ArrowUp" });
    expect(s.heldKeys).toHaveLength(0);
    s = apply(s, { kind: "connection", value: "Live" });
    s = apply(s, { kind: "key-down", key: "ArrowUp" });
    expect(s.heldKeys).toEqual(["ArrowUp"]);
  });

  it("drops held keys when the link leaves Live", () => {
    let s = initialState();
    s = apply(s, { kind: "connection", value: "Live" });
    s = apply(s, { kind: "key-down", key: "w" });
    s = apply(s, { kind: "connection", value: "Connecting" });
    expect(s.heldKeys).toHaveLength(0);
  });
});

describe("telemetry bookkeeping", () => {
  it("tracks the latest frame and timestamps it", () => {
    let s = initialState();
    s = apply(s, { kind: "telemetry", frame: telemetry(7), at: 1234 });
    expect(s.lastTelemetry?.seq).toBe(7);
    expect(s.lastTelemetryAt).toBe(1234);
  });

  it("keeps the drop estimate near zero when echoes keep up", () => {
    let s = initialState();
    for (let i = 1; i <= 20; i++) {
      s = apply(s, { kind: "sent", seq: i });
      s = apply(s, { kind: "telemetry", frame: telemetry(i), at: i });
    }
    expect(s.dropEstimatePct).toBeLessThan(5);
  });

  it("raises the drop estimate when echoes fall behind", () => {
    let s = initialState();
    for (let i = 1; i <= 30; i++) {
      s = apply(s, { kind: "sent", seq: i });
      s = apply(s, { kind: "telemetry", frame: telemetry(1), at: i });
    }
    expect(s.dropEstimatePct).toBeGreaterThan(50);
  });

  it("counts decode errors", () => {
    let s = initialState();
    s = apply(s, { kind: "decode-error" });
    s = apply(s, { kind: "decode-error" });
    expect(s.decodeErrors).toBe(2);
  });
});
