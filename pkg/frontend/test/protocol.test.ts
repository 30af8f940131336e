/**
 * Conformance against the gateway implementation: the golden vector file is
 * generated and verified by the primary component's test suite; every line
 * here must encode/decode bit-exact so the two codecs cannot drift.
 */

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  CommandFrame,
  ProtocolError,
  decodeCommand,
  decodeErrorLine,
  decodeTelemetry,
  encodeCommand,
  encodeTelemetry,
  seqAtLeast,
  clampArg,
} from "../src/protocol.js";

const here = dirname(fileURLToPath(import.meta.url));
const vectors = JSON.parse(
  readFileSync(join(here, "..", "..", "tests", "golden", "protocol_vectors.json"), "utf-8"));

describe("golden vector conformance", () => {
  it("encodes and decodes every command vector bit-exact", () => {
    for (const item of vectors.commands) {
      const frame: CommandFrame = { verb: item.verb, arg: item.arg, seq: item.seq };
      expect(encodeCommand(frame)).toBe(item.line);
      expect(decodeCommand(item.line)).toEqual(frame);
    }
    expect(vectors.commands.length).toBeGreaterThanOrEqual(40);
  });

  it("encodes and decodes every telemetry vector bit-exact", () => {
    for (const item of vectors.telemetry) {
      const frame = {
        seq: item.seq,
        batteryPct: item.battery_pct,
        duty: item.duty,
        dirLeft: item.dir_left,
        dirRight: item.dir_right,
        panDeg: item.pan_deg,
        tiltDeg: item.tilt_deg,
        leds: item.leds,
        rssiDbm: item.rssi_dbm,
        pose: item.pose
          ? { xCm: item.pose[0], yCm: item.pose[1], headingCdeg: item.pose[2] }
          : null,
      };
      expect(encodeTelemetry(frame)).toBe(item.line);
      expect(decodeTelemetry(item.line)).toEqual(frame);
    }
  });

  it("decodes every error-line vector", () => {
    for (const item of vectors.errors) {
      expect(decodeErrorLine(item.line)).toBe(item.code);
    }
  });

  it("rejects every reject vector with the matching error code", () => {
    for (const item of vectors.rejects) {
      let code: string | null = null;
      try {
        decodeCommand(item.line);
      } catch (e) {
        if (e instanceof ProtocolError) code = e.code;
      }
      expect(code, item.line).toBe(item.error);
    }
  });
});

describe("codec basics", () => {
  it("round-trips a sample of frames", () => {
    const frames: CommandFrame[] = [
      { verb: "STP", arg: 0, seq: 0 },
      { verb: "MOV", arg: 3, seq: 65535 },
      { verb: "PAN", arg: -180, seq: 1 },
      { verb: "SPD", arg: 255, seq: 32768 },
    ];
    for (const f of frames) {
      expect(decodeCommand(encodeCommand(f))).toEqual(f);
    }
  });

  it("refuses to encode out-of-range args", () => {
    expect(() => encodeCommand({ verb: "SPD", arg: 300, seq: 1 })).toThrow(ProtocolError);
    expect(() => encodeCommand({ verb: "MOV", arg: -1, seq: 1 })).toThrow(ProtocolError);
    expect(() => encodeCommand({ verb: "PNG", arg: 1, seq: 1 })).toThrow(ProtocolError);
  });

  it("clamps control values to wire ranges", () => {
    expect(clampArg("SPD", 400)).toBe(255);
    expect(clampArg("SPD", -3)).toBe(0);
    expect(clampArg("PAN", 200)).toBe(180);
    expect(clampArg("TLT", -200)).toBe(-180);
  });

  it("compares sequence numbers across the wrap", () => {
    expect(seqAtLeast(5, 5)).toBe(true);
    expect(seqAtLeast(4, 5)).toBe(false);
    expect(seqAtLeast(3, 65530)).toBe(true);
  });
});
