/**
 * Control-channel client against a scripted WebSocket: state transitions,
 * reconnect backoff, sequence assignment, and the outbound grammar.
 */

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { CtlClient } from "../src/net.js";
import { decodeCommand, encodeTelemetry } from "../src/protocol.js";
import { Connection } from "../src/state.js";

class MockWebSocket {
  static instances: MockWebSocket[] = [];
  static OPEN = 1;
  static CONNECTING = 0;
  readyState = MockWebSocket.CONNECTING;
  sent: string[] = [];
  onopen: (() => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;

  constructor(public url: string) {
    MockWebSocket.instances.push(this);
  }

  open(): void {
    this.readyState = MockWebSocket.OPEN;
    this.onopen?.();
  }

  receive(line: string): void {
    this.onmessage?.({ data: line });
  }

  drop(): void {
    this.readyState = 3;
    this.onclose?.();
  }

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.drop();
  }
}

function makeClient() {
  MockWebSocket.instances = [];
  const events = {
    connections: [] as Connection[],
    telemetry: [] as number[],
    errors: [] as string[],
    decodeErrors: 0,
    sent: [] as number[],
  };
  const client = new CtlClient("ws://gw/ctl", {
    onConnection: (c) => events.connections.push(c),
    onTelemetry: (t) => events.telemetry.push(t.seq),
    onErrorLine: (code) => events.errors.push(code),
    onDecodeError: () => events.decodeErrors++,
    onSent: (seq) => events.sent.push(seq),
  }, (url) => new MockWebSocket(url) as unknown as WebSocket);
  return { client, events };
}

beforeEach(() => vi.useFakeTimers());
afterEach(() => vi.useRealTimers());

describe("connection lifecycle", () => {
  it("goes Connecting then Live on open", () => {
    const { client, events } = makeClient();
    client.connect();
    expect(events.connections).toEqual(["Connecting"]);
    MockWebSocket.instances[0].open();
    expect(events.connections).toEqual(["Connecting", "Live"]);
    expect(client.live).toBe(true);
  });

  it("reconnects with growing backoff after a drop", () => {
    const { client, events } = makeClient();
    client.connect();
    MockWebSocket.instances[0].open();
    MockWebSocket.instances[0].drop();
    expect(events.connections[events.connections.length - 1]).toBe("Connecting");
    vi.advanceTimersByTime(500);
    expect(MockWebSocket.instances.length).toBe(2);
    MockWebSocket.instances[1].drop();
    vi.advanceTimersByTime(500);
    expect(MockWebSocket.instances.length).toBe(2);  // second wait is 1 s
    vi.advanceTimersByTime(600);
    expect(MockWebSocket.instances.length).toBe(3);
    MockWebSocket.instances[2].open();
    expect(client.live).toBe(true);
  });
});

describe("frames", () => {
  it("assigns wrapping sequence numbers and emits valid grammar", () => {
    const { client, events } = makeClient();
    client.connect();
    const ws = MockWebSocket.instances[0];
    ws.open();
    expect(client.send("SPD", 180)).toBe(true);
    expect(client.send("MOV", 0)).toBe(true);
    expect(ws.sent.length).toBe(2);
    const frames = ws.sent.map((line) => decodeCommand(line));
    expect(frames[0]).toEqual({ verb: "SPD", arg: 180, seq: 1 });
    expect(frames[1]).toEqual({ verb: "MOV", arg: 0, seq: 2 });
    expect(events.sent).toEqual([1, 2]);
  });

  it("refuses to send while the link is down", () => {
    const { client } = makeClient();
    expect(client.send("STP", 0)).toBe(false);
    client.connect();
    expect(client.send("STP", 0)).toBe(false);  // still Connecting
  });

  it("dispatches telemetry, error lines, and decode failures", () => {
    const { client, events } = makeClient();
    client.connect();
    const ws = MockWebSocket.instances[0];
    ws.open();
    ws.receive(encodeTelemetry({
      seq: 9, batteryPct: 80, duty: 0, dirLeft: "B", dirRight: "B",
      panDeg: 0, tiltDeg: 0, leds: 1, rssiDbm: -50, pose: null,
    }));
    ws.receive("E Malformed*77\n");
    ws.receive("garbage");
    expect(events.telemetry).toEqual([9]);
    expect(events.errors).toEqual(["Malformed"]);
    expect(events.decodeErrors).toBe(1);
  });
});
