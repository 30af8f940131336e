/**
 * Wire protocol shared with the gateway: line-oriented ASCII frames with an
 * XOR checksum.
 *
 *   C <VERB> <arg> <seq>*<XX>\n   command (operator -> rover)
 *   T <seq> <bat> <duty> <dl> <dr> <pan> <tilt> <leds> <rssi> [x y h]*<XX>\n
 *   E <code>*<XX>\n               error reply
 *
 * <XX> is the XOR of every byte between the leading type character and the
 * '*', exclusive of both, as two uppercase hex digits.  Conformance against
 * the gateway implementation is pinned by golden vectors.
 */

export type Verb = "MOV" | "SPD" | "PAN" | "TLT" | "STP" | "PNG";

export const VERBS: Verb[] = ["MOV", "SPD", "PAN", "TLT", "STP", "PNG"];

export const MOV_FORWARD = 0;
export const MOV_BACKWARD = 1;
export const MOV_LEFT = 2;
export const MOV_RIGHT = 3;

export const SEQ_MOD = 65536;

/** Inclusive wire ranges; the rover clamps further to mechanical limits. */
export const ARG_RANGES: Record<Verb, [number, number]> = {
  MOV: [0, 3],
  SPD: [0, 255],
  PAN: [-180, 180],
  TLT: [-180, 180],
  STP: [0, 0],
  PNG: [0, 0],
};

/** Telemetry LED mask bits, LSB first. */
export const LED_BITS = [
  "power",
  "rst",
  "speed_ch1",
  "speed_ch2",
  "dir_ch1_fwd",
  "dir_ch1_rev",
  "dir_ch2_fwd",
  "dir_ch2_rev",
] as const;

export interface CommandFrame {
  verb: Verb;
  arg: number;
  seq: number;
}

export interface TelemetryFrame {
  seq: number;
  batteryPct: number;
  duty: number;
  dirLeft: string;
  dirRight: string;
  panDeg: number;
  tiltDeg: number;
  leds: number;
  rssiDbm: number;
  pose: { xCm: number; yCm: number; headingCdeg: number } | null;
}

export class ProtocolError extends Error {
  constructor(public code: "Malformed" | "BadChecksum" | "UnknownVerb" | "ArgOutOfRange",
              message: string) {
    super(`${code}: ${message}`);
  }
}

export function checksum(payload: string): number {
  let c = 0;
  for (let i = 0; i < payload.length; i++) {
    const b = payload.charCodeAt(i);
    if (b > 0xff) throw new ProtocolError("Malformed", "non-byte character");
    c ^= b;
  }
  return c;
}

function frame(lead: string, body: string): string {
  const payload = " " + body;
  const check = checksum(payload).toString(16).toUpperCase().padStart(2, "0");
  return `${lead}${payload}*${check}\n`;
}

export function clampArg(verb: Verb, arg: number): number {
  const [lo, hi] = ARG_RANGES[verb];
  return Math.max(lo, Math.min(hi, Math.round(arg)));
}

export function validateCommand(cmd: CommandFrame): void {
  if (!VERBS.includes(cmd.verb)) {
    throw new ProtocolError("UnknownVerb", `unknown verb ${cmd.verb}`);
  }
  const [lo, hi] = ARG_RANGES[cmd.verb];
  if (!Number.isInteger(cmd.arg) || cmd.arg < lo || cmd.arg > hi) {
    throw new ProtocolError("ArgOutOfRange", `${cmd.verb} arg ${cmd.arg}`);
  }
  if (!Number.isInteger(cmd.seq) || cmd.seq < 0 || cmd.seq >= SEQ_MOD) {
    throw new ProtocolError("ArgOutOfRange", `seq ${cmd.seq}`);
  }
}

export function encodeCommand(cmd: CommandFrame): string {
  validateCommand(cmd);
  return frame("C", `${cmd.verb} ${cmd.arg} ${cmd.seq}`);
}

function splitLine(data: string, lead: string): string[] {
  if (!data.endsWith("\n")) throw new ProtocolError("Malformed", "missing terminator");
  const text = data.slice(0, -1);
  if (text.includes("\n") || text.includes("\r")) {
    throw new ProtocolError("Malformed", "embedded line break");
  }
  if (!text.startsWith(lead + " ")) {
    throw new ProtocolError("Malformed", `not a ${lead} frame`);
  }
  const star = text.lastIndexOf("*");
  if (star < 0) throw new ProtocolError("Malformed", "missing checksum separator");
  const check = text.slice(star + 1);
  if (!/^[0-9A-F]{2}$/.test(check)) {
    throw new ProtocolError("Malformed", `bad checksum field ${check}`);
  }
  const payload = text.slice(1, star);
  if (checksum(payload) !== parseInt(check, 16)) {
    throw new ProtocolError("BadChecksum", `checksum mismatch on ${text}`);
  }
  const fields = payload.split(" ");
  if (fields.slice(1).some((f) => f === "")) {
    throw new ProtocolError("Malformed", "empty field");
  }
  return fields.slice(1);
}

function intField(token: string, what: string): number {
  if (!/^-?[0-9]+$/.test(token)) {
    throw new ProtocolError("Malformed", `non-integer ${what} ${token}`);
  }
  return parseInt(token, 10);
}

export function decodeCommand(line: string): CommandFrame {
  const fields = splitLine(line, "C");
  if (fields.length !== 3) {
    throw new ProtocolError("Malformed", `expected 3 command fields, got ${fields.length}`);
  }
  const verb = fields[0] as Verb;
  if (!VERBS.includes(verb)) throw new ProtocolError("UnknownVerb", `unknown verb ${fields[0]}`);
  const cmd = { verb, arg: intField(fields[1], "arg"), seq: intField(fields[2], "seq") };
  validateCommand(cmd);
  return cmd;
}

export function encodeTelemetry(t: TelemetryFrame): string {
  const leds = t.leds.toString(16).toUpperCase().padStart(2, "0");
  let body = `${t.seq} ${t.batteryPct} ${t.duty} ${t.dirLeft} ${t.dirRight} ` +
             `${t.panDeg} ${t.tiltDeg} ${leds} ${t.rssiDbm}`;
  if (t.pose) body += ` ${t.pose.xCm} ${t.pose.yCm} ${t.pose.headingCdeg}`;
  return frame("T", body);
}

export function decodeTelemetry(line: string): TelemetryFrame {
  const fields = splitLine(line, "T");
  if (fields.length !== 9 && fields.length !== 12) {
    throw new ProtocolError("Malformed", `expected 9 or 12 telemetry fields, got ${fields.length}`);
  }
  const dirLeft = fields[3];
  const dirRight = fields[4];
  if (!["F", "R", "B"].includes(dirLeft) || !["F", "R", "B"].includes(dirRight)) {
    throw new ProtocolError("ArgOutOfRange", `direction ${dirLeft}/${dirRight}`);
  }
  if (!/^[0-9A-F]{2}$/.test(fields[7])) {
    throw new ProtocolError("Malformed", `bad leds field ${fields[7]}`);
  }
  const t: TelemetryFrame = {
    seq: intField(fields[0], "seq"),
    batteryPct: intField(fields[1], "battery"),
    duty: intField(fields[2], "duty"),
    dirLeft,
    dirRight,
    panDeg: intField(fields[5], "pan"),
    tiltDeg: intField(fields[6], "tilt"),
    leds: parseInt(fields[7], 16),
    rssiDbm: intField(fields[8], "rssi"),
    pose: fields.length === 12
      ? { xCm: intField(fields[9], "x"), yCm: intField(fields[10], "y"),
          headingCdeg: intField(fields[11], "heading") }
      : null,
  };
  if (t.seq < 0 || t.seq >= SEQ_MOD) throw new ProtocolError("ArgOutOfRange", `seq ${t.seq}`);
  if (t.batteryPct < 0 || t.batteryPct > 100) {
    throw new ProtocolError("ArgOutOfRange", `battery ${t.batteryPct}`);
  }
  if (t.duty < 0 || t.duty > 255) throw new ProtocolError("ArgOutOfRange", `duty ${t.duty}`);
  if (t.panDeg < -90 || t.panDeg > 90) throw new ProtocolError("ArgOutOfRange", `pan ${t.panDeg}`);
  if (t.tiltDeg < -30 || t.tiltDeg > 60) {
    throw new ProtocolError("ArgOutOfRange", `tilt ${t.tiltDeg}`);
  }
  if (t.rssiDbm < -95 || t.rssiDbm > -40) {
    throw new ProtocolError("ArgOutOfRange", `rssi ${t.rssiDbm}`);
  }
  return t;
}

export function decodeErrorLine(line: string): string {
  const fields = splitLine(line, "E");
  if (fields.length !== 1) throw new ProtocolError("Malformed", "expected 1 error field");
  return fields[0];
}

/** Wrap-aware seen >= wanted over the 16-bit sequence space. */
export function seqAtLeast(seen: number, wanted: number): boolean {
  return ((seen - wanted + SEQ_MOD) % SEQ_MOD) < SEQ_MOD / 2;
}

export function seqGap(sent: number, applied: number): number {
  return (sent - applied + SEQ_MOD) % SEQ_MOD;
}
