/**
 * Telemetry readouts: battery, the shield's 8 LEDs in wire bit order, RSSI,
 * applied-vs-sent sequence numbers with the drop estimate, and pan/tilt.
 */

import { LED_BITS, TelemetryFrame } from "./protocol.js";
import { UiSessionState } from "./state.js";

export interface TelemetryViewModel {
  connection: string;
  batteryPct: number | null;
  batteryDepleted: boolean;
  leds: { name: string; on: boolean }[];
  rssiDbm: number | null;
  appliedSeq: number | null;
  sentSeq: number;
  dropEstimatePct: number;
  panDeg: number | null;
  tiltDeg: number | null;
  duty: number | null;
  dirs: string;
  decodeErrors: number;
  pose: string;
}

export function buildViewModel(s: UiSessionState): TelemetryViewModel {
  const t: TelemetryFrame | null = s.lastTelemetry;
  return {
    connection: s.connection,
    batteryPct: t ? t.batteryPct : null,
    batteryDepleted: t !== null && t.batteryPct === 0,
    leds: LED_BITS.map((name, bit) => ({ name, on: t !== null && ((t.leds >> bit) & 1) === 1 })),
    rssiDbm: t ? t.rssiDbm : null,
    appliedSeq: t ? t.seq : null,
    sentSeq: s.lastSentSeq,
    dropEstimatePct: s.dropEstimatePct,
    panDeg: t ? t.panDeg : null,
    tiltDeg: t ? t.tiltDeg : null,
    duty: t ? t.duty : null,
    dirs: t ? `${t.dirLeft}/${t.dirRight}` : "-",
    decodeErrors: s.decodeErrors,
    pose: t && t.pose
      ? `x ${(t.pose.xCm / 100).toFixed(2)} m, y ${(t.pose.yCm / 100).toFixed(2)} m, ` +
        `hdg ${(t.pose.headingCdeg / 100).toFixed(1)}°`
      : "",
  };
}

export class TelemetryPanel {
  private ledEls = new Map<string, HTMLElement>();

  constructor(private root: HTMLElement) {
    const leds = root.querySelector(".leds");
    if (leds) {
      for (const name of LED_BITS) {
        const el = document.createElement("span");
        el.className = "led";
        el.dataset.led = name;
        el.title = name;
        leds.appendChild(el);
        this.ledEls.set(name, el);
      }
    }
  }

  private text(selector: string, value: string): void {
    const el = this.root.querySelector(selector);
    if (el) el.textContent = value;
  }

  render(vm: TelemetryViewModel): void {
    this.text(".connection", vm.connection);
    this.root.classList.toggle("live", vm.connection === "Live");
    this.text(".battery", vm.batteryPct === null ? "--" : `${vm.batteryPct}%`);
    const banner = this.root.querySelector(".depleted-banner");
    if (banner) banner.classList.toggle("visible", vm.batteryDepleted);
    for (const led of vm.leds) {
      this.ledEls.get(led.name)?.classList.toggle("on", led.on);
    }
    this.text(".rssi", vm.rssiDbm === null ? "--" : `${vm.rssiDbm} dBm`);
    this.text(".seqs", `${vm.appliedSeq ?? "--"} / ${vm.sentSeq}`);
    this.text(".drop", `${vm.dropEstimatePct.toFixed(1)}%`);
    this.text(".pan", vm.panDeg === null ? "--" : `${vm.panDeg}°`);
    this.text(".tilt", vm.tiltDeg === null ? "--" : `${vm.tiltDeg}°`);
    this.text(".duty", vm.duty === null ? "--" : String(vm.duty));
    this.text(".dirs", vm.dirs);
    this.text(".decode-errors", String(vm.decodeErrors));
    this.text(".pose", vm.pose);
  }
}
