/**
 * Drive input loop: held direction keys stream MOV frames at 10 Hz, release
 * emits an immediate STP, and an idle, focused console pings at 2 Hz so the
 * rover watchdog sees liveness.  Blur is a safety event: STP at once and no
 * further traffic until focus returns.
 */

import { MOV_BACKWARD, MOV_FORWARD, MOV_LEFT, MOV_RIGHT, Verb } from "./protocol.js";

export const MOV_PERIOD_MS = 100;
export const PING_PERIOD_MS = 500;

export const KEY_DIRECTIONS: Record<string, number> = {
  ArrowUp: MOV_FORWARD,
  w: MOV_FORWARD,
  ArrowDown: MOV_BACKWARD,
  s: MOV_BACKWARD,
  ArrowLeft: MOV_LEFT,
  a: MOV_LEFT,
  ArrowRight: MOV_RIGHT,
  d: MOV_RIGHT,
};

export interface DriverHooks {
  /** Emit one frame; returns false when the link is not Live. */
  send(verb: Verb, arg: number): boolean;
  isLive(): boolean;
}

export class DriveController {
  private held: number[] = [];
  private focused = true;
  private movTimer: ReturnType<typeof setInterval> | null = null;
  private pingTimer: ReturnType<typeof setInterval> | null = null;

  constructor(private hooks: DriverHooks) {}

  start(): void {
    this.pingTimer = setInterval(() => this.pingTick(), PING_PERIOD_MS);
  }

  stop(): void {
    if (this.movTimer) clearInterval(this.movTimer);
    if (this.pingTimer) clearInterval(this.pingTimer);
    this.movTimer = null;
    this.pingTimer = null;
  }

  /** Directions currently held, most recent last. */
  heldDirections(): number[] {
    return [...this.held];
  }

  keyDown(key: string): void {
    const dir = KEY_DIRECTIONS[key];
    if (dir === undefined || !this.focused || !this.hooks.isLive()) return;
    if (this.held.includes(dir)) return;
    this.held.push(dir);
    if (this.held.length === 1) {
      this.emitMov();
      this.movTimer = setInterval(() => this.emitMov(), MOV_PERIOD_MS);
    }
  }

  keyUp(key: string): void {
    const dir = KEY_DIRECTIONS[key];
    if (dir === undefined) return;
    const before = this.held.length;
    this.held = this.held.filter((d) => d !== dir);
    if (before > 0 && this.held.length === 0) {
      this.stopDriving();
    }
  }

  /** Safety-on-blur: the last movement command out is always STP. */
  blur(): void {
    this.focused = false;
    if (this.held.length > 0) {
      this.held = [];
      this.stopDriving();
    }
  }

  focus(): void {
    this.focused = true;
  }

  private emitMov(): void {
    if (this.held.length === 0) return;
    if (!this.hooks.send("MOV", this.held[this.held.length - 1])) {
      // link dropped mid-drive: stop streaming, the reconnect path owns retry
      this.held = [];
      this.stopDriving();
    }
  }

  private stopDriving(): void {
    if (this.movTimer) {
      clearInterval(this.movTimer);
      this.movTimer = null;
    }
    this.hooks.send("STP", 0);
  }

  private pingTick(): void {
    if (this.focused && this.held.length === 0 && this.hooks.isLive()) {
      this.hooks.send("PNG", 0);
    }
  }
}
