/**
 * Live video panel: renders the gateway's multipart stream, shows a stall
 * indicator when no image arrives for over a second (the UI face of the
 * 100 m cutoff), and falls back to 1 Hz snapshot polling on stream errors
 * while retrying the stream with backoff.
 */

export const STALL_AFTER_MS = 1000;
export const STALL_CHECK_MS = 200;
export const SNAPSHOT_POLL_MS = 1000;
export const RECONNECT_MIN_MS = 1000;
export const RECONNECT_MAX_MS = 8000;

/** One live multipart connection; stop() tears it down. */
export interface PartSource {
  start(onPart: (jpeg: Blob) => void, onError: (err: unknown) => void): void;
  stop(): void;
}

export type SourceFactory = (url: string) => PartSource;

/** Parses multipart/x-mixed-replace via fetch streaming. */
export class FetchMjpegSource implements PartSource {
  private controller = new AbortController();

  constructor(private url: string) {}

  start(onPart: (jpeg: Blob) => void, onError: (err: unknown) => void): void {
    fetch(this.url, { signal: this.controller.signal })
      .then(async (resp) => {
        if (!resp.ok || !resp.body) throw new Error(`stream http ${resp.status}`);
        const reader = resp.body.getReader();
        let buf: Uint8Array = new Uint8Array(0);
        for (;;) {
          const { done, value } = await reader.read();
          if (done) throw new Error("stream ended");
          buf = concat(buf, value);
          for (;;) {
            const part = extractPart(buf);
            if (!part) break;
            buf = part.rest;
            // copy into a fresh buffer so Blob sees a plain ArrayBuffer
            onPart(new Blob([new Uint8Array(part.jpeg)], { type: "image/jpeg" }));
          }
        }
      })
      .catch((err) => {
        if (!this.controller.signal.aborted) onError(err);
      });
  }

  stop(): void {
    this.controller.abort();
  }
}

function concat(a: Uint8Array, b: Uint8Array): Uint8Array {
  const out = new Uint8Array(a.length + b.length);
  out.set(a, 0);
  out.set(b, a.length);
  return out;
}

const CRLFCRLF = [13, 10, 13, 10];

function indexOfSeq(buf: Uint8Array, seq: number[], from: number): number {
  outer: for (let i = from; i <= buf.length - seq.length; i++) {
    for (let j = 0; j < seq.length; j++) {
      if (buf[i + j] !== seq[j]) continue outer;
    }
    return i;
  }
  return -1;
}

/** Pull one `--boundary\r\nheaders\r\n\r\n<jpeg>` part off the front. */
export function extractPart(buf: Uint8Array): { jpeg: Uint8Array; rest: Uint8Array } | null {
  const headEnd = indexOfSeq(buf, CRLFCRLF, 0);
  if (headEnd < 0) return null;
  const head = new TextDecoder().decode(buf.slice(0, headEnd));
  const m = /content-length:\s*(\d+)/i.exec(head);
  if (!m) {
    // not a part header yet (e.g. preamble); drop through the first CRLFCRLF
    return { jpeg: new Uint8Array(0), rest: buf.slice(headEnd + 4) };
  }
  const length = parseInt(m[1], 10);
  const start = headEnd + 4;
  if (buf.length < start + length) return null;
  return { jpeg: buf.slice(start, start + length), rest: buf.slice(start + length) };
}

export interface VideoPanelView {
  showImage(url: string): void;
  setStalled(stalled: boolean): void;
  setMode(mode: "stream" | "snapshot"): void;
}

export class VideoPanel {
  private source: PartSource | null = null;
  private lastImageAt: number;
  private stallTimer: ReturnType<typeof setInterval> | null = null;
  private snapshotTimer: ReturnType<typeof setInterval> | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private reconnectDelay = RECONNECT_MIN_MS;
  private objectUrl: string | null = null;
  stalled = false;
  mode: "stream" | "snapshot" = "stream";

  constructor(private view: VideoPanelView,
              private makeSource: SourceFactory,
              private streamUrl: string,
              private fetchSnapshot: () => Promise<Blob | null>,
              private now: () => number = () => Date.now()) {
    this.lastImageAt = this.now();
  }

  start(): void {
    this.openStream();
    this.stallTimer = setInterval(() => this.checkStall(), STALL_CHECK_MS);
  }

  stop(): void {
    this.source?.stop();
    for (const t of [this.stallTimer, this.snapshotTimer]) {
      if (t) clearInterval(t);
    }
    if (this.reconnectTimer) clearTimeout(this.reconnectTimer);
    this.stallTimer = this.snapshotTimer = null;
  }

  private openStream(): void {
    this.source?.stop();
    this.source = this.makeSource(this.streamUrl);
    this.source.start(
      (jpeg) => this.onImage(jpeg, "stream"),
      () => this.onStreamError(),
    );
  }

  private onImage(jpeg: Blob, from: "stream" | "snapshot"): void {
    if (jpeg.size === 0) return;
    this.lastImageAt = this.now();
    if (from === "stream") {
      this.reconnectDelay = RECONNECT_MIN_MS;
      if (this.mode !== "stream") {
        this.mode = "stream";
        this.view.setMode("stream");
        this.stopSnapshotPolling();
      }
    }
    if (this.objectUrl) URL.revokeObjectURL(this.objectUrl);
    this.objectUrl = URL.createObjectURL(jpeg);
    this.view.showImage(this.objectUrl);
  }

  private onStreamError(): void {
    this.mode = "snapshot";
    this.view.setMode("snapshot");
    if (!this.snapshotTimer) {
      this.snapshotTimer = setInterval(() => this.pollSnapshot(), SNAPSHOT_POLL_MS);
    }
    this.reconnectTimer = setTimeout(() => this.openStream(), this.reconnectDelay);
    this.reconnectDelay = Math.min(RECONNECT_MAX_MS, this.reconnectDelay * 2);
  }

  private stopSnapshotPolling(): void {
    if (this.snapshotTimer) {
      clearInterval(this.snapshotTimer);
      this.snapshotTimer = null;
    }
  }

  private pollSnapshot(): void {
    this.fetchSnapshot()
      .then((blob) => {
        if (blob) this.onImage(blob, "snapshot");
      })
      .catch(() => undefined);
  }

  private checkStall(): void {
    const stalled = this.now() - this.lastImageAt > STALL_AFTER_MS;
    if (stalled !== this.stalled) {
      this.stalled = stalled;
      this.view.setStalled(stalled);
    }
  }
}
