/**
 * Console wiring: connects the control channel, keyboard/button driving,
 * sliders, the video panel and telemetry readouts to the gateway.
 */

import { CtlClient } from "./net.js";
import { Verb } from "./protocol.js";
import { DriveController, KEY_DIRECTIONS } from "./driver.js";
import { FetchMjpegSource, VideoPanel } from "./video.js";
import { TelemetryPanel, buildViewModel } from "./telemetry.js";
import { Action, UiSessionState, apply, initialState } from "./state.js";

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

let state: UiSessionState = initialState();
let panel: TelemetryPanel;

function dispatch(action: Action): void {
  state = apply(state, action);
  panel.render(buildViewModel(state));
}

function gatewayBase(): string {
  const input = $("gateway-host") as HTMLInputElement;
  return input.value || window.location.host;
}

function start(): void {
  panel = new TelemetryPanel($("telemetry"));
  const hostInput = $("gateway-host") as HTMLInputElement;
  hostInput.value = localStorage.getItem("roversim-host") || window.location.host;

  let client: CtlClient | null = null;

  const send = (verb: Verb, arg: number): boolean => {
    if (!client || state.connection !== "Live") return false;
    return client.send(verb, arg);
  };

  const driver = new DriveController({
    send,
    isLive: () => state.connection === "Live",
  });
  driver.start();

  const video = new VideoPanel(
    {
      showImage: (url) => (($("video-image") as HTMLImageElement).src = url),
      setStalled: (stalled) => $("stall").classList.toggle("visible", stalled),
      setMode: (mode) => ($("video-mode").textContent =
        mode === "stream" ? "live stream" : "snapshot fallback"),
    },
    (url) => new FetchMjpegSource(url),
    `http://${gatewayBase()}/video`,
    async () => {
      const resp = await fetch(`http://${gatewayBase()}/snapshot`);
      return resp.ok ? resp.blob() : null;
    },
  );

  const connect = () => {
    localStorage.setItem("roversim-host", hostInput.value);
    client?.close();
    client = new CtlClient(`ws://${gatewayBase()}/ctl`, {
      onConnection: (value) => dispatch({ kind: "connection", value }),
      onTelemetry: (frame) => dispatch({ kind: "telemetry", frame, at: Date.now() }),
      onErrorLine: () => dispatch({ kind: "decode-error" }),
      onDecodeError: () => dispatch({ kind: "decode-error" }),
      onSent: (seq) => dispatch({ kind: "sent", seq }),
    });
    client.connect();
  };
  $("connect").addEventListener("click", connect);

  // driving: keyboard and on-screen buttons share the controller
  window.addEventListener("keydown", (ev) => {
    if (ev.key in KEY_DIRECTIONS && !ev.repeat) {
      ev.preventDefault();
      driver.keyDown(ev.key);
      dispatch({ kind: "key-down", key: ev.key });
    }
  });
  window.addEventListener("keyup", (ev) => {
    if (ev.key in KEY_DIRECTIONS) {
      driver.keyUp(ev.key);
      dispatch({ kind: "key-up", key: ev.key });
    }
  });
  window.addEventListener("blur", () => {
    driver.blur();
    dispatch({ kind: "clear-keys" });
  });
  window.addEventListener("focus", () => driver.focus());

  for (const [id, key] of [["btn-fwd", "ArrowUp"], ["btn-back", "ArrowDown"],
                           ["btn-left", "ArrowLeft"], ["btn-right", "ArrowRight"]] as const) {
    const el = $(id);
    el.addEventListener("pointerdown", () => driver.keyDown(key));
    el.addEventListener("pointerup", () => driver.keyUp(key));
    el.addEventListener("pointerleave", () => driver.keyUp(key));
  }
  $("btn-stop").addEventListener("click", () => send("STP", 0));

  const speed = $("speed") as HTMLInputElement;
  speed.addEventListener("change", () => {
    dispatch({ kind: "speed", value: Number(speed.value) });
    send("SPD", state.speedSetting);
  });
  const pan = $("pan") as HTMLInputElement;
  pan.addEventListener("change", () => {
    dispatch({ kind: "pan", value: Number(pan.value) });
    send("PAN", state.panSetting);
  });
  const tilt = $("tilt") as HTMLInputElement;
  tilt.addEventListener("change", () => {
    dispatch({ kind: "tilt", value: Number(tilt.value) });
    send("TLT", state.tiltSetting);
  });
  $("center").addEventListener("click", () => {
    pan.value = "0";
    tilt.value = "0";
    dispatch({ kind: "pan", value: 0 });
    dispatch({ kind: "tilt", value: 0 });
    send("PAN", 0);
    send("TLT", 0);
  });

  connect();
  video.start();
  panel.render(buildViewModel(state));
}

window.addEventListener("DOMContentLoaded", start);
