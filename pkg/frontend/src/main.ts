/** Browser entry point: wires socket, input devices, and the render loop.
 *
 * Single-threaded by construction: socket and input callbacks only enqueue,
 * the animation-frame loop drains the queue, folds the events into ViewState
 * and paints.  Keyboard is the fallback device; a gamepad takes over while
 * plugged in and its loss stops the send loop (the server then simulates
 * radio loss).
 */

import { DeviceSource, DEFAULT_MAPPING, InputLoop, POLL_PERIOD_MS, RawSticks } from "./input.js";
import { CockpitClient, EventQueue } from "./net.js";
import { HOVER_THROTTLE_TICK, render } from "./render.js";
import { initialViewState, reduce, ViewState } from "./view.js";

class KeyboardSource implements DeviceSource {
  private held = new Set<string>();
  private throttle = 2 * HOVER_THROTTLE_TICK - 1; // raw [-1,1], start at hover

  constructor(target: Window) {
    target.addEventListener("keydown", (e) => this.held.add((e as KeyboardEvent).code));
    target.addEventListener("keyup", (e) => this.held.delete((e as KeyboardEvent).code));
  }

  read(): RawSticks {
    // W/S trim throttle, arrows are pitch/roll, A/D yaw; keys give full
    // deflection, the shaping expo softens it
    const step = 0.02;
    if (this.held.has("KeyW")) this.throttle = Math.min(1, this.throttle + step);
    if (this.held.has("KeyS")) this.throttle = Math.max(-1, this.throttle - step);
    const axis = (neg: string, pos: string) => (this.held.has(pos) ? 1 : 0) - (this.held.has(neg) ? 1 : 0);
    return {
      throttle: this.throttle,
      roll: axis("ArrowLeft", "ArrowRight"),
      pitch: axis("ArrowDown", "ArrowUp"),
      yaw: axis("KeyA", "KeyD"),
    };
  }
}

class GamepadSource implements DeviceSource {
  read(): RawSticks | null {
    const pads = navigator.getGamepads ? navigator.getGamepads() : [];
    const pad = pads && pads[0];
    if (!pad || !pad.connected) return null;
    const a = pad.axes;
    return {
      throttle: -(a[1] ?? 0), // stick up = more throttle
      yaw: a[0] ?? 0,
      roll: a[2] ?? 0,
      pitch: -(a[3] ?? 0),
    };
  }
}

/** Gamepad while present, else keyboard.  Selecting "gamepad" hard requires
 * one: its loss returns null so the loop stops sending. */
class AutoSource implements DeviceSource {
  constructor(
    private readonly pad: GamepadSource,
    private readonly keys: KeyboardSource,
    private readonly mode: () => "gamepad" | "keyboard" | "auto",
  ) {}

  read(): RawSticks | null {
    const m = this.mode();
    if (m === "gamepad") return this.pad.read();
    if (m === "keyboard") return this.keys.read();
    return this.pad.read() ?? this.keys.read();
  }
}

function setupCanvas(canvas: HTMLCanvasElement): CanvasRenderingContext2D {
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas unavailable");
  const fit = () => {
    canvas.width = canvas.clientWidth;
    canvas.height = canvas.clientHeight;
  };
  window.addEventListener("resize", fit);
  fit();
  return ctx;
}

async function boot(): Promise<void> {
  const canvas = document.getElementById("cockpit") as HTMLCanvasElement;
  const scenarioSel = document.getElementById("scenario") as HTMLSelectElement;
  const sourceSel = document.getElementById("source") as HTMLSelectElement;
  const startBtn = document.getElementById("start") as HTMLButtonElement;
  const stopBtn = document.getElementById("stop") as HTMLButtonElement;
  const ctx = setupCanvas(canvas);

  const names: string[] = await (await fetch("/scenarios")).json();
  for (const n of names) {
    const opt = document.createElement("option");
    opt.value = n;
    opt.textContent = n;
    scenarioSel.appendChild(opt);
  }

  const proto = location.protocol === "https:" ? "wss" : "ws";
  const socket = new WebSocket(`${proto}://${location.host}/ws`);
  const queue = new EventQueue();
  const client = new CockpitClient(socket as never, queue);

  const source = new AutoSource(
    new GamepadSource(),
    new KeyboardSource(window),
    () => (sourceSel.value as "gamepad" | "keyboard" | "auto") ?? "auto",
  );
  const loop = new InputLoop(source, (msg) => client.sendRaw(msg), DEFAULT_MAPPING, () => performance.now());
  setInterval(() => loop.tick(), POLL_PERIOD_MS);

  startBtn.onclick = () => client.start(scenarioSel.value);
  stopBtn.onclick = () => client.stop();
  window.addEventListener("keydown", (e) => {
    if (e.code === "KeyC") {
      state = reduce(state, {
        kind: "set-camera",
        camera: state.camera === "top-down" ? "chase" : "top-down",
      });
    }
  });

  let state: ViewState = initialViewState();
  const paint = () => {
    for (const ev of queue.drain()) state = reduce(state, ev);
    render(ctx, state, canvas.width, canvas.height);
    requestAnimationFrame(paint);
  };
  requestAnimationFrame(paint);
}

boot().catch((e) => {
  document.body.textContent = `cockpit failed to boot: ${e}`;
});
