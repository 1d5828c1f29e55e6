/** Render model: a pure fold over received events.
 *
 * All visual state is derived from the server stream; there is no client
 * side physics and no hidden clock, so replaying a recorded stream through
 * reduce() reproduces the identical state sequence.  The renderer just draws
 * whatever ViewState says.
 */

import { GeofenceDesc, ServerEvent, TelemetryFrame } from "./protocol.js";

export type CameraMode = "chase" | "fixed" | "top-down";

/** Gauge color law: full authority is green, the shield easing in is amber,
 * authority nearly handed to the backup is red. */
export const LAMBDA_AMBER_BELOW = 0.5;
export const LAMBDA_RED_BELOW = 0.1;

export type GaugeColor = "green" | "amber" | "red";

export function lambdaColor(lambda: number): GaugeColor {
  if (lambda < LAMBDA_RED_BELOW) return "red";
  if (lambda < LAMBDA_AMBER_BELOW) return "amber";
  return "green";
}

/** Box face nearest to being violated: the axis term attaining the min in
 * h = min_i (half_i^2 - d_i^2), with the side given by the sign of d.  An
 * exact center tie resolves to the positive side of the lowest axis. */
export interface ActiveFace {
  axis: 0 | 1 | 2;
  side: 1 | -1;
}

export function activeFace(position: [number, number, number], g: GeofenceDesc): ActiveFace {
  let axis: 0 | 1 | 2 = 0;
  let best = Infinity;
  let side: 1 | -1 = 1;
  for (let i = 0; i < 3; i++) {
    const d = position[i] - g.center[i];
    const term = g.halfExtents[i] * g.halfExtents[i] - d * d;
    if (term < best) {
      best = term;
      axis = i as 0 | 1 | 2;
      side = d < 0 ? -1 : 1;
    }
  }
  return { axis, side };
}

export interface Gauges {
  lambda: number;
  speed: number;
  hI: number;
  altitude: number;
  throttleCmd: number;
  throttleDes: number;
}

export interface ViewState {
  camera: CameraMode;
  connected: boolean;
  banner: string | null;
  session: number | null;
  scenario: string | null;
  phase: string;
  geofence: GeofenceDesc | null;
  position: [number, number, number] | null;
  quaternion: [number, number, number, number] | null;
  trail: [number, number, number][];
  gauges: Gauges | null;
  lambdaColor: GaugeColor | null;
  activeFace: ActiveFace | null;
  inputAgeMs: number | null;
  violated: boolean;
  frames: number;
  lastError: string | null;
}

export const TRAIL_MAX = 512;

export function initialViewState(): ViewState {
  return {
    camera: "top-down",
    connected: false,
    banner: null,
    session: null,
    scenario: null,
    phase: "idle",
    geofence: null,
    position: null,
    quaternion: null,
    trail: [],
    gauges: null,
    lambdaColor: null,
    activeFace: null,
    inputAgeMs: null,
    violated: false,
    frames: 0,
    lastError: null,
  };
}

/** Client-side happenings that the render model also reflects. */
export type ClientEvent =
  | { kind: "socket-open" }
  | { kind: "socket-closed" }
  | { kind: "version-mismatch"; detail: string }
  | { kind: "decode-error"; detail: string }
  | { kind: "set-camera"; camera: CameraMode };

export type ViewEvent = ServerEvent | ClientEvent;

function speed(v: [number, number, number]): number {
  return Math.hypot(v[0], v[1], v[2]);
}

function applyFrame(s: ViewState, f: TelemetryFrame): ViewState {
  const trail =
    s.trail.length >= TRAIL_MAX
      ? [...s.trail.slice(s.trail.length - TRAIL_MAX + 1), f.position]
      : [...s.trail, f.position];
  return {
    ...s,
    phase: f.phase,
    position: f.position,
    quaternion: f.quaternion,
    trail,
    gauges: {
      lambda: f.lambda,
      speed: speed(f.velocity),
      hI: f.hI,
      altitude: f.position[2],
      throttleCmd: f.uCmd[0],
      throttleDes: f.uDes[0],
    },
    lambdaColor: lambdaColor(f.lambda),
    activeFace: s.geofence ? activeFace(f.position, s.geofence) : null,
    inputAgeMs: f.inputAgeMs,
    violated: s.violated || f.phase === "violated-halt",
    frames: s.frames + 1,
  };
}

export function reduce(s: ViewState, ev: ViewEvent): ViewState {
  switch (ev.kind) {
    case "socket-open":
      return { ...s, connected: true, banner: null };
    case "socket-closed":
      return { ...s, connected: false, banner: s.banner ?? "connection lost" };
    case "version-mismatch":
      // the socket is being closed by the net layer; keep the reason visible
      return { ...s, connected: false, banner: `incompatible cockpit schema: ${ev.detail}` };
    case "decode-error":
      return { ...s, lastError: ev.detail };
    case "set-camera":
      return { ...s, camera: ev.camera };
    case "started":
      return {
        ...initialViewState(),
        camera: s.camera,
        connected: s.connected,
        session: ev.session,
        scenario: ev.scenario,
        phase: ev.phase,
      };
    case "phase":
      return { ...s, phase: ev.phase, violated: s.violated || ev.phase === "violated-halt" };
    case "fly-requested":
      return s;
    case "geofence":
      return { ...s, geofence: ev.geofence };
    case "telemetry":
      return applyFrame(s, ev.frame);
    case "stopped":
    case "status":
      return {
        ...s,
        phase: ev.stats.phase,
        violated: s.violated || ev.stats.violated,
        session: ev.stats.session,
      };
    case "server-error":
      return { ...s, lastError: ev.message };
    default:
      return s;
  }
}

/** Fold a whole recorded stream; used by replay tests and tooling. */
export function replay(events: ViewEvent[], start?: ViewState): ViewState[] {
  let s = start ?? initialViewState();
  const out: ViewState[] = [];
  for (const ev of events) {
    s = reduce(s, ev);
    out.push(s);
  }
  return out;
}
