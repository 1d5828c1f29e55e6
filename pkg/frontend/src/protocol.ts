/** Wire schema for the cockpit channel.
 *
 * Every message in both directions is {version, type, payload}.  The version
 * field is mandatory; a peer speaking any other version is not decoded, the
 * caller is told to banner and disconnect.  Field names below mirror the wire
 * exactly (snake_case) so a reader can diff this file against a captured
 * frame.
 */

export const PROTOCOL_VERSION = 1;

/** Normalized stick axes.  Throttle raw [0,1] (acro convention, hover sits
 * wherever the airframe puts it, not at center), rates [-1,1] scaled to the
 * airframe rate limit on the server side. */
export interface InputAxes {
  throttle: number;
  rollRate: number;
  pitchRate: number;
  yawRate: number;
}

export interface GeofenceDesc {
  center: [number, number, number];
  halfExtents: [number, number, number];
  margin: number;
}

export interface TelemetryFrame {
  t: number;
  position: [number, number, number];
  quaternion: [number, number, number, number];
  velocity: [number, number, number];
  uDes: [number, number, number, number];
  uCmd: [number, number, number, number];
  hI: number;
  lambda: number;
  vPerp: number;
  phase: string;
  inputAgeMs: number;
  session: number;
}

export interface SessionStats {
  session: number;
  phase: string;
  ticks: number;
  malformed: number;
  violated: boolean;
  jitterP50Ms: number | null;
  jitterP99Ms: number | null;
}

export type ServerEvent =
  | { kind: "started"; session: number; scenario: string; phase: string }
  | { kind: "phase"; phase: string }
  | { kind: "fly-requested" }
  | { kind: "stopped"; stats: SessionStats }
  | { kind: "status"; stats: SessionStats }
  | { kind: "geofence"; geofence: GeofenceDesc }
  | { kind: "telemetry"; frame: TelemetryFrame }
  | { kind: "server-error"; message: string; available?: string[] };

export type ParseResult =
  | { ok: true; event: ServerEvent }
  | { ok: false; reason: "bad-json" | "version-mismatch" | "malformed"; detail: string };

function clamp(x: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, x));
}

/** Input message ready for socket.send.  Axes are clamped to the documented
 * ranges because the server silently drops out-of-range payloads as
 * malformed; the client must never produce one. */
export function inputMessage(seq: number, axes: InputAxes, timestampMs: number): string {
  if (!Number.isInteger(seq) || seq < 0) {
    throw new Error(`seq must be a non-negative integer, got ${seq}`);
  }
  return JSON.stringify({
    version: PROTOCOL_VERSION,
    type: "input",
    payload: {
      seq,
      timestamp_ms: timestampMs,
      throttle: clamp(axes.throttle, 0, 1),
      roll_rate: clamp(axes.rollRate, -1, 1),
      pitch_rate: clamp(axes.pitchRate, -1, 1),
      yaw_rate: clamp(axes.yawRate, -1, 1),
    },
  });
}

export function controlMessage(
  action: "start" | "fly" | "stop" | "status",
  extra: Record<string, unknown> = {},
): string {
  return JSON.stringify({
    version: PROTOCOL_VERSION,
    type: "control",
    payload: { action, ...extra },
  });
}

function vec(x: unknown, n: number): number[] | null {
  if (!Array.isArray(x) || x.length !== n) return null;
  const out: number[] = [];
  for (const v of x) {
    if (typeof v !== "number" || !Number.isFinite(v)) return null;
    out.push(v);
  }
  return out;
}

function num(x: unknown): number | null {
  return typeof x === "number" && Number.isFinite(x) ? x : null;
}

function stats(p: Record<string, unknown>): SessionStats {
  return {
    session: (num(p.session) ?? -1) | 0,
    phase: String(p.phase ?? ""),
    ticks: (num(p.ticks) ?? 0) | 0,
    malformed: (num(p.malformed) ?? 0) | 0,
    violated: Boolean(p.violated),
    jitterP50Ms: num(p.jitter_p50_ms),
    jitterP99Ms: num(p.jitter_p99_ms),
  };
}

/** Decode one server frame.  Unknown control events are malformed rather
 * than ignored: the UI must not silently desync from a newer server. */
export function parseServerMessage(text: string): ParseResult {
  let msg: unknown;
  try {
    msg = JSON.parse(text);
  } catch {
    return { ok: false, reason: "bad-json", detail: "not JSON" };
  }
  if (typeof msg !== "object" || msg === null) {
    return { ok: false, reason: "malformed", detail: "not an object" };
  }
  const m = msg as Record<string, unknown>;
  if (m.version !== PROTOCOL_VERSION) {
    return {
      ok: false,
      reason: "version-mismatch",
      detail: `peer speaks schema ${String(m.version)}, this client speaks ${PROTOCOL_VERSION}`,
    };
  }
  const p = (m.payload ?? {}) as Record<string, unknown>;
  switch (m.type) {
    case "error":
      return {
        ok: true,
        event: {
          kind: "server-error",
          message: String(p.message ?? "unknown error"),
          available: Array.isArray(p.available) ? p.available.map(String) : undefined,
        },
      };
    case "geofence": {
      const c = vec(p.center, 3);
      const h = vec(p.half_extents, 3);
      const margin = num(p.margin);
      if (!c || !h || margin === null) {
        return { ok: false, reason: "malformed", detail: "geofence fields" };
      }
      return {
        ok: true,
        event: {
          kind: "geofence",
          geofence: {
            center: c as [number, number, number],
            halfExtents: h as [number, number, number],
            margin,
          },
        },
      };
    }
    case "telemetry": {
      const pos = vec(p.position, 3);
      const quat = vec(p.quaternion, 4);
      const vel = vec(p.velocity, 3);
      const uDes = vec(p.u_des, 4);
      const uCmd = vec(p.u_cmd, 4);
      const t = num(p.t);
      const hI = num(p.h_I);
      const lambda = num(p.lambda);
      const vPerp = num(p.v_perp);
      const age = num(p.input_age_ms);
      const session = num(p.session);
      if (!pos || !quat || !vel || !uDes || !uCmd || t === null || hI === null ||
          lambda === null || vPerp === null || age === null || session === null) {
        return { ok: false, reason: "malformed", detail: "telemetry fields" };
      }
      return {
        ok: true,
        event: {
          kind: "telemetry",
          frame: {
            t,
            position: pos as [number, number, number],
            quaternion: quat as [number, number, number, number],
            velocity: vel as [number, number, number],
            uDes: uDes as [number, number, number, number],
            uCmd: uCmd as [number, number, number, number],
            hI,
            lambda,
            vPerp,
            phase: String(p.phase ?? ""),
            inputAgeMs: age,
            session: session | 0,
          },
        },
      };
    }
    case "control":
      switch (p.event) {
        case "started":
          return {
            ok: true,
            event: {
              kind: "started",
              session: (num(p.session) ?? -1) | 0,
              scenario: String(p.scenario ?? ""),
              phase: String(p.phase ?? ""),
            },
          };
        case "phase":
          return { ok: true, event: { kind: "phase", phase: String(p.phase ?? "") } };
        case "fly-requested":
          return { ok: true, event: { kind: "fly-requested" } };
        case "stopped":
          return { ok: true, event: { kind: "stopped", stats: stats(p) } };
        case "status":
          return { ok: true, event: { kind: "status", stats: stats(p) } };
        default:
          return { ok: false, reason: "malformed", detail: `control event ${String(p.event)}` };
      }
    default:
      return { ok: false, reason: "malformed", detail: `message type ${String(m.type)}` };
  }
}
