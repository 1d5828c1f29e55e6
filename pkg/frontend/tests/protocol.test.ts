import { describe, expect, it } from "vitest";

import {
  controlMessage,
  inputMessage,
  parseServerMessage,
  PROTOCOL_VERSION,
} from "../src/protocol.js";

const axes = { throttle: 0.7, rollRate: -0.25, pitchRate: 1.0, yawRate: 0.0 };

describe("input messages", () => {
  it("matches the wire contract the server validates", () => {
    const msg = JSON.parse(inputMessage(3, axes, 123.5));
    expect(msg.version).toBe(PROTOCOL_VERSION);
    expect(msg.type).toBe("input");
    expect(msg.payload).toEqual({
      seq: 3,
      timestamp_ms: 123.5,
      throttle: 0.7,
      roll_rate: -0.25,
      pitch_rate: 1.0,
      yaw_rate: 0.0,
    });
  });

  it("never emits out-of-range axes, the server would drop them", () => {
    const wild = { throttle: 1.8, rollRate: -3, pitchRate: 2, yawRate: -1.0001 };
    const p = JSON.parse(inputMessage(1, wild, 0)).payload;
    expect(p.throttle).toBe(1);
    expect(p.roll_rate).toBe(-1);
    expect(p.pitch_rate).toBe(1);
    expect(p.yaw_rate).toBe(-1);
  });

  it("rejects a non-integer or negative seq", () => {
    expect(() => inputMessage(1.5, axes, 0)).toThrow();
    expect(() => inputMessage(-1, axes, 0)).toThrow();
  });
});

describe("control messages", () => {
  it("carries the action and extras", () => {
    const msg = JSON.parse(controlMessage("start", { scenario: "s", max_ticks: 7 }));
    expect(msg.version).toBe(PROTOCOL_VERSION);
    expect(msg.payload).toEqual({ action: "start", scenario: "s", max_ticks: 7 });
  });
});

function wire(type: string, payload: unknown, version: unknown = PROTOCOL_VERSION): string {
  return JSON.stringify({ version, type, payload });
}

const framePayload = {
  t: 1.25,
  position: [1, 2, 3],
  quaternion: [1, 0, 0, 0],
  velocity: [0.5, 0, -9],
  u_des: [1, 0, 0, 0],
  u_cmd: [0.4, 0, 0, 0],
  h_I: 12.5,
  lambda: 0.42,
  v_perp: 9.0,
  phase: "flying",
  input_age_ms: 4.0,
  session: 2,
};

describe("server message decoding", () => {
  it("decodes telemetry with camelCase fields", () => {
    const r = parseServerMessage(wire("telemetry", framePayload));
    expect(r.ok).toBe(true);
    if (!r.ok || r.event.kind !== "telemetry") throw new Error("wrong kind");
    const f = r.event.frame;
    expect(f.position).toEqual([1, 2, 3]);
    expect(f.uCmd).toEqual([0.4, 0, 0, 0]);
    expect(f.hI).toBe(12.5);
    expect(f.lambda).toBe(0.42);
    expect(f.vPerp).toBe(9);
    expect(f.inputAgeMs).toBe(4);
  });

  it("decodes geofence, control events and errors", () => {
    let r = parseServerMessage(wire("geofence", { center: [0, 0, 10], half_extents: [10, 10, 9.5], margin: 0.6 }));
    expect(r.ok && r.event.kind === "geofence" && r.event.geofence.margin === 0.6).toBe(true);

    r = parseServerMessage(wire("control", { event: "started", session: 1, scenario: "x", phase: "armed" }));
    expect(r.ok && r.event.kind === "started" && r.event.phase === "armed").toBe(true);

    r = parseServerMessage(wire("control", { event: "phase", phase: "flying" }));
    expect(r.ok && r.event.kind === "phase" && r.event.phase === "flying").toBe(true);

    r = parseServerMessage(wire("control", { event: "status", session: 1, phase: "idle", ticks: 10, malformed: 0, violated: false, jitter_p50_ms: null, jitter_p99_ms: null }));
    expect(r.ok && r.event.kind === "status" && r.event.stats.violated === false).toBe(true);

    r = parseServerMessage(wire("error", { message: "nope", available: ["a"] }));
    expect(r.ok && r.event.kind === "server-error" && r.event.available?.[0] === "a").toBe(true);
  });

  it("flags a version mismatch for banner-and-disconnect", () => {
    const r = parseServerMessage(wire("telemetry", framePayload, 2));
    expect(r).toMatchObject({ ok: false, reason: "version-mismatch" });
    const missing = parseServerMessage(JSON.stringify({ type: "telemetry", payload: framePayload }));
    expect(missing).toMatchObject({ ok: false, reason: "version-mismatch" });
  });

  it("rejects junk without throwing", () => {
    expect(parseServerMessage("{oops")).toMatchObject({ ok: false, reason: "bad-json" });
    expect(parseServerMessage(wire("telemetry", { t: 1 }))).toMatchObject({ ok: false, reason: "malformed" });
    expect(parseServerMessage(wire("surprise", {}))).toMatchObject({ ok: false, reason: "malformed" });
    expect(parseServerMessage(wire("control", { event: "brand-new" }))).toMatchObject({ ok: false, reason: "malformed" });
    const nn = { ...framePayload, h_I: Number.NaN };
    expect(parseServerMessage(wire("telemetry", nn))).toMatchObject({ ok: false, reason: "malformed" });
  });
});
