import { describe, expect, it } from "vitest";

import {
  DEADZONE_MAX,
  DEFAULT_MAPPING,
  DeviceSource,
  InputLoop,
  InputMapping,
  POLL_PERIOD_MS,
  RawSticks,
  shapeAxis,
  shapeSticks,
  validateMapping,
} from "../src/input.js";

function mapping(over: Partial<InputMapping> = {}): InputMapping {
  return { source: "gamepad", deadzone: 0.1, expo: 2, rateScale: 1, ...over };
}

describe("mapping validation", () => {
  it("accepts the documented deadzone range and rejects outside it", () => {
    expect(() => validateMapping(mapping({ deadzone: 0 }))).not.toThrow();
    expect(() => validateMapping(mapping({ deadzone: DEADZONE_MAX }))).not.toThrow();
    expect(() => validateMapping(mapping({ deadzone: -0.01 }))).toThrow();
    expect(() => validateMapping(mapping({ deadzone: 0.21 }))).toThrow();
    expect(() => validateMapping(mapping({ expo: 0.5 }))).toThrow();
    expect(() => validateMapping(mapping({ rateScale: 0 }))).toThrow();
    expect(() => validateMapping(mapping({ rateScale: 1.2 }))).toThrow();
  });
});

describe("axis shaping", () => {
  it("zeroes the deadzone and reaches full deflection", () => {
    const m = mapping({ deadzone: 0.1, expo: 2, rateScale: 0.8 });
    expect(shapeAxis(0.05, m)).toBe(0);
    expect(shapeAxis(-0.1, m)).toBe(0);
    expect(shapeAxis(1, m)).toBeCloseTo(0.8, 12);
    expect(shapeAxis(-1, m)).toBeCloseTo(-0.8, 12);
  });

  it("is odd and monotone over the whole travel", () => {
    const m = mapping({ deadzone: 0.08, expo: 3 });
    let prev = -Infinity;
    for (let i = 0; i <= 400; i++) {
      const x = -1 + (2 * i) / 400;
      const y = shapeAxis(x, m);
      expect(y).toBeCloseTo(-shapeAxis(-x, m), 12);
      expect(y + 1e-15).toBeGreaterThanOrEqual(prev);
      prev = y;
    }
  });

  it("linear expo is identity outside the deadzone renormalization", () => {
    const m = mapping({ deadzone: 0, expo: 1 });
    for (const x of [-1, -0.3, 0, 0.5, 1]) {
      expect(shapeAxis(x, m)).toBeCloseTo(x, 12);
    }
  });
});

describe("stick to axes convention", () => {
  it("centered sticks give zero rates and mid throttle (raw convention, hover is not center)", () => {
    const centered: RawSticks = { throttle: 0, roll: 0, pitch: 0, yaw: 0 };
    const axes = shapeSticks(centered, DEFAULT_MAPPING);
    expect(axes.rollRate).toBe(0);
    expect(axes.pitchRate).toBe(0);
    expect(axes.yawRate).toBe(0);
    expect(axes.throttle).toBeCloseTo(0.5, 12);
  });

  it("full-forward pitch maps to pitch_rate = +1 scaled", () => {
    const m = mapping({ deadzone: 0.1, expo: 1, rateScale: 1 });
    const axes = shapeSticks({ throttle: 0, roll: 0, pitch: 1, yaw: 0 }, m);
    expect(axes.pitchRate).toBeCloseTo(1, 12);
  });

  it("throttle spans [0,1] from stick travel", () => {
    const m = mapping();
    expect(shapeSticks({ throttle: -1, roll: 0, pitch: 0, yaw: 0 }, m).throttle).toBe(0);
    expect(shapeSticks({ throttle: 1, roll: 0, pitch: 0, yaw: 0 }, m).throttle).toBe(1);
  });
});

class ScriptedDevice implements DeviceSource {
  constructor(private readonly script: (RawSticks | null)[]) {}
  private i = 0;
  read(): RawSticks | null {
    const v = this.script[Math.min(this.i, this.script.length - 1)];
    this.i += 1;
    return v ?? null;
  }
}

describe("input loop", () => {
  it("polls at 100 Hz or faster by default", () => {
    expect(POLL_PERIOD_MS).toBeLessThanOrEqual(10);
  });

  it("sends one message per tick with a strictly monotone seq", () => {
    const stick: RawSticks = { throttle: 0.2, roll: 0, pitch: 0.4, yaw: 0 };
    const loop = new InputLoop(new ScriptedDevice([stick]), collect, DEFAULT_MAPPING, () => 0);
    const sent: number[] = [];
    function collect(msg: string): void {
      sent.push(JSON.parse(msg).payload.seq);
    }
    for (let i = 0; i < 50; i++) expect(loop.tick()).toBe(true);
    expect(sent).toHaveLength(50);
    for (let i = 1; i < sent.length; i++) expect(sent[i]).toBe(sent[i - 1]! + 1);
  });

  it("stops sending while the device is lost, seq stays monotone across replug", () => {
    const stick: RawSticks = { throttle: 0, roll: 0, pitch: 0, yaw: 0 };
    const script: (RawSticks | null)[] = [stick, stick, null, null, null, stick];
    const sent: number[] = [];
    const loop = new InputLoop(
      new ScriptedDevice(script),
      (msg) => sent.push(JSON.parse(msg).payload.seq),
      DEFAULT_MAPPING,
      () => 0,
    );
    const results = script.map(() => loop.tick());
    expect(results).toEqual([true, true, false, false, false, true]);
    expect(sent).toEqual([1, 2, 3]);
    expect(loop.lastAxes).not.toBeNull();
  });

  it("emitted payloads always satisfy the server ranges", () => {
    // seeded wild device sweep, no randomness source in the loop itself
    let state = 12345;
    const rand = () => {
      state = (state * 1103515245 + 12345) % 2147483648;
      return state / 2147483648;
    };
    const wild: DeviceSource = {
      read: () => ({
        throttle: 4 * rand() - 2,
        roll: 4 * rand() - 2,
        pitch: 4 * rand() - 2,
        yaw: 4 * rand() - 2,
      }),
    };
    const loop = new InputLoop(wild, check, DEFAULT_MAPPING, () => 0);
    function check(msg: string): void {
      const p = JSON.parse(msg).payload;
      expect(p.throttle).toBeGreaterThanOrEqual(0);
      expect(p.throttle).toBeLessThanOrEqual(1);
      for (const k of ["roll_rate", "pitch_rate", "yaw_rate"]) {
        expect(Math.abs(p[k])).toBeLessThanOrEqual(1);
      }
      expect(Number.isInteger(p.seq)).toBe(true);
    }
    for (let i = 0; i < 500; i++) loop.tick();
  });
});
