/** Stick input: device polling, axis shaping, and the send loop.
 *
 * Axis convention (RC mode 2): left stick vertical is throttle, left stick
 * horizontal is yaw, right stick is roll/pitch.  Throttle is a raw [0,1]
 * channel in the acro style: a spring-centered stick reads 0.5, which is NOT
 * hover; the airframe hovers wherever its thrust curve puts it (0.30 for the
 * default airframe) and the panel draws a tick mark there as a training aid.
 * Rates are shaped (deadzone, expo) and normalized to [-1,1]; the server
 * scales them by the airframe rate limit.
 */

import { InputAxes, inputMessage } from "./protocol.js";

export interface InputMapping {
  source: "gamepad" | "keyboard";
  /** Stick travel treated as zero, fraction of full deflection. */
  deadzone: number;
  /** Response curve exponent, 1 = linear, >1 softens the center. */
  expo: number;
  /** Scales the normalized rate channels, (0, 1]. */
  rateScale: number;
}

export const DEADZONE_MAX = 0.2;

export function validateMapping(m: InputMapping): InputMapping {
  if (!(m.deadzone >= 0 && m.deadzone <= DEADZONE_MAX)) {
    throw new Error(`deadzone must be in [0, ${DEADZONE_MAX}], got ${m.deadzone}`);
  }
  if (!(m.expo >= 1)) {
    throw new Error(`expo must be >= 1, got ${m.expo}`);
  }
  if (!(m.rateScale > 0 && m.rateScale <= 1)) {
    throw new Error(`rateScale must be in (0, 1], got ${m.rateScale}`);
  }
  return m;
}

export const DEFAULT_MAPPING: InputMapping = {
  source: "keyboard",
  deadzone: 0.05,
  expo: 2,
  rateScale: 1.0,
};

function clamp(x: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, x));
}

/** Deadzone then expo, sign-preserving and monotone.  Travel outside the
 * deadzone is renormalized so full deflection still reaches 1. */
export function shapeAxis(raw: number, m: InputMapping): number {
  const x = clamp(raw, -1, 1);
  const a = Math.abs(x);
  if (a <= m.deadzone) return 0;
  const s = (a - m.deadzone) / (1 - m.deadzone);
  return Math.sign(x) * Math.pow(s, m.expo) * m.rateScale;
}

/** Raw stick positions, all in [-1,1]; throttle -1 = idle, +1 = full. */
export interface RawSticks {
  throttle: number;
  roll: number;
  pitch: number;
  yaw: number;
}

/** A pollable input device.  read() returns null when the device is gone
 * (gamepad unplugged); the loop then stops sending and the server's
 * radio-silence timeout takes over. */
export interface DeviceSource {
  read(): RawSticks | null;
}

export function shapeSticks(raw: RawSticks, m: InputMapping): InputAxes {
  return {
    throttle: clamp((clamp(raw.throttle, -1, 1) + 1) / 2, 0, 1),
    rollRate: shapeAxis(raw.roll, m),
    pitchRate: shapeAxis(raw.pitch, m),
    yawRate: shapeAxis(raw.yaw, m),
  };
}

export const POLL_PERIOD_MS = 10; // 100 Hz floor on the sample rate

/** Polls a device and emits input messages with a strictly monotone seq.
 *
 * The loop owns the sequence counter; ticks are driven externally (setInterval
 * in the browser, direct calls in tests) so the loop itself has no timers to
 * leak.  A lost device suppresses sends but keeps the counter, so sequence
 * numbers stay monotone across replug.
 */
export class InputLoop {
  private seq = 0;
  private readonly mapping: InputMapping;
  lastAxes: InputAxes | null = null;

  constructor(
    private readonly source: DeviceSource,
    private readonly send: (msg: string) => void,
    mapping: InputMapping = DEFAULT_MAPPING,
    private readonly now: () => number = () => Date.now(),
  ) {
    this.mapping = validateMapping(mapping);
  }

  /** Sample once; returns true if a message went out. */
  tick(): boolean {
    const raw = this.source.read();
    if (raw === null) {
      this.lastAxes = null;
      return false;
    }
    const axes = shapeSticks(raw, this.mapping);
    this.seq += 1;
    this.lastAxes = axes;
    this.send(inputMessage(this.seq, axes, this.now()));
    return true;
  }

  get nextSeq(): number {
    return this.seq + 1;
  }
}
