/** 2D cockpit painter: top-down and side elevation plus a gauge column.
 *
 * Draws only from ViewState, never from clocks or globals, so identical
 * states produce identical draw call sequences.  The context type is the
 * small structural subset of CanvasRenderingContext2D actually used, which
 * lets tests record calls without a DOM.
 */

import { GeofenceDesc } from "./protocol.js";
import { ActiveFace, GaugeColor, ViewState } from "./view.js";

export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fill(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
}

/** Default airframe hovers at 30% throttle; the gauge draws a tick there as
 * a training aid (raw-throttle acro convention, center of stick is 0.5). */
export const HOVER_THROTTLE_TICK = 0.3;

export const GAUGE_COLUMN_PX = 190;

const COLOR: Record<GaugeColor, string> = {
  green: "#2e9e44",
  amber: "#d9a014",
  red: "#c03022",
};

interface Panel {
  x: number;
  y: number;
  w: number;
  h: number;
  ax: 0 | 1 | 2; // world axis on the horizontal screen axis
  ay: 0 | 1 | 2; // world axis on the vertical screen axis (screen-up positive)
}

function worldToPanel(p: Panel, g: GeofenceDesc, wx: number, wy: number): [number, number] {
  // fit the box with 10% padding, preserve aspect per axis (independent
  // scales keep both extents visible; shape distortion is acceptable here)
  const pad = 0.1;
  const sx = (p.w * (1 - 2 * pad)) / (2 * g.halfExtents[p.ax]);
  const sy = (p.h * (1 - 2 * pad)) / (2 * g.halfExtents[p.ay]);
  const px = p.x + p.w / 2 + (wx - g.center[p.ax]) * sx;
  const py = p.y + p.h / 2 - (wy - g.center[p.ay]) * sy;
  return [px, py];
}

function drawFence(ctx: Ctx2D, p: Panel, g: GeofenceDesc, face: ActiveFace | null, color: string): void {
  const [x0, y1] = worldToPanel(p, g, g.center[p.ax] - g.halfExtents[p.ax], g.center[p.ay] - g.halfExtents[p.ay]);
  const [x1, y0] = worldToPanel(p, g, g.center[p.ax] + g.halfExtents[p.ax], g.center[p.ay] + g.halfExtents[p.ay]);
  ctx.strokeStyle = "#777777";
  ctx.lineWidth = 1.5;
  ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);
  if (!face || (face.axis !== p.ax && face.axis !== p.ay)) return;
  // the binding face as a thick colored edge
  ctx.strokeStyle = color;
  ctx.lineWidth = 4;
  ctx.beginPath();
  if (face.axis === p.ax) {
    const x = face.side > 0 ? x1 : x0;
    ctx.moveTo(x, y0);
    ctx.lineTo(x, y1);
  } else {
    const y = face.side > 0 ? y0 : y1;
    ctx.moveTo(x0, y);
    ctx.lineTo(x1, y);
  }
  ctx.stroke();
}

function yawOf(q: [number, number, number, number]): number {
  const [w, x, y, z] = q;
  return Math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z));
}

function drawDrone(ctx: Ctx2D, p: Panel, g: GeofenceDesc, s: ViewState): void {
  if (!s.position) return;
  ctx.strokeStyle = "#9db4d0";
  ctx.lineWidth = 1;
  ctx.beginPath();
  let started = false;
  for (const tp of s.trail) {
    const [px, py] = worldToPanel(p, g, tp[p.ax], tp[p.ay]);
    if (!started) {
      ctx.moveTo(px, py);
      started = true;
    } else {
      ctx.lineTo(px, py);
    }
  }
  if (started) ctx.stroke();
  const [dx, dy] = worldToPanel(p, g, s.position[p.ax], s.position[p.ay]);
  ctx.fillStyle = "#e8eef6";
  ctx.beginPath();
  ctx.arc(dx, dy, 4, 0, 2 * Math.PI);
  ctx.fill();
  if (p.ax === 0 && p.ay === 1 && s.quaternion) {
    // heading tick in the top-down view
    const yaw = yawOf(s.quaternion);
    ctx.strokeStyle = "#e8eef6";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(dx, dy);
    ctx.lineTo(dx + 10 * Math.cos(yaw), dy - 10 * Math.sin(yaw));
    ctx.stroke();
  }
}

function bar(ctx: Ctx2D, x: number, y: number, w: number, h: number, frac: number, color: string): void {
  ctx.strokeStyle = "#666666";
  ctx.lineWidth = 1;
  ctx.strokeRect(x, y, w, h);
  ctx.fillStyle = color;
  ctx.fillRect(x, y, w * Math.min(1, Math.max(0, frac)), h);
}

function drawGauges(ctx: Ctx2D, x0: number, w: number, s: ViewState): void {
  const g = s.gauges;
  ctx.font = "12px monospace";
  ctx.fillStyle = "#cccccc";
  let y = 26;
  const line = (text: string) => {
    ctx.fillStyle = "#cccccc";
    ctx.fillText(text, x0 + 8, y);
    y += 16;
  };
  line(`phase    ${s.phase}`);
  line(`scenario ${s.scenario ?? "-"}`);
  if (!g) {
    line("no telemetry");
    return;
  }
  const color = COLOR[s.lambdaColor ?? "green"];
  line(`lambda   ${g.lambda.toFixed(3)}`);
  bar(ctx, x0 + 8, y, w - 30, 10, g.lambda, color);
  y += 22;
  line(`|v|      ${g.speed.toFixed(2)} m/s`);
  line(`h_I      ${g.hI.toFixed(2)}`);
  line(`alt      ${g.altitude.toFixed(2)} m`);
  line(`input age ${s.inputAgeMs === null ? "-" : s.inputAgeMs.toFixed(0)} ms`);
  line(`throttle cmd ${g.throttleCmd.toFixed(2)}`);
  bar(ctx, x0 + 8, y, w - 30, 10, g.throttleCmd, "#5a82b4");
  // hover tick mark on the throttle bar
  const tx = x0 + 8 + (w - 30) * HOVER_THROTTLE_TICK;
  ctx.strokeStyle = "#eeeeee";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.moveTo(tx, y - 3);
  ctx.lineTo(tx, y + 13);
  ctx.stroke();
  y += 22;
}

/** Paint one frame.  Pure function of (state, size). */
export function render(ctx: Ctx2D, s: ViewState, width: number, height: number): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#14181e";
  ctx.fillRect(0, 0, width, height);

  const mainW = width - GAUGE_COLUMN_PX;
  const half = Math.floor(height / 2);
  const top: Panel = { x: 0, y: 0, w: mainW, h: half, ax: 0, ay: 1 };
  const side: Panel = { x: 0, y: half, w: mainW, h: height - half, ax: 0, ay: 2 };

  ctx.font = "11px monospace";
  ctx.fillStyle = "#8899aa";
  ctx.fillText("top-down (x,y)", 8, 14);
  ctx.fillText("side (x,z)", 8, half + 14);

  if (s.geofence) {
    const faceColor = COLOR[s.lambdaColor ?? "green"];
    drawFence(ctx, top, s.geofence, s.activeFace, faceColor);
    drawFence(ctx, side, s.geofence, s.activeFace, faceColor);
    drawDrone(ctx, top, s.geofence, s);
    drawDrone(ctx, side, s.geofence, s);
  } else {
    ctx.fillText("waiting for geofence", 8, 30);
  }

  drawGauges(ctx, mainW, GAUGE_COLUMN_PX, s);

  if (s.banner) {
    ctx.fillStyle = "#c03022";
    ctx.fillRect(0, 0, width, 22);
    ctx.fillStyle = "#ffffff";
    ctx.font = "13px monospace";
    ctx.fillText(s.banner, 8, 15);
  }
  if (!s.connected && !s.banner) {
    ctx.fillStyle = "#d9a014";
    ctx.fillRect(0, 0, width, 22);
    ctx.fillStyle = "#14181e";
    ctx.font = "13px monospace";
    ctx.fillText("disconnected", 8, 15);
  }
}
