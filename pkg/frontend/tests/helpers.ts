import { Ctx2D } from "../src/render.js";

/** Records every draw call; good enough to assert what got painted and to
 * time the paint path without a DOM. */
export class FakeCtx implements Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern = "";
  strokeStyle: string | CanvasGradient | CanvasPattern = "";
  lineWidth = 1;
  font = "";
  calls: [string, ...unknown[]][] = [];

  private log(name: string, ...args: unknown[]): void {
    this.calls.push([name, ...args]);
  }
  beginPath(): void { this.log("beginPath"); }
  moveTo(x: number, y: number): void { this.log("moveTo", x, y); }
  lineTo(x: number, y: number): void { this.log("lineTo", x, y); }
  stroke(): void { this.log("stroke", this.strokeStyle, this.lineWidth); }
  fill(): void { this.log("fill", this.fillStyle); }
  arc(x: number, y: number, r: number, a0: number, a1: number): void { this.log("arc", x, y, r, a0, a1); }
  fillRect(x: number, y: number, w: number, h: number): void { this.log("fillRect", this.fillStyle, x, y, w, h); }
  strokeRect(x: number, y: number, w: number, h: number): void { this.log("strokeRect", this.strokeStyle, x, y, w, h); }
  fillText(text: string, x: number, y: number): void { this.log("fillText", text, x, y); }
  clearRect(x: number, y: number, w: number, h: number): void { this.log("clearRect", x, y, w, h); }

  texts(): string[] {
    return this.calls.filter((c) => c[0] === "fillText").map((c) => String(c[1]));
  }
}
