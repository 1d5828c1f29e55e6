/** Cockpit channel client.
 *
 * Wraps a WebSocket-shaped object and marshals everything (decoded server
 * events, socket lifecycle, decode failures) into one queue that the render
 * loop drains; no callback touches view state directly.  A version mismatch
 * from the peer banners and disconnects: continuing to fly against an
 * undecodable schema would be worse than stopping.
 */

import { controlMessage, parseServerMessage } from "./protocol.js";
import { ViewEvent } from "./view.js";

/** The subset of WebSocket the client needs; tests substitute a fake. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
}

export class EventQueue {
  private items: ViewEvent[] = [];

  push(ev: ViewEvent): void {
    this.items.push(ev);
  }

  /** Hand over everything pending, oldest first. */
  drain(): ViewEvent[] {
    const out = this.items;
    this.items = [];
    return out;
  }

  get size(): number {
    return this.items.length;
  }
}

export class CockpitClient {
  private closed = false;

  constructor(
    private readonly socket: SocketLike,
    readonly queue: EventQueue,
  ) {
    socket.onopen = () => this.queue.push({ kind: "socket-open" });
    socket.onclose = () => {
      if (!this.closed) {
        this.closed = true;
        this.queue.push({ kind: "socket-closed" });
      }
    };
    socket.onmessage = (ev) => this.handle(typeof ev.data === "string" ? ev.data : String(ev.data));
  }

  private handle(text: string): void {
    const r = parseServerMessage(text);
    if (r.ok) {
      this.queue.push(r.event);
      return;
    }
    if (r.reason === "version-mismatch") {
      this.queue.push({ kind: "version-mismatch", detail: r.detail });
      this.closed = true;
      this.socket.close();
      return;
    }
    this.queue.push({ kind: "decode-error", detail: `${r.reason}: ${r.detail}` });
  }

  /** Raw input frames from the input loop go straight through. */
  sendRaw(msg: string): void {
    if (!this.closed) this.socket.send(msg);
  }

  start(scenario: string, maxTicks = 0): void {
    this.sendRaw(controlMessage("start", { scenario, max_ticks: maxTicks }));
  }

  stop(): void {
    this.sendRaw(controlMessage("stop"));
  }

  status(): void {
    this.sendRaw(controlMessage("status"));
  }

  get isClosed(): boolean {
    return this.closed;
  }
}
