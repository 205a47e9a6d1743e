/** WebSocket connection with automatic reconnect. The backoff schedule is a
 * pure class so tests can drive it without sockets or timers.
 */

import type { ClientMessage, ServerMessage } from "./protocol.js";
import { parseServerMessage } from "./protocol.js";

export class Backoff {
  private attempt = 0;

  constructor(
    private readonly baseMs = 500,
    private readonly maxMs = 8000,
  ) {}

  /** Delay before the next attempt, doubling from base up to the cap. */
  nextDelayMs(): number {
    const delay = Math.min(this.maxMs, this.baseMs * 2 ** this.attempt);
    this.attempt += 1;
    return delay;
  }

  reset(): void {
    this.attempt = 0;
  }
}

export interface ConnectionHandlers {
  onMessage: (msg: ServerMessage) => void;
  onOpen: () => void;
  onClose: () => void;
}

/** Owns one WebSocket at a time and redials when it drops. */
export class Connection {
  private socket: WebSocket | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;
  private readonly backoff = new Backoff();

  constructor(
    private readonly url: string,
    private readonly handlers: ConnectionHandlers,
  ) {}

  start(): void {
    this.stopped = false;
    this.dial();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.socket?.close();
    this.socket = null;
  }

  /** True when a message can be sent right now. */
  get ready(): boolean {
    return this.socket !== null && this.socket.readyState === WebSocket.OPEN;
  }

  send(msg: ClientMessage): boolean {
    if (!this.ready) {
      return false;
    }
    this.socket!.send(JSON.stringify(msg));
    return true;
  }

  private dial(): void {
    const socket = new WebSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.backoff.reset();
      this.handlers.onOpen();
    };
    socket.onmessage = (ev: MessageEvent) => {
      if (typeof ev.data !== "string") {
        return;
      }
      const msg = parseServerMessage(ev.data);
      if (msg !== null) {
        this.handlers.onMessage(msg);
      }
    };
    socket.onclose = () => {
      if (this.socket !== socket) {
        return; // superseded by a newer dial
      }
      this.socket = null;
      this.handlers.onClose();
      if (!this.stopped) {
        this.timer = setTimeout(() => this.dial(), this.backoff.nextDelayMs());
      }
    };
    socket.onerror = () => {
      // onclose fires afterwards and owns the retry
    };
  }
}
