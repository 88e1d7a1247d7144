// /live event feed. WebSocket-first; the controller falls back to 2 s
// polling while the feed reports itself down. The constructor is
// injectable so tests (and node) can supply an implementation.

import type { LiveEvent } from './types.js';

export interface WebSocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  close(): void;
}

export type WebSocketCtor = new (url: string) => WebSocketLike;

export interface LiveFeedOptions {
  onEvent: (event: LiveEvent) => void;
  onStatus?: (connected: boolean) => void;
  webSocketCtor?: WebSocketCtor;
  reconnectDelayMs?: number;
}

export class LiveFeed {
  private ws: WebSocketLike | null = null;
  private stopped = false;
  connected = false;

  constructor(
    private url: string,
    private opts: LiveFeedOptions,
  ) {}

  start(): void {
    this.stopped = false;
    this.connect();
  }

  private ctor(): WebSocketCtor | null {
    if (this.opts.webSocketCtor) return this.opts.webSocketCtor;
    const globalCtor = (globalThis as Record<string, unknown>).WebSocket;
    return (globalCtor as WebSocketCtor) ?? null;
  }

  private connect(): void {
    const Ctor = this.ctor();
    if (!Ctor) {
      this.setConnected(false); // no WS available: polling carries the view
      return;
    }
    try {
      this.ws = new Ctor(this.url);
    } catch {
      this.setConnected(false);
      this.scheduleReconnect();
      return;
    }
    this.ws.onopen = () => this.setConnected(true);
    this.ws.onclose = () => {
      this.setConnected(false);
      this.scheduleReconnect();
    };
    this.ws.onmessage = (ev) => {
      try {
        this.opts.onEvent(JSON.parse(String(ev.data)) as LiveEvent);
      } catch {
        // malformed frame: ignore, snapshot polling will heal the view
      }
    };
  }

  private scheduleReconnect(): void {
    if (this.stopped) return;
    setTimeout(() => {
      if (!this.stopped) this.connect();
    }, this.opts.reconnectDelayMs ?? 2000);
  }

  private setConnected(value: boolean): void {
    this.connected = value;
    this.opts.onStatus?.(value);
  }

  stop(): void {
    this.stopped = true;
    this.ws?.close();
    this.ws = null;
    this.setConnected(false);
  }
}
