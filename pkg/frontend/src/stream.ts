// Server-sent-events client for the venue price stream.
//
// Built on fetch + ReadableStream rather than EventSource so the same code
// runs in browsers and in node-based tests. Reconnects automatically with
// from_seq set to the last applied seq, and drops duplicate or out-of-order
// messages by seq comparison, so consumers see each trade exactly once and
// in order across any number of reconnects.

import type { PriceRow } from './api.js';

export interface TradeMessage {
  type: 'trade';
  seq: number;
  venue_id: string;
  changed_contracts: PriceRow[];
}

export interface SettledMessage {
  type: 'settled';
  seq: number;
  venue_id: string;
}

export type StreamMessage = TradeMessage | SettledMessage;

export type StreamStatus = 'connecting' | 'live' | 'stale' | 'closed';

export interface SseFrame {
  id: string | null;
  data: string;
}

// Incremental SSE wire parser: feed it chunks, collect complete frames.
// Comment-only frames (keep-alives) produce nothing.
export class SseParser {
  private buffer = '';

  push(chunk: string): SseFrame[] {
    this.buffer += chunk.replace(/\r\n/g, '\n');
    const frames: SseFrame[] = [];
    let cut: number;
    while ((cut = this.buffer.indexOf('\n\n')) !== -1) {
      const raw = this.buffer.slice(0, cut);
      this.buffer = this.buffer.slice(cut + 2);
      let id: string | null = null;
      const data: string[] = [];
      for (const line of raw.split('\n')) {
        if (line.startsWith(':')) continue;
        if (line.startsWith('id:')) id = line.slice(3).trim();
        else if (line.startsWith('data:')) data.push(line.slice(5).trimStart());
      }
      if (data.length > 0) frames.push({ id, data: data.join('\n') });
    }
    return frames;
  }
}

export interface StreamHandlers {
  onMessage: (message: StreamMessage) => void;
  onStatus?: (status: StreamStatus) => void;
}

type FetchLike = typeof fetch;

export class PriceStream {
  readonly venueId: string;
  lastSeq: number;
  retryDelayMs = 250;

  private readonly baseUrl: string;
  private readonly handlers: StreamHandlers;
  private readonly fetchImpl: FetchLike;
  private controller: AbortController | null = null;
  private stopped = false;
  private settled = false;
  private status: StreamStatus = 'connecting';

  constructor(
    baseUrl: string,
    venueId: string,
    handlers: StreamHandlers,
    fromSeq = 0,
    fetchImpl: FetchLike = fetch,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
    this.venueId = venueId;
    this.handlers = handlers;
    this.lastSeq = fromSeq;
    this.fetchImpl = fetchImpl;
  }

  start(): void {
    this.stopped = false;
    void this.loop();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
    this.setStatus('closed');
  }

  // Sever the current connection without stopping; the client must recover
  // by itself. Used to exercise reconnect behaviour.
  dropConnection(): void {
    this.controller?.abort();
  }

  private setStatus(status: StreamStatus): void {
    if (status === this.status) return;
    this.status = status;
    this.handlers.onStatus?.(status);
  }

  private async loop(): Promise<void> {
    while (!this.stopped && !this.settled) {
      this.controller = new AbortController();
      try {
        await this.consumeOnce(this.controller.signal);
      } catch {
        // fall through to reconnect
      }
      if (this.stopped || this.settled) break;
      this.setStatus('stale');
      await new Promise((resolve) => setTimeout(resolve, this.retryDelayMs));
    }
    if (this.settled) this.setStatus('closed');
  }

  private async consumeOnce(signal: AbortSignal): Promise<void> {
    this.setStatus(this.lastSeq === 0 ? 'connecting' : 'stale');
    const url = `${this.baseUrl}/venues/${encodeURIComponent(this.venueId)}/stream?from_seq=${this.lastSeq}`;
    const response = await this.fetchImpl(url, { signal });
    if (!response.ok || response.body === null) {
      throw new Error(`stream request failed: ${response.status}`);
    }
    this.setStatus('live');
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      for (const frame of parser.push(decoder.decode(value, { stream: true }))) {
        this.dispatch(frame);
      }
    }
  }

  private dispatch(frame: SseFrame): void {
    let message: StreamMessage;
    try {
      message = JSON.parse(frame.data) as StreamMessage;
    } catch {
      return;
    }
    if (typeof message.seq !== 'number' || message.seq <= this.lastSeq) return;
    this.lastSeq = message.seq;
    if (message.type === 'settled') this.settled = true;
    this.handlers.onMessage(message);
  }
}
