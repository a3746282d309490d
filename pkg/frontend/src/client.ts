/** REST + SSE client for the twin service. Pure transport: no physics,
 * no statistics — payloads are passed through untouched. */

import { SseParser } from "./sse.js";
import type {
  FrameEvent,
  ModelInfo,
  PredictionResult,
  StatusInfo,
  VerdictEvent,
} from "./types.js";

export interface AnomalyRequest {
  kind: "splash" | "object";
  cx: number;
  cy: number;
  radius: number;
  magnitude: number;
}

export interface EventHandlers {
  onFrame?: (frame: FrameEvent, raw: string) => void;
  onVerdict?: (verdict: VerdictEvent, raw: string) => void;
  onPrediction?: (info: { w: number; l: number; horizon_s: number }) => void;
  onOverflow?: () => void;
  onConnectionChange?: (live: boolean) => void;
}

export interface Subscription {
  close(): void;
}

export class RequestError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok) return;
  let detail = resp.statusText;
  try {
    const body = (await resp.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    /* non-JSON error body */
  }
  throw new RequestError(resp.status, detail);
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

export class TwinClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path);
    await raiseForStatus(resp);
    return (await resp.json()) as T;
  }

  status(): Promise<StatusInfo> {
    return this.getJson("/api/status");
  }

  model(): Promise<ModelInfo> {
    return this.getJson("/api/model");
  }

  async setVoltage(volts: number): Promise<void> {
    const resp = await this.fetchImpl(this.baseUrl + "/api/control/voltage", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ volts }),
    });
    await raiseForStatus(resp);
  }

  async injectAnomaly(req: AnomalyRequest): Promise<number> {
    const resp = await this.fetchImpl(this.baseUrl + "/api/control/anomaly", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
    await raiseForStatus(resp);
    const body = (await resp.json()) as { id: number };
    return body.id;
  }

  async removeAnomaly(id: number): Promise<void> {
    const resp = await this.fetchImpl(
      this.baseUrl + `/api/control/anomaly/${id}`,
      { method: "DELETE" },
    );
    await raiseForStatus(resp);
  }

  /** Ticket flow: 202 while the worker computes, 200 with the forecast.
   * Rejects with RequestError(409) while the history is too short. */
  async requestPrediction(
    opts: { w?: number; l?: number; profile?: string },
    pollMs = 100,
    timeoutMs = 30000,
  ): Promise<PredictionResult> {
    const params = new URLSearchParams();
    if (opts.profile) params.set("profile", opts.profile);
    if (opts.w !== undefined) params.set("w", String(opts.w));
    if (opts.l !== undefined) params.set("l", String(opts.l));
    const url = this.baseUrl + "/api/prediction?" + params.toString();
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const resp = await this.fetchImpl(url);
      if (resp.status === 200) return (await resp.json()) as PredictionResult;
      if (resp.status === 202) {
        if (Date.now() > deadline) {
          throw new RequestError(202, "prediction timed out");
        }
        await sleep(pollMs);
        continue;
      }
      await raiseForStatus(resp);
    }
  }

  /** Subscribe to /events with automatic reconnect and exponential
   * backoff. Duplicate suppression is the store's job (event ids). */
  subscribe(handlers: EventHandlers, initialBackoffMs = 250): Subscription {
    let closed = false;
    let controller: AbortController | null = null;

    const run = async () => {
      let backoff = initialBackoffMs;
      while (!closed) {
        controller = new AbortController();
        try {
          const resp = await this.fetchImpl(this.baseUrl + "/events", {
            signal: controller.signal,
          });
          if (!resp.ok || !resp.body) throw new Error(`HTTP ${resp.status}`);
          handlers.onConnectionChange?.(true);
          backoff = initialBackoffMs;
          const parser = new SseParser();
          const reader = resp.body.getReader();
          const decoder = new TextDecoder();
          for (;;) {
            const { value, done } = await reader.read();
            if (done) break;
            for (const ev of parser.feed(decoder.decode(value, { stream: true }))) {
              if (ev.event === "frame") {
                handlers.onFrame?.(JSON.parse(ev.data) as FrameEvent, ev.data);
              } else if (ev.event === "verdict") {
                handlers.onVerdict?.(
                  JSON.parse(ev.data) as VerdictEvent,
                  ev.data,
                );
              } else if (ev.event === "prediction") {
                handlers.onPrediction?.(JSON.parse(ev.data));
              } else if (ev.event === "overflow") {
                handlers.onOverflow?.();
              }
            }
          }
        } catch {
          /* fall through to reconnect */
        }
        handlers.onConnectionChange?.(false);
        if (closed) break;
        await sleep(backoff);
        backoff = Math.min(backoff * 2, 10000);
      }
    };
    void run();

    return {
      close() {
        closed = true;
        controller?.abort();
      },
    };
  }
}
