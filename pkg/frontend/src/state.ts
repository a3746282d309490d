/** Dashboard state: everything rendered comes from here, and everything
 * here came verbatim from a service payload — the client computes no
 * statistics of its own. */

import type { FrameEvent, PredictionResult, VerdictEvent } from "./types.js";

export type Connection = "connecting" | "live" | "stale";

export const VERDICT_RING = 1000;

export interface PredictionView {
  requestedAt: number; // monotonically increasing request token
  result: PredictionResult;
}

export class UiStore {
  connection: Connection = "connecting";
  latestFrame: FrameEvent | null = null;
  verdicts: VerdictEvent[] = [];
  prediction: PredictionView | null = null;
  pendingAcks = 0;

  private lastFrameId = -1;
  private lastVerdictId = -1;
  private predictionToken = 0;

  /** Apply one SSE event; returns false for duplicates (reconnect replay). */
  applyFrame(frame: FrameEvent): boolean {
    if (frame.id <= this.lastFrameId) return false;
    this.lastFrameId = frame.id;
    this.latestFrame = frame;
    return true;
  }

  applyVerdict(verdict: VerdictEvent): boolean {
    if (verdict.id <= this.lastVerdictId) return false;
    this.lastVerdictId = verdict.id;
    this.verdicts.push(verdict);
    if (this.verdicts.length > VERDICT_RING) {
      this.verdicts.splice(0, this.verdicts.length - VERDICT_RING);
    }
    return true;
  }

  get latestVerdict(): VerdictEvent | null {
    return this.verdicts.length
      ? this.verdicts[this.verdicts.length - 1]!
      : null;
  }

  /** The anomaly overlay is visible whenever the newest verdict carries
   * a nonempty anomaly pixel set. */
  get overlayVisible(): boolean {
    const v = this.latestVerdict;
    return v !== null && v.anomaly_pixels.length > 0;
  }

  setConnection(c: Connection): void {
    this.connection = c;
  }

  /** Two rapid prediction requests: the latest token wins; a stale
   * result arriving later is dropped so the view never flickers back. */
  nextPredictionToken(): number {
    return ++this.predictionToken;
  }

  applyPrediction(token: number, result: PredictionResult): boolean {
    if (token !== this.predictionToken) return false;
    if (this.prediction && this.prediction.requestedAt > token) return false;
    this.prediction = { requestedAt: token, result };
    return true;
  }
}
